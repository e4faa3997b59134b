#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "test_support.hpp"
#include "vhist/config.hpp"
#include "vhist/datasets.hpp"
#include "vhist/io.hpp"
#include "vhist/translate.hpp"

using namespace vhist;
using vhist::testing::scratch_dir;

namespace {

CycleGANConfig tiny_config() {
  CycleGANConfig c;
  c.base_width = 4;
  c.n_res_blocks = 1;
  c.n_disc_layers = 1;
  c.epochs_flat = 2;
  c.epochs_decay = 2;
  c.seed = 5;
  return c;
}

DataSettings tiny_data() {
  DataSettings d;
  d.tile_size = 32;
  d.phantom_size = 64;
  d.x_tiles = 16;
  d.y_tiles = 16;
  return d;
}

struct Tiles {
  std::vector<Image> x, y;
};

const Tiles& tiles() {
  static const Tiles t = [] {
    const RunConfig rc;
    return Tiles{make_x_tiles(tiny_data(), rc.acquisition(), rc.conversion(), 21),
                 make_y_tiles(tiny_data(), HePalette{}, 21)};
  }();
  return t;
}

TrainOptions epochs(int n) {
  TrainOptions o;
  o.epochs = n;
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("tiny dataset shape") {
  REQUIRE(tiles().x.size() == 16);
  REQUIRE(tiles().y.size() == 16);
  for (const Image& t : tiles().x) CHECK((t.width() == 32 && t.height() == 32 && t.channels() == 3));
}

TEST_CASE("zero epochs leave the initialization untouched") {
  TranslationModel m(tiny_config());
  const TranslationModel init = m.clone();
  const TrainingResult r = train(m, tiles().x, tiles().y, epochs(0));
  CHECK(r.history.empty());
  CHECK(r.iterations == 0);
  CHECK(m.max_weight_difference(init) == 0.0);
  CHECK(m.id() == init.id());
  CHECK(m.epoch() == 0);

  TrainOptions none;
  none.max_iterations = 0;
  train(m, tiles().x, tiles().y, none);
  CHECK(m.max_weight_difference(init) == 0.0);
}

TEST_CASE("same seed and data give the same run") {
  TranslationModel a(tiny_config()), b(tiny_config());
  CHECK(a.id() == b.id());
  const TrainingResult ra = train(a, tiles().x, tiles().y, epochs(2));
  const TrainingResult rb = train(b, tiles().x, tiles().y, epochs(2));
  REQUIRE(ra.history.size() == 2);
  CHECK(ra.iterations == 8);
  CHECK(loss_history_csv(ra.history) == loss_history_csv(rb.history));
  CHECK(a.max_weight_difference(b) == 0.0);
  CHECK(a.epoch() == 2);
  for (const LossRecord& r : ra.history) {
    CHECK(std::isfinite(r.cycle));
    CHECK(r.cycle >= 0.0);
    CHECK(r.lr == doctest::Approx(2e-4));
  }

  CycleGANConfig other = tiny_config();
  other.seed = 6;
  TranslationModel c(other);
  CHECK(c.id() != TranslationModel(tiny_config()).id());
}

TEST_CASE("checkpoint round trip") {
  TranslationModel m(tiny_config());
  train(m, tiles().x, tiles().y, epochs(1));
  const auto dir = scratch_dir("checkpoint");
  const auto path = dir / "model.vhck";
  m.save(path);
  const TranslationModel back = TranslationModel::load(path);
  CHECK(back.id() == m.id());
  CHECK(back.epoch() == 1);
  CHECK(back.config() == m.config());
  CHECK(back.max_weight_difference(m) == 0.0);
  const Image probe = tiles().x[3];
  CHECK(back.to_he(probe) == m.to_he(probe));
  CHECK(back.to_source(tiles().y[2]) == m.to_source(tiles().y[2]));

  const std::string bytes = slurp(path);

  std::string flipped = bytes;
  flipped[flipped.size() - 2] ^= 0x55;  // inside the last weight blob
  spit(dir / "flipped.vhck", flipped);
  CHECK_THROWS_AS(TranslationModel::load(dir / "flipped.vhck"), IoError);

  spit(dir / "short.vhck", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(TranslationModel::load(dir / "short.vhck"), IoError);

  spit(dir / "junk.vhck", "not a checkpoint\n");
  CHECK_THROWS_AS(TranslationModel::load(dir / "junk.vhck"), IoError);
  CHECK_THROWS_AS(TranslationModel::load(dir / "missing.vhck"), IoError);

  std::string wider = bytes;
  const auto at = wider.find("n_res_blocks = 1\n");
  REQUIRE(at != std::string::npos);
  wider.replace(at, 17, "n_res_blocks = 2\n");
  spit(dir / "wider.vhck", wider);
  CHECK_THROWS_AS(TranslationModel::load(dir / "wider.vhck"), CheckpointIncompatible);
}

TEST_CASE("fine-tuning") {
  TranslationModel parent(tiny_config());
  train(parent, tiles().x, tiles().y, epochs(1));

  TranslationModel still = parent.clone();
  const TrainingResult r0 = fine_tune(still, tiny_config(), tiles().x, tiles().y, 2e-5, 0);
  CHECK(r0.history.empty());
  CHECK(still.max_weight_difference(parent) == 0.0);

  TranslationModel child = parent.clone();
  const TrainingResult r1 = fine_tune(child, tiny_config(), tiles().x, tiles().y, 2e-5, 1);
  REQUIRE(r1.history.size() == 1);
  CHECK(r1.history[0].lr == 2e-5);
  CHECK(child.max_weight_difference(parent) > 0.0);
  CHECK(child.parent_id() == parent.id());
  CHECK(child.id() != parent.id());
  CHECK(parent.parent_id() == "none");

  const auto path = scratch_dir("finetune") / "child.vhck";
  child.save(path);
  CHECK(TranslationModel::load(path).parent_id() == parent.id());

  CycleGANConfig wide = tiny_config();
  wide.base_width = 8;
  TranslationModel x = parent.clone();
  CHECK_THROWS_AS(fine_tune(x, wide, tiles().x, tiles().y, 2e-5, 1), CheckpointIncompatible);
  CycleGANConfig deeper = tiny_config();
  deeper.n_res_blocks = 2;
  CHECK_THROWS_AS(fine_tune(x, deeper, tiles().x, tiles().y, 2e-5, 1), CheckpointIncompatible);
  CycleGANConfig raw = tiny_config();
  raw.input_domain = InputDomain::qobm_raw;
  CHECK_THROWS_AS(fine_tune(x, raw, tiles().x, tiles().y, 2e-5, 1), CheckpointIncompatible);
  CHECK_THROWS_AS(fine_tune(x, tiny_config(), tiles().x, tiles().y, 0.0, 1), ParameterError);
  CHECK(x.max_weight_difference(parent) == 0.0);
}

TEST_CASE("fine-tuning on a shifted palette lowers its cycle loss") {
  const RunConfig rc;
  DataSettings data = tiny_data();
  data.x_tiles = data.y_tiles = 32;
  const auto xs = make_x_tiles(data, rc.acquisition(), rc.conversion(), 31);
  const auto ys = make_y_tiles(data, HePalette{}, 31);
  CycleGANConfig cfg = tiny_config();
  cfg.base_width = 8;
  TranslationModel parent(cfg);
  train(parent, xs, ys, epochs(4));

  const auto faded_train = make_y_tiles(data, faded_palette(), 32);
  const auto held_x = make_x_tiles(data, rc.acquisition(), rc.conversion(), 33, DataStream::held_out);
  const auto held_y = make_y_tiles(data, faded_palette(), 33, DataStream::held_out);

  const double before = evaluate_cycle_loss(parent, held_x, held_y);
  TranslationModel child = parent.clone();
  fine_tune(child, cfg, xs, faded_train, cfg.finetune_lr, 4);
  const double after = evaluate_cycle_loss(child, held_x, held_y);
  INFO("parent " << before << " fine-tuned " << after);
  CHECK(after < before);
}

TEST_CASE("a non-finite loss restores the last completed epoch") {
  TranslationModel reference(tiny_config());
  train(reference, tiles().x, tiles().y, epochs(1));

  TranslationModel m(tiny_config());
  TrainOptions o = epochs(3);
  o.inject_nan_at = 5;  // second epoch, four iterations per epoch
  try {
    train(m, tiles().x, tiles().y, o);
    FAIL("expected divergence");
  } catch (const TrainingDivergence& e) {
    CHECK(e.last_good_epoch() == 1);
    CHECK(std::string(e.what()).find("iteration 5") != std::string::npos);
  }
  CHECK(m.epoch() == 1);
  CHECK(m.max_weight_difference(reference) == 0.0);

  TranslationModel first(tiny_config());
  o.inject_nan_at = 0;
  CHECK_THROWS_AS(train(first, tiles().x, tiles().y, o), TrainingDivergence);
  CHECK(first.max_weight_difference(TranslationModel(tiny_config())) == 0.0);
}

TEST_CASE("input validation") {
  TranslationModel m(tiny_config());
  CHECK_THROWS_AS(train(m, {}, tiles().y, epochs(1)), ParameterError);
  std::vector<Image> odd(8, Image(30, 30, 3, 0.5f));
  CHECK_THROWS_AS(train(m, odd, odd, epochs(1)), DimensionError);
  std::vector<Image> few(tiles().x.begin(), tiles().x.begin() + 3);
  CHECK_THROWS_AS(train(m, few, tiles().y, epochs(1)), ParameterError);
  std::vector<Image> bigger(8, Image(64, 64, 3, 0.5f));
  CHECK_THROWS_AS(train(m, tiles().x, bigger, epochs(1)), DimensionError);
}

TEST_CASE("inference on arbitrary tile sizes") {
  TranslationModel m(tiny_config());
  const Image gray = vhist::testing::random_image(30, 22, 1, 3);
  const Image out = m.to_he(gray);
  CHECK(out.width() == 30);
  CHECK(out.height() == 22);
  CHECK(out.channels() == 3);
  for (float v : out.values()) CHECK((v >= 0.0f && v <= 1.0f));
  CHECK(m.to_he(gray) == out);
  const Image back = m.to_source(out);
  CHECK((back.width() == 30 && back.height() == 22));

  const ModelHandle h = m.handle();
  CHECK(h.domain == InputDomain::qobm_inverted);
  CHECK(h.checkpoint_id == m.id());
  CHECK(h.translate(gray) == out);
  CHECK_THROWS_AS(m.to_he(Image(8, 8, 2)), DimensionError);
}

TEST_CASE("loss history csv") {
  LossRecord r;
  r.epoch = 3;
  r.cycle = 0.5;
  r.lr = 1e-4;
  const std::string csv = loss_history_csv({r});
  CHECK(csv.rfind("epoch,L_cycle,L_G_X,L_G_Y,L_D_X,L_D_Y,L_idt,lr\n", 0) == 0);
  CHECK(csv.find("\n3,0.5,0,0,0,0,0,0.0001\n") != std::string::npos);
  const auto p = scratch_dir("history") / "loss.csv";
  write_loss_history_csv(p, {r});
  CHECK(slurp(p) == csv);
}

}
