// vhist: command-line front end for every pipeline stage.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "vhist/classifier.hpp"
#include "vhist/config.hpp"
#include "vhist/datasets.hpp"
#include "vhist/evalsuite.hpp"
#include "vhist/imagecore.hpp"
#include "vhist/io.hpp"
#include "vhist/optics.hpp"
#include "vhist/phantom.hpp"
#include "vhist/pipeline.hpp"
#include "vhist/translate.hpp"

namespace fs = std::filesystem;
using namespace vhist;

namespace {

constexpr const char* kVersion = "vhist 0.1.0";
constexpr double kCountsPerUnit = 30000.0;  // 16-bit capture scaling

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kIo = 3, kNumerical = 4, kMismatch = 5 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  bool dry_run = false;
};

struct Inputs {
  std::string phantom, captures, reference, input, checkpoint, manifest, responses, truth, x_dir, y_dir;
  int z = 0;
  int tile = 0;
  double overlap = 0.0;
  bool identity = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "YAML run config");
  sub->add_option("--seed", c.seed, "global seed (overrides config and VHIST_SEED)");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--set", c.sets, "override one key: section.key=value")->take_all();
  sub->add_flag("--dry-run", c.dry_run, "validate config and inputs, write nothing");
}

RunConfig resolve(const Common& c) {
  RunConfig rc;
  if (!c.config.empty()) rc.apply_yaml_file(c.config);
  rc.apply_process_env();
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) rc.seed = *c.seed;
  if (!c.out.empty()) rc.out = c.out;
  rc.validate();
  return rc;
}

void require_exists(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing required input ") + what);
  if (!fs::exists(path)) throw IoError(std::string(what) + " '" + path + "' does not exist");
}

/// Collects provenance lines and writes them as lineage.txt.
class Lineage {
 public:
  Lineage(std::string command, const RunConfig& rc) {
    add("tool", kVersion);
    add("command", std::move(command));
    add("seed", std::to_string(rc.seed));
    add("config", "resolved_config.yaml");
  }
  void add(const std::string& key, const std::string& value) { text_ += key + " = " + value + "\n"; }
  void write(const fs::path& dir) const { io::write_text(dir / "lineage.txt", text_); }

 private:
  std::string text_;
};

fs::path prepare(const RunConfig& rc) {
  fs::create_directories(rc.out);
  io::write_text(rc.out / "resolved_config.yaml", rc.to_yaml());
  return rc.out;
}

/// Grayscale source image from a .qphi phase file or a PNG (first channel).
Image read_gray(const fs::path& path) {
  if (path.extension() == ".qphi") return to_image(io::read_phase(path));
  Image img = io::read_png(path);
  if (img.channels() == 1) return img;
  Image g(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) g.at(x, y) = img.at(x, y, 0);
  }
  return g;
}

Image first_channel(const Image& img) {
  if (img.channels() == 1) return img;
  Image g(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) g.at(x, y) = img.at(x, y, 0);
  }
  return g;
}

std::vector<Image> read_png_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG tiles in '" + dir.string() + "'");
  std::vector<Image> out;
  for (const auto& f : files) out.push_back(io::read_png(f));
  return out;
}

std::string slice_name(const char* stem, int z, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03d%s", stem, z, ext);
  return buf;
}

void print_epoch(const LossRecord& r) {
  std::printf("epoch %d  L_cycle %.4f  L_G_X %.4f  L_G_Y %.4f  L_D_X %.4f  L_D_Y %.4f  L_idt %.4f  lr %.3g\n",
              r.epoch, r.cycle, r.gen_x, r.gen_y, r.disc_x, r.disc_y, r.identity, r.lr);
  std::fflush(stdout);
}

struct TrainingData {
  std::vector<Image> x, y;
};

TrainingData load_training_data(const RunConfig& rc, const Inputs& in) {
  TrainingData d;
  const DataSettings data = rc.data();
  if (!in.x_dir.empty()) {
    d.x = read_png_dir(in.x_dir);
  } else {
    d.x = make_x_tiles(data, rc.acquisition(), rc.conversion(), rc.seed);
  }
  if (!in.y_dir.empty()) {
    d.y = read_png_dir(in.y_dir);
  } else {
    const HePalette palette = data.palette == "faded" ? faded_palette() : HePalette{};
    d.y = make_y_tiles(data, palette, rc.seed);
  }
  return d;
}

ModelHandle model_for(const Inputs& in, std::optional<TranslationModel>& holder, Lineage& lineage) {
  if (in.identity) {
    lineage.add("checkpoint", "identity");
    return identity_model();
  }
  holder.emplace(TranslationModel::load(in.checkpoint));
  lineage.add("checkpoint", holder->id());
  lineage.add("checkpoint_parent", holder->parent_id());
  return holder->handle();
}

void require_model_input(const Inputs& in) {
  if (in.identity) return;
  require_exists(in.checkpoint, "--checkpoint");
}

// ---- subcommands ----

void cmd_phantom(const RunConfig& rc, bool dry) {
  const PhantomSpec spec = rc.phantom();
  if (dry) return;
  const fs::path out = prepare(rc);
  Lineage lineage("phantom", rc);
  const Phantom ph = generate_phantom(spec);
  io::write_phantom(out / "phantom", ph);
  const HePalette palette = rc.palette();
  for (int z = 0; z < ph.depth(); ++z) {
    PhaseImage p = render_phase(ph, z, rc.acquisition().phase_scale);
    p.pixel_pitch_um = rc.pixel_pitch_um();
    const bool single = ph.depth() == 1;
    io::write_png8(out / (single ? std::string("he.png") : slice_name("he", z, ".png")), render_he(ph, z, palette));
    io::write_phase(out / (single ? std::string("phase.qphi") : slice_name("phase", z, ".qphi")), p);
    io::write_phase_png(out / (single ? std::string("phase.png") : slice_name("phase", z, ".png")), p);
  }
  lineage.add("output", "phantom/");
  lineage.write(out);
}

void cmd_simulate(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.phantom, "--phantom");
  const AcquisitionSettings acq = rc.acquisition();
  const double limit = rc.band_limit();
  if (dry) return;
  const Phantom ph = io::read_phantom(in.phantom);
  if (in.z < 0 || in.z >= ph.depth()) throw IndexError("--z " + std::to_string(in.z) + " outside the phantom depth");
  const fs::path out = prepare(rc);
  Lineage lineage("simulate", rc);
  lineage.add("input", in.phantom);
  PhaseImage truth = render_phase(ph, in.z, acq.phase_scale);
  truth.pixel_pitch_um = rc.pixel_pitch_um();
  if (limit > 0.0) truth = band_limit(truth, limit);
  const OTFSet otf = make_otf_set(truth.width(), truth.height(), acq.shear_px, acq.cutoff);
  const CaptureSet captures = simulate_captures(truth, otf, CaptureParams{acq.background, acq.noise_sigma, rc.seed});
  io::write_phase(out / "truth_phase.qphi", truth);
  io::write_phase_png(out / "truth_phase.png", truth);
  io::write_captures(out / "captures", captures, kCountsPerUnit);
  lineage.add("output", "captures/");
  lineage.write(out);
}

void cmd_reconstruct(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.captures, "--captures");
  if (!in.reference.empty()) require_exists(in.reference, "--reference");
  const AcquisitionSettings acq = rc.acquisition();
  const DpcMode mode = rc.dpc_mode();
  if (dry) return;
  const CaptureSet captures = io::read_captures(in.captures);
  const fs::path out = prepare(rc);
  Lineage lineage("reconstruct", rc);
  lineage.add("input", in.captures);
  const DPCPair dpc = compute_dpc(captures, mode);
  const OTFSet otf = make_otf_set(dpc.shear[0].width(), dpc.shear[0].height(), acq.shear_px, acq.cutoff);
  const PhaseImage phase = reconstruct_phase(dpc, otf, acq.alpha, rc.pixel_pitch_um());
  io::write_phase(out / "phase.qphi", phase);
  io::write_phase_png(out / "phase.png", phase);
  io::write_phase_png(out / "dpc_x.png", PhaseImage{dpc.shear[0], phase.pixel_pitch_um});
  io::write_phase_png(out / "dpc_y.png", PhaseImage{dpc.shear[1], phase.pixel_pitch_um});
  std::ostringstream metrics;
  metrics.precision(9);
  metrics << "zero_sum_pixels = " << dpc.zero_sum_pixels << "\n";
  if (!in.reference.empty()) {
    const PhaseImage ref = io::read_phase(in.reference);
    const double err = relative_l2_zero_mean(phase.phase, ref.phase);
    metrics << "relative_l2 = " << err << "\n";
    std::printf("relative L2 error vs reference: %.6f\n", err);
    lineage.add("reference", in.reference);
  }
  io::write_text(out / "metrics.txt", metrics.str());
  lineage.write(out);
}

void cmd_preprocess(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.input, "--input");
  const ConversionSettings conv = rc.conversion();
  const double factor = rc.upsample_factor();
  if (in.tile < 0) throw ConfigError("--tile must be positive");
  if (!(in.overlap >= 0.0 && in.overlap < 1.0)) throw ConfigError("--overlap must lie in [0, 1)");
  if (dry) return;
  const fs::path src = in.input;
  const Image raw = src.extension() == ".qphi" ? to_image(io::read_phase(src)) : io::read_png(src);
  const fs::path out = prepare(rc);
  Lineage lineage("preprocess", rc);
  lineage.add("input", in.input);
  Image result;
  if (raw.channels() == 3) {
    // H&E: bring feature sizes to the source scale
    result = factor > 1.0 ? upsample_bilinear(raw, factor) : raw;
    io::write_png8(out / "preprocessed.png", result);
  } else {
    result = first_channel(preprocess(raw, conv.preprocess));
    io::write_png16(out / "preprocessed.png", result);
  }
  if (in.tile > 0) {
    const TileGrid grid = tile_overlapping(result, in.tile, in.overlap);
    io::write_tile_grid(out / "tiles", grid, "tile");
    lineage.add("output", "tiles/manifest.txt");
  }
  lineage.add("output", "preprocessed.png");
  lineage.write(out);
}

void cmd_train(const RunConfig& rc, const Inputs& in, bool dry) {
  if (!in.x_dir.empty()) require_exists(in.x_dir, "--x-dir");
  if (!in.y_dir.empty()) require_exists(in.y_dir, "--y-dir");
  const CycleGANConfig cfg = rc.cyclegan();
  rc.data();
  if (dry) return;
  const TrainingData data = load_training_data(rc, in);
  const fs::path out = prepare(rc);
  Lineage lineage("train", rc);
  TranslationModel model(cfg);
  lineage.add("init", model.id());
  TrainOptions opts;
  opts.on_epoch = print_epoch;
  std::vector<LossRecord> history;
  try {
    TrainingResult r = train(model, data.x, data.y, opts);
    history = std::move(r.history);
  } catch (const TrainingDivergence&) {
    model.save(out / "last_good.vhck");
    lineage.add("checkpoint", "last_good.vhck " + model.id());
    lineage.write(out);
    throw;
  }
  model.save(out / "checkpoint.vhck");
  write_loss_history_csv(out / "loss_history.csv", history);
  lineage.add("checkpoint", model.id());
  lineage.add("parent", model.parent_id());
  lineage.add("epochs", std::to_string(model.epoch()));
  lineage.add("output", "checkpoint.vhck");
  lineage.add("output", "loss_history.csv");
  lineage.write(out);
}

void cmd_finetune(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.checkpoint, "--checkpoint");
  if (!in.x_dir.empty()) require_exists(in.x_dir, "--x-dir");
  if (!in.y_dir.empty()) require_exists(in.y_dir, "--y-dir");
  const CycleGANConfig cfg = rc.cyclegan();
  const int epochs = rc.finetune_epochs();
  if (dry) {
    TranslationModel::load(in.checkpoint);
    return;
  }
  TranslationModel model = TranslationModel::load(in.checkpoint);
  const TrainingData data = load_training_data(rc, in);
  const fs::path out = prepare(rc);
  Lineage lineage("finetune", rc);
  const std::string parent = model.id();
  const double before = evaluate_cycle_loss(model, data.x, data.y);
  TrainOptions opts;
  opts.on_epoch = print_epoch;
  const TrainingResult r = fine_tune(model, cfg, data.x, data.y, cfg.finetune_lr, epochs, opts);
  const double after = evaluate_cycle_loss(model, data.x, data.y);
  model.save(out / "checkpoint.vhck");
  write_loss_history_csv(out / "loss_history.csv", r.history);
  std::ostringstream m;
  m.precision(9);
  m << "cycle_loss_before = " << before << "\ncycle_loss_after = " << after << "\n";
  io::write_text(out / "finetune_metrics.txt", m.str());
  std::printf("cycle loss on the new domain: %.5f -> %.5f\n", before, after);
  lineage.add("checkpoint", model.id());
  lineage.add("parent", parent);
  lineage.add("parent_path", in.checkpoint);
  lineage.add("output", "checkpoint.vhck");
  lineage.write(out);
}

void cmd_convert(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.input, "--input");
  require_model_input(in);
  const ConversionSettings conv = rc.conversion();
  if (dry) {
    if (!in.identity) check_domain(TranslationModel::load(in.checkpoint).handle(), conv);
    return;
  }
  std::optional<TranslationModel> holder;
  Lineage lineage("convert", rc);
  const ModelHandle model = model_for(in, holder, lineage);
  check_domain(model, conv);
  const Image gray = read_gray(in.input);
  const Image vhe = convert_fov(gray, model, conv);
  const fs::path out = prepare(rc);
  io::write_png8(out / "vhe.png", vhe);
  lineage.add("input", in.input);
  lineage.add("output", "vhe.png");
  lineage.write(out);
}

Mosaic read_mosaic(const fs::path& manifest) {
  Mosaic m;
  for (const auto& e : io::read_manifest(manifest)) {
    m.fields.push_back(read_gray(manifest.parent_path() / e.file));
    m.offsets.push_back({e.x, e.y});
  }
  return m;
}

void cmd_stitch(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.manifest, "--manifest");
  const ConversionSettings conv = rc.conversion();
  const bool convert = in.identity || !in.checkpoint.empty();
  if (convert) require_model_input(in);
  if (dry) return;
  const Mosaic mosaic = read_mosaic(in.manifest);
  const fs::path out = prepare(rc);
  Lineage lineage("stitch", rc);
  lineage.add("input", in.manifest);
  const Image stitched = stitch_fields(mosaic, conv.inference.sigma);
  io::write_png16(out / "stitched.png", first_channel(preprocess(stitched, conv.preprocess)));
  lineage.add("output", "stitched.png");
  if (convert) {
    std::optional<TranslationModel> holder;
    const ModelHandle model = model_for(in, holder, lineage);
    io::write_png8(out / "vhe.png", convert_mosaic(mosaic, model, conv));
    lineage.add("output", "vhe.png");
  }
  lineage.write(out);
}

void cmd_stack(const RunConfig& rc, const Inputs& in, bool dry) {
  if (in.phantom.empty() && in.manifest.empty()) throw ConfigError("stack needs --phantom or --manifest");
  if (!in.phantom.empty()) require_exists(in.phantom, "--phantom");
  if (!in.manifest.empty()) require_exists(in.manifest, "--manifest");
  require_model_input(in);
  const ConversionSettings conv = rc.conversion();
  const AcquisitionSettings acq = rc.acquisition();
  if (dry) return;
  std::vector<Image> slices;
  double spacing = rc.phantom().z_spacing_um;
  if (!in.phantom.empty()) {
    const Phantom ph = io::read_phantom(in.phantom);
    spacing = ph.z_spacing_um;
    for (int z = 0; z < ph.depth(); ++z) slices.push_back(acquire(ph, z, conv.source, acq, derive_seed(rc.seed, 7, z)));
  } else {
    for (const auto& e : io::read_manifest(in.manifest)) slices.push_back(read_gray(fs::path(in.manifest).parent_path() / e.file));
  }
  const VolumeStack stack = assemble_stack(std::move(slices), spacing);
  const fs::path out = prepare(rc);
  Lineage lineage("stack", rc);
  lineage.add("input", in.phantom.empty() ? in.manifest : in.phantom);
  std::optional<TranslationModel> holder;
  const ModelHandle model = model_for(in, holder, lineage);
  const VolumeStack converted = convert_stack(stack, model, conv);
  fs::create_directories(out / "slices");
  for (int z = 0; z < converted.depth(); ++z) io::write_png8(out / "slices" / slice_name("vhe", z, ".png"), converted.slices[z]);
  const SectionViews views = orthogonal_views(converted);
  io::write_png8(out / "xy.png", views.xy);
  io::write_png8(out / "xz.png", views.xz);
  io::write_png8(out / "yz.png", views.yz);
  char spacing_text[64];
  std::snprintf(spacing_text, sizeof spacing_text, "%g um", views.z_spacing_um);
  lineage.add("z_spacing", spacing_text);
  lineage.add("output", "slices/");
  lineage.write(out);
}

void cmd_classify(const RunConfig& rc, const Inputs& in, bool dry) {
  const ClassifierSettings cls = rc.classifier();
  const ConversionSettings conv = rc.conversion();
  const AcquisitionSettings acq = rc.acquisition();
  const int size = rc.data().phantom_size;
  if (size < cls.tile_size) throw ConfigError("data.phantom_size must be >= classifier.tile_size");
  const bool transfer = in.identity || !in.checkpoint.empty();
  if (transfer) require_model_input(in);
  if (dry) return;
  const LabeledTileSet he = make_he_tileset(cls, size, rc.palette(), rc.seed);
  const CrossValidation cv = cross_validate(he, cls, rc.seed);
  std::printf("H&E %d-fold accuracy %.4f +/- %.4f\n", cls.folds, cv.mean_accuracy, cv.sd_accuracy);
  const fs::path out = prepare(rc);
  Lineage lineage("classify", rc);
  TransferReport tr;
  if (transfer) {
    std::optional<TranslationModel> holder;
    const ModelHandle model = model_for(in, holder, lineage);
    check_domain(model, conv);
    LabeledTileSet vhe;
    for (TissueClass label : {TissueClass::healthy, TissueClass::tumor}) {
      int made = 0;
      for (int i = 0; made < cls.vhe_tiles_per_class; ++i) {
        const std::uint64_t s = derive_seed(rc.seed, static_cast<std::uint64_t>(DataStream::transfer) * 2 +
                                                         static_cast<std::uint64_t>(label), i);
        const PhantomField f = make_field(size, label, acq, conv.source, rc.palette(), s, "");
        const std::vector<Image> tiles = cut_tiles(convert_fov(f.source, model, conv), cls.tile_size);
        for (std::size_t t = 0; t < tiles.size() && made < cls.vhe_tiles_per_class; ++t, ++made) {
          vhe.add(tiles[t], label, TileSource::virtual_he,
                  to_string(label) + "-" + std::to_string(i) + "-" + std::to_string(t));
        }
      }
    }
    tr = evaluate_transfer(cv.models, vhe);
    std::printf("vH&E accuracy %.4f +/- %.4f\n", tr.mean_accuracy, tr.sd_accuracy);
    std::string fp = "fold,tile_id,kind\n";
    for (const auto& [f, id] : tr.false_positives) fp += std::to_string(f) + "," + id + ",false_positive\n";
    for (const auto& [f, id] : tr.false_negatives) fp += std::to_string(f) + "," + id + ",false_negative\n";
    io::write_text(out / "misclassified.csv", fp);
  }
  io::write_text(out / "classify_report.csv", transfer_report_csv(cv, tr));
  lineage.add("output", "classify_report.csv");
  lineage.write(out);
}

void cmd_kappa(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.responses, "--responses");
  if (dry) return;
  const std::vector<RaterResponse> responses = read_responses_csv(in.responses);
  const fs::path out = prepare(rc);
  Lineage lineage("kappa", rc);
  lineage.add("input", in.responses);
  std::ostringstream os;
  os.precision(12);
  os << "modality,rater_a,rater_b,items,kappa\n";
  for (Modality m : {Modality::he, Modality::vhe}) {
    std::map<std::string, std::map<std::string, int>> by_rater;
    for (const auto& r : responses) {
      if (r.modality == m) by_rater[r.rater_id][r.image_id] = r.continue_resection ? 1 : 0;
    }
    double sum = 0.0;
    int pairs = 0;
    for (auto a = by_rater.begin(); a != by_rater.end(); ++a) {
      for (auto b = std::next(a); b != by_rater.end(); ++b) {
        std::vector<int> ra, rb;
        for (const auto& [img, v] : a->second) {
          const auto it = b->second.find(img);
          if (it != b->second.end()) {
            ra.push_back(v);
            rb.push_back(it->second);
          }
        }
        double k = 0.0;
        try {
          k = cohens_kappa(ra, rb);
        } catch (const UndefinedKappa& e) {
          warn(a->first + " vs " + b->first + ": " + e.what());
          continue;
        }
        sum += k;
        ++pairs;
        os << to_string(m) << ',' << a->first << ',' << b->first << ',' << ra.size() << ',' << k << '\n';
      }
    }
    if (pairs > 0) {
      os << to_string(m) << ",mean,," << pairs << ',' << sum / pairs << '\n';
      std::printf("%s mean pairwise kappa %.4f over %d pairs\n", to_string(m).c_str(), sum / pairs, pairs);
    }
  }
  io::write_text(out / "pairwise_kappa.csv", os.str());
  lineage.add("output", "pairwise_kappa.csv");
  lineage.write(out);
}

void cmd_report(const RunConfig& rc, const Inputs& in, bool dry) {
  require_exists(in.responses, "--responses");
  require_exists(in.truth, "--truth");
  if (dry) return;
  const StudyReport report = study_summary(read_responses_csv(in.responses), read_ground_truth_csv(in.truth));
  const fs::path out = prepare(rc);
  Lineage lineage("report", rc);
  lineage.add("input", in.responses);
  lineage.add("input", in.truth);
  io::write_text(out / "study_report.csv", report_csv(report));
  const std::string table = report_table(report);
  io::write_text(out / "study_report.txt", table);
  std::fputs(table.c_str(), stdout);
  lineage.add("output", "study_report.csv");
  lineage.write(out);
}

int fail(int code, const std::string& message) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "vhist: error: " << line << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-free virtual histology: phantoms, phase reconstruction, CycleGAN translation, evaluation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  Inputs in;
  const auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, common);
    return s;
  };
  const auto model_opts = [&](CLI::App* s) {
    s->add_option("--checkpoint", in.checkpoint, "trained checkpoint (.vhck)");
    s->add_flag("--identity", in.identity, "use the identity translator instead of a checkpoint");
  };

  sub("phantom", "generate a synthetic specimen with its phase and oracle H&E renders");
  CLI::App* simulate = sub("simulate", "simulate four oblique captures of a phantom slice");
  simulate->add_option("--phantom", in.phantom, "phantom directory");
  simulate->add_option("--z", in.z, "slice index");
  CLI::App* reconstruct = sub("reconstruct", "DPC + Tikhonov phase reconstruction from captures");
  reconstruct->add_option("--captures", in.captures, "captures directory");
  reconstruct->add_option("--reference", in.reference, "true phase (.qphi) for an error report");
  CLI::App* pre = sub("preprocess", "contrast-enhance/invert a source image (or upsample an H&E image)");
  pre->add_option("--input", in.input, ".qphi or PNG image");
  pre->add_option("--tile", in.tile, "also cut overlapping tiles of this size");
  pre->add_option("--overlap", in.overlap, "tile overlap fraction");
  CLI::App* tr = sub("train", "train the CycleGAN on synthetic (or given) unpaired tiles");
  tr->add_option("--x-dir", in.x_dir, "directory of preprocessed source tiles (PNG)");
  tr->add_option("--y-dir", in.y_dir, "directory of H&E tiles (PNG)");
  CLI::App* ft = sub("finetune", "continue training a checkpoint at a constant LR");
  ft->add_option("--checkpoint", in.checkpoint, "parent checkpoint");
  ft->add_option("--x-dir", in.x_dir, "directory of preprocessed source tiles (PNG)");
  ft->add_option("--y-dir", in.y_dir, "directory of H&E tiles (PNG)");
  CLI::App* convert = sub("convert", "convert one field of view to virtual H&E");
  convert->add_option("--input", in.input, ".qphi or grayscale PNG");
  model_opts(convert);
  CLI::App* stitch = sub("stitch", "stitch a mosaic of fields; convert it when a model is given");
  stitch->add_option("--manifest", in.manifest, "manifest listing 'file x y' per field");
  model_opts(stitch);
  CLI::App* stack = sub("stack", "convert every slice of a z-stack and export section views");
  stack->add_option("--phantom", in.phantom, "3D phantom directory");
  stack->add_option("--manifest", in.manifest, "manifest of slice images in z order");
  model_opts(stack);
  CLI::App* classify = sub("classify", "k-fold H&E classifier, optionally scored on converted vH&E");
  model_opts(classify);
  CLI::App* kappa = sub("kappa", "pairwise Cohen's kappa on continue_resection");
  kappa->add_option("--responses", in.responses, "rater responses CSV");
  CLI::App* report = sub("report", "reader-study summary table");
  report->add_option("--responses", in.responses, "rater responses CSV");
  report->add_option("--truth", in.truth, "ground truth CSV (image_id,tumor_present)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfig, e.what());
  }

  try {
    const RunConfig rc = resolve(common);
    const std::string name = app.get_subcommands().front()->get_name();
    const bool dry = common.dry_run;
    if (name == "phantom") cmd_phantom(rc, dry);
    else if (name == "simulate") cmd_simulate(rc, in, dry);
    else if (name == "reconstruct") cmd_reconstruct(rc, in, dry);
    else if (name == "preprocess") cmd_preprocess(rc, in, dry);
    else if (name == "train") cmd_train(rc, in, dry);
    else if (name == "finetune") cmd_finetune(rc, in, dry);
    else if (name == "convert") cmd_convert(rc, in, dry);
    else if (name == "stitch") cmd_stitch(rc, in, dry);
    else if (name == "stack") cmd_stack(rc, in, dry);
    else if (name == "classify") cmd_classify(rc, in, dry);
    else if (name == "kappa") cmd_kappa(rc, in, dry);
    else if (name == "report") cmd_report(rc, in, dry);
    if (dry) std::printf("dry run: config and inputs are valid\n");
    return kOk;
  } catch (const ConfigError& e) {
    return fail(kConfig, e.what());
  } catch (const IoError& e) {
    return fail(kIo, e.what());
  } catch (const CheckpointIncompatible& e) {
    return fail(kMismatch, e.what());
  } catch (const DomainMismatch& e) {
    return fail(kMismatch, e.what());
  } catch (const TrainingDivergence& e) {
    return fail(kNumerical, e.what());
  } catch (const Error& e) {
    return fail(kNumerical, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kIo, e.what());
  } catch (const std::exception& e) {
    return fail(kOther, e.what());
  }
}
