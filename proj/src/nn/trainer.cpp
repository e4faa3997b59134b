#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "vhist/io.hpp"
#include "vhist/nn/model_state.hpp"

namespace vhist {

namespace {

/// Pool of past generated images fed to the discriminator.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

  torch::Tensor query(const torch::Tensor& batch) {
    if (capacity_ == 0) return batch;
    std::vector<torch::Tensor> out;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (long i = 0; i < batch.size(0); ++i) {
      torch::Tensor img = batch[i].detach().clone();
      if (static_cast<int>(pool_.size()) < capacity_) {
        pool_.push_back(img);
        out.push_back(img);
      } else if (coin(rng_) < 0.5) {
        std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
        const std::size_t k = pick(rng_);
        out.push_back(pool_[k]);
        pool_[k] = img;
      } else {
        out.push_back(img);
      }
    }
    return torch::stack(out);
  }

 private:
  int capacity_;
  std::mt19937_64 rng_;
  std::vector<torch::Tensor> pool_;
};

torch::Tensor stack_tiles(const std::vector<Image>& tiles, const char* what) {
  if (tiles.empty()) throw ParameterError(std::string(what) + " dataset is empty");
  const int w = tiles.front().width(), h = tiles.front().height();
  std::vector<Image> rgb;
  rgb.reserve(tiles.size());
  for (const Image& t : tiles) {
    if (t.width() != w || t.height() != h) throw DimensionError(std::string(what) + " tiles differ in size");
    rgb.push_back(replicate_channels(t, 3));
  }
  return nn::to_tensor(rgb);
}

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool on) {
  for (const auto& p : params) const_cast<torch::Tensor&>(p).requires_grad_(on);
}

std::string describe(const LossTerms& t) {
  std::ostringstream os;
  os << "cycle=" << t.cycle << " gen_x=" << t.gen_x << " gen_y=" << t.gen_y << " identity=" << t.identity
     << " disc_x=" << t.disc_x << " disc_y=" << t.disc_y;
  return os.str();
}

}  // namespace

TrainingResult train(TranslationModel& model, const std::vector<Image>& x_tiles, const std::vector<Image>& y_tiles,
                     const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  auto& s = model.state();
  const CycleGANConfig& cfg = s.config;

  const torch::Tensor xs = stack_tiles(x_tiles, "X");
  const torch::Tensor ys = stack_tiles(y_tiles, "Y");
  if (xs.size(2) != xs.size(3)) throw DimensionError("tiles must be square");
  if (!xs.sizes().slice(1).equals(ys.sizes().slice(1))) throw DimensionError("X and Y tiles differ in size");
  if (xs.size(2) % 4 != 0) throw DimensionError("tile size must be a multiple of 4");
  const long batch = cfg.batch_size;
  const long per_epoch = xs.size(0) / batch;
  if (per_epoch == 0) throw ParameterError("fewer X tiles than one batch");

  torch::globalContext().setDeterministicAlgorithms(true, false);

  const int epochs = options.epochs >= 0 ? options.epochs : cfg.total_epochs() - s.epoch;
  TrainingResult result;
  if (epochs <= 0 || options.max_iterations == 0) return result;

  const auto g_params = s.generator_parameters();
  const auto d_params = s.discriminator_parameters();
  const auto adam = [&](const std::vector<torch::Tensor>& p) {
    return torch::optim::Adam(p, torch::optim::AdamOptions(cfg.lr0).betas({cfg.beta1, cfg.beta2}));
  };
  torch::optim::Adam opt_g = adam(g_params);
  torch::optim::Adam opt_d = adam(d_params);

  const std::uint64_t base = cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(s.epoch);
  std::mt19937_64 rng(base);
  ReplayBuffer pool_x(cfg.replay_buffer, base + 1), pool_y(cfg.replay_buffer, base + 2);

  std::vector<long> x_order(xs.size(0)), y_order(ys.size(0));
  std::iota(x_order.begin(), x_order.end(), 0);
  std::iota(y_order.begin(), y_order.end(), 0);
  std::size_t y_cursor = y_order.size();

  std::vector<torch::Tensor> last_good = nn::snapshot(s);
  int last_good_epoch = s.epoch;

  for (int e = 0; e < epochs; ++e) {
    const int epoch = s.epoch;
    const double lr = options.constant_lr > 0.0 ? options.constant_lr : lr_at(epoch, cfg);
    set_lr(opt_g, lr);
    set_lr(opt_d, lr);
    std::shuffle(x_order.begin(), x_order.end(), rng);

    LossRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    for (long it = 0; it < per_epoch; ++it) {
      if (options.max_iterations >= 0 && result.iterations >= options.max_iterations) break;
      std::vector<long> xi(x_order.begin() + it * batch, x_order.begin() + (it + 1) * batch), yi;
      for (long b = 0; b < batch; ++b) {
        if (y_cursor == y_order.size()) {
          std::shuffle(y_order.begin(), y_order.end(), rng);
          y_cursor = 0;
        }
        yi.push_back(y_order[y_cursor++]);
      }
      torch::Tensor x = xs.index_select(0, torch::tensor(xi));
      torch::Tensor y = ys.index_select(0, torch::tensor(yi));
      if (cfg.augment) {
        std::bernoulli_distribution flip(0.5);
        if (flip(rng)) x = x.flip({3});
        if (flip(rng)) y = y.flip({3});
      }

      // generator step
      set_requires_grad(d_params, false);
      opt_g.zero_grad();
      nn::GeneratorTerms g = nn::generator_objective(s.g_x, s.g_y, s.d_x, s.d_y, x, y, cfg.lambda_cycle,
                                                     cfg.lambda_identity);
      LossTerms terms;
      terms.cycle = g.cycle.item<double>();
      terms.gen_x = g.gen_x.item<double>();
      terms.gen_y = g.gen_y.item<double>();
      terms.identity = g.identity.item<double>();
      if (result.iterations == options.inject_nan_at) terms.gen_x = std::nan("");
      if (!std::isfinite(g.total.item<double>()) || !std::isfinite(terms.gen_x)) {
        nn::restore(s, last_good);
        s.epoch = last_good_epoch;
        throw TrainingDivergence("non-finite generator loss at iteration " + std::to_string(result.iterations) +
                                     " (" + describe(terms) + "); restored epoch " +
                                     std::to_string(last_good_epoch),
                                 last_good_epoch);
      }
      g.total.backward();
      opt_g.step();
      set_requires_grad(d_params, true);

      // discriminator step
      opt_d.zero_grad();
      const torch::Tensor fake_y = pool_y.query(g.fake_y.detach());
      const torch::Tensor fake_x = pool_x.query(g.fake_x.detach());
      const torch::Tensor loss_dy = nn::lsgan_discriminator_loss(s.d_y->forward(y), s.d_y->forward(fake_y));
      const torch::Tensor loss_dx = nn::lsgan_discriminator_loss(s.d_x->forward(x), s.d_x->forward(fake_x));
      terms.disc_y = loss_dy.item<double>();
      terms.disc_x = loss_dx.item<double>();
      try {
        full_objective(terms, cfg.lambda_cycle, cfg.lambda_identity);
      } catch (const TrainingDivergence&) {
        nn::restore(s, last_good);
        s.epoch = last_good_epoch;
        throw TrainingDivergence("non-finite discriminator loss at iteration " +
                                     std::to_string(result.iterations) + " (" + describe(terms) +
                                     "); restored epoch " + std::to_string(last_good_epoch),
                                 last_good_epoch);
      }
      (loss_dy + loss_dx).backward();
      opt_d.step();

      rec.cycle += terms.cycle;
      rec.gen_x += terms.gen_x;
      rec.gen_y += terms.gen_y;
      rec.identity += terms.identity;
      rec.disc_x += terms.disc_x;
      rec.disc_y += terms.disc_y;
      ++rec.iterations;
      ++result.iterations;
    }
    if (rec.iterations == 0) break;
    const double n = rec.iterations;
    rec.cycle /= n;
    rec.gen_x /= n;
    rec.gen_y /= n;
    rec.identity /= n;
    rec.disc_x /= n;
    rec.disc_y /= n;
    result.history.push_back(rec);
    if (rec.iterations == per_epoch) {
      ++s.epoch;
      last_good = nn::snapshot(s);
      last_good_epoch = s.epoch;
    }
    if (options.on_epoch) options.on_epoch(rec);
    if (rec.iterations < per_epoch) break;
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainingResult fine_tune(TranslationModel& model, const CycleGANConfig& config, const std::vector<Image>& x_tiles,
                         const std::vector<Image>& y_tiles, double lr, int epochs, const TrainOptions& options) {
  const CycleGANConfig& have = model.config();
  if (have.n_res_blocks != config.n_res_blocks || have.n_disc_layers != config.n_disc_layers ||
      have.base_width != config.base_width) {
    std::ostringstream os;
    os << "checkpoint architecture (res_blocks=" << have.n_res_blocks << ", disc_layers=" << have.n_disc_layers
       << ", width=" << have.base_width << ") does not match the config (res_blocks=" << config.n_res_blocks
       << ", disc_layers=" << config.n_disc_layers << ", width=" << config.base_width << ")";
    throw CheckpointIncompatible(os.str());
  }
  if (have.input_domain != config.input_domain) {
    throw CheckpointIncompatible("checkpoint was trained on input domain '" + to_string(have.input_domain) +
                                 "', config asks for '" + to_string(config.input_domain) + "'");
  }
  if (!(lr > 0.0)) throw ParameterError("fine-tune learning rate must be positive");
  config.validate();
  const std::string parent = model.id();
  auto& s = model.state();
  s.config = config;
  s.parent = parent;
  TrainOptions opts = options;
  opts.epochs = epochs;
  opts.constant_lr = lr;
  return train(model, x_tiles, y_tiles, opts);
}

double evaluate_cycle_loss(const TranslationModel& model, const std::vector<Image>& x_tiles,
                           const std::vector<Image>& y_tiles) {
  torch::NoGradGuard guard;
  const auto& s = model.state();
  const auto mean_abs = [](const nn::Generator& there, const nn::Generator& back, const torch::Tensor& all) {
    double sum = 0.0;
    for (long i = 0; i < all.size(0); i += 8) {
      const torch::Tensor b = all.slice(0, i, std::min<long>(i + 8, all.size(0)));
      const torch::Tensor rec =
          const_cast<nn::Generator&>(back)->forward(const_cast<nn::Generator&>(there)->forward(b));
      sum += (rec - b).abs().sum().item<double>();
    }
    return sum / static_cast<double>(all.numel());
  };
  return mean_abs(s.g_x, s.g_y, stack_tiles(x_tiles, "X")) + mean_abs(s.g_y, s.g_x, stack_tiles(y_tiles, "Y"));
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::string out = "epoch,L_cycle,L_G_X,L_G_Y,L_D_X,L_D_Y,L_idt,lr\n";
  char buf[512];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.cycle, r.gen_x, r.gen_y,
                  r.disc_x, r.disc_y, r.identity, r.lr);
    out += buf;
  }
  return out;
}

void write_loss_history_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  io::write_text(path, loss_history_csv(history));
}

}  // namespace vhist
