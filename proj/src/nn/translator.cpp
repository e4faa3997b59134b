#include <torch/torch.h>

#include <cmath>

#include "vhist/nn/model_state.hpp"

namespace vhist {

TranslationModel::State::State(const CycleGANConfig& cfg) : config(cfg) {
  config.validate();
  g_x = nn::Generator(3, 3, cfg.base_width, cfg.n_res_blocks);
  g_y = nn::Generator(3, 3, cfg.base_width, cfg.n_res_blocks);
  d_x = nn::Discriminator(3, cfg.base_width, cfg.n_disc_layers);
  d_y = nn::Discriminator(3, cfg.base_width, cfg.n_disc_layers);
}

std::vector<std::pair<std::string, torch::Tensor>> TranslationModel::State::named_tensors() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  const auto add = [&out](const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& item : m.named_parameters()) out.emplace_back(prefix + item.key(), item.value());
    for (const auto& item : m.named_buffers()) out.emplace_back(prefix + item.key(), item.value());
  };
  add("g_x.", *g_x);
  add("g_y.", *g_y);
  add("d_x.", *d_x);
  add("d_y.", *d_y);
  return out;
}

std::vector<torch::Tensor> TranslationModel::State::generator_parameters() const {
  std::vector<torch::Tensor> p = g_x->parameters();
  for (auto& t : g_y->parameters()) p.push_back(t);
  return p;
}

std::vector<torch::Tensor> TranslationModel::State::discriminator_parameters() const {
  std::vector<torch::Tensor> p = d_x->parameters();
  for (auto& t : d_y->parameters()) p.push_back(t);
  return p;
}

namespace nn {

std::vector<torch::Tensor> snapshot(const TranslationModel::State& state) {
  std::vector<torch::Tensor> out;
  for (const auto& [name, t] : state.named_tensors()) out.push_back(t.detach().clone());
  return out;
}

void restore(TranslationModel::State& state, const std::vector<torch::Tensor>& saved) {
  torch::NoGradGuard guard;
  const auto tensors = state.named_tensors();
  if (tensors.size() != saved.size()) throw CheckpointIncompatible("snapshot does not match the model");
  for (std::size_t i = 0; i < saved.size(); ++i) tensors[i].second.copy_(saved[i]);
}

}  // namespace nn

TranslationModel::TranslationModel(const CycleGANConfig& config)
    : state_(std::make_unique<State>(config)) {
  torch::manual_seed(config.seed);
  nn::init_weights(*state_->g_x);
  nn::init_weights(*state_->g_y);
  nn::init_weights(*state_->d_x);
  nn::init_weights(*state_->d_y);
}

TranslationModel::TranslationModel(std::unique_ptr<State> state) : state_(std::move(state)) {}
TranslationModel::~TranslationModel() = default;
TranslationModel::TranslationModel(TranslationModel&&) noexcept = default;
TranslationModel& TranslationModel::operator=(TranslationModel&&) noexcept = default;

TranslationModel TranslationModel::clone() const {
  auto s = std::make_unique<State>(state_->config);
  s->epoch = state_->epoch;
  s->parent = state_->parent;
  nn::restore(*s, nn::snapshot(*state_));
  return TranslationModel(std::move(s));
}

const CycleGANConfig& TranslationModel::config() const noexcept { return state_->config; }
int TranslationModel::epoch() const noexcept { return state_->epoch; }
std::string TranslationModel::id() const { return nn::content_id(*state_); }
const std::string& TranslationModel::parent_id() const noexcept { return state_->parent; }

std::int64_t TranslationModel::generator_parameters() const { return nn::parameter_count(*state_->g_x); }
std::int64_t TranslationModel::discriminator_parameters() const { return nn::parameter_count(*state_->d_x); }

namespace {

Image run_generator(const nn::Generator& g, const Image& tile) {
  if (tile.empty()) throw DimensionError("empty tile");
  if (tile.channels() != 1 && tile.channels() != 3) throw DimensionError("tiles must have 1 or 3 channels");
  torch::NoGradGuard guard;
  const Image rgb = replicate_channels(tile, 3);
  torch::Tensor x = nn::to_tensor(rgb);
  const int h = tile.height(), w = tile.width();
  const int ph = (4 - h % 4) % 4, pw = (4 - w % 4) % 4;
  if (ph || pw) {
    if (ph >= h || pw >= w) throw DimensionError("tile too small to pad to a multiple of 4");
    x = torch::nn::functional::pad(
        x, torch::nn::functional::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReflect));
  }
  torch::Tensor y = const_cast<nn::Generator&>(g)->forward(x);
  if (ph || pw) y = y.slice(2, 0, h).slice(3, 0, w);
  return nn::to_image(y);
}

}  // namespace

Image TranslationModel::to_he(const Image& tile) const { return run_generator(state_->g_x, tile); }
Image TranslationModel::to_source(const Image& tile) const { return run_generator(state_->g_y, tile); }

ModelHandle TranslationModel::handle() const {
  ModelHandle h;
  const State* s = state_.get();
  h.translate = [s](const Image& tile) { return run_generator(s->g_x, tile); };
  h.domain = state_->config.input_domain;
  h.checkpoint_id = id();
  return h;
}

double TranslationModel::max_weight_difference(const TranslationModel& other) const {
  const auto a = state_->named_tensors();
  const auto b = other.state_->named_tensors();
  if (a.size() != b.size()) throw CheckpointIncompatible("models differ in architecture");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].second.sizes().equals(b[i].second.sizes())) {
      throw CheckpointIncompatible("tensor '" + a[i].first + "' differs in shape");
    }
    m = std::max(m, (a[i].second - b[i].second).abs().max().item<double>());
  }
  return m;
}

}  // namespace vhist
