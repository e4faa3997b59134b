#pragma once

#include <string>
#include <vector>

#include "vhist/nn/networks.hpp"
#include "vhist/translate.hpp"

namespace vhist {

struct TranslationModel::State {
  CycleGANConfig config;
  nn::Generator g_x{nullptr};
  nn::Generator g_y{nullptr};
  nn::Discriminator d_x{nullptr};
  nn::Discriminator d_y{nullptr};
  int epoch = 0;
  std::string parent = "none";

  /// Builds the four networks for `config` (weights uninitialized beyond libtorch defaults).
  explicit State(const CycleGANConfig& config);

  /// Every parameter and buffer as (qualified name, tensor), in a fixed order.
  std::vector<std::pair<std::string, torch::Tensor>> named_tensors() const;
  std::vector<torch::Tensor> generator_parameters() const;
  std::vector<torch::Tensor> discriminator_parameters() const;
};

namespace nn {
/// Deep copies of every named tensor; used for last-good snapshots.
std::vector<torch::Tensor> snapshot(const TranslationModel::State& state);
void restore(TranslationModel::State& state, const std::vector<torch::Tensor>& saved);
/// FNV-1a over the config text and raw float32 weight bytes.
std::string content_id(const TranslationModel::State& state);
}  // namespace nn

}  // namespace vhist
