#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vhist/cyclegan_config.hpp"
#include "vhist/image.hpp"
#include "vhist/pipeline.hpp"

namespace vhist {

/// One row of the loss history (epoch means).
struct LossRecord {
  int epoch = 0;
  double cycle = 0.0;
  double gen_x = 0.0;
  double gen_y = 0.0;
  double disc_x = 0.0;
  double disc_y = 0.0;
  double identity = 0.0;
  double lr = 0.0;
  int iterations = 0;
};

/// G_X: X → Y, G_Y: Y → X, D_X judges X-domain images, D_Y judges Y-domain images.
/// X tiles are replicated to 3 channels, so both generators are 3 → 3.
class TranslationModel {
 public:
  /// Fresh weights drawn from N(0, 0.02) with config.seed.
  explicit TranslationModel(const CycleGANConfig& config);
  ~TranslationModel();
  TranslationModel(TranslationModel&&) noexcept;
  TranslationModel& operator=(TranslationModel&&) noexcept;
  TranslationModel(const TranslationModel&) = delete;
  TranslationModel& operator=(const TranslationModel&) = delete;

  /// Deep copy of weights and metadata.
  TranslationModel clone() const;

  const CycleGANConfig& config() const noexcept;
  int epoch() const noexcept;
  /// Content hash of config and weights (16 hex digits).
  std::string id() const;
  /// Id of the checkpoint this model was fine-tuned from, or "none".
  const std::string& parent_id() const noexcept;

  std::int64_t generator_parameters() const;
  std::int64_t discriminator_parameters() const;

  /// X → Y on one [0,1] tile (gray or RGB); spatial dims are padded to a multiple of 4
  /// by reflection internally and cropped back.
  Image to_he(const Image& tile) const;
  /// Y → X.
  Image to_source(const Image& tile) const;

  /// A thread-safe pipeline handle bound to this model's input domain.
  /// The model must outlive the handle.
  ModelHandle handle() const;

  /// Versioned text header + float32 little-endian weight blobs.
  void save(const std::filesystem::path& path) const;
  /// Throws IoError / CheckpointIncompatible.
  static TranslationModel load(const std::filesystem::path& path);

  /// Max |Δw| over all weights; models must share an architecture.
  double max_weight_difference(const TranslationModel& other) const;

  struct State;
  State& state() noexcept { return *state_; }
  const State& state() const noexcept { return *state_; }

 private:
  explicit TranslationModel(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

struct TrainOptions {
  /// Stops after this many optimizer steps (−1: run the whole schedule).
  int max_iterations = -1;
  /// Epochs to run; −1 uses config.total_epochs().
  int epochs = -1;
  /// Constant learning rate instead of the schedule (fine-tuning).
  double constant_lr = 0.0;
  std::function<void(const LossRecord&)> on_epoch;
  /// Test hook: poison the generator loss at this iteration to exercise divergence handling.
  int inject_nan_at = -1;
};

struct TrainingResult {
  std::vector<LossRecord> history;
  int iterations = 0;
  double seconds = 0.0;
};

/// Alternating generator/discriminator Adam updates on unpaired tiles. One epoch is one
/// pass over the X tiles (incomplete final batch dropped). Tiles must be square, equal-sized,
/// in [0,1]. On a non-finite loss the weights are restored to the last completed epoch and
/// TrainingDivergence is thrown.
TrainingResult train(TranslationModel& model, const std::vector<Image>& x_tiles, const std::vector<Image>& y_tiles,
                     const TrainOptions& options = {});

/// Continues training at a constant LR and records the parent id.
/// Throws CheckpointIncompatible if the model's architecture differs from `config`.
TrainingResult fine_tune(TranslationModel& model, const CycleGANConfig& config, const std::vector<Image>& x_tiles,
                         const std::vector<Image>& y_tiles, double lr, int epochs,
                         const TrainOptions& options = {});

/// Mean L_cycle over the given tiles (batched, no gradient).
double evaluate_cycle_loss(const TranslationModel& model, const std::vector<Image>& x_tiles,
                           const std::vector<Image>& y_tiles);

/// Columns: epoch, L_cycle, L_G_X, L_G_Y, L_D_X, L_D_Y, L_idt, lr.
std::string loss_history_csv(const std::vector<LossRecord>& history);
void write_loss_history_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);

}  // namespace vhist
