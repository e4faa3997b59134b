#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace vhist {

/// What the X-domain generator consumes.
enum class InputDomain { qobm_inverted, qobm_raw, dpc, single_capture };

std::string to_string(InputDomain d);
InputDomain input_domain_from_string(const std::string& s);

struct CycleGANConfig {
  int n_res_blocks = 9;
  int n_disc_layers = 3;
  int base_width = 64;
  double lambda_cycle = 10.0;
  double lambda_identity = 0.5;
  int batch_size = 4;
  int epochs_flat = 100;
  int epochs_decay = 100;
  double lr0 = 2e-4;
  double finetune_lr = 2e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int replay_buffer = 50;
  bool augment = false;  // random flips
  InputDomain input_domain = InputDomain::qobm_inverted;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;

  int total_epochs() const noexcept { return epochs_flat + epochs_decay; }

  /// Nine residual blocks, three discriminator layers.
  static CycleGANConfig paper_small();
  /// Twelve residual blocks, six discriminator layers.
  static CycleGANConfig paper_large();
  /// 64² tiles, two residual blocks, two discriminator layers, a few hundred iterations.
  static CycleGANConfig desk();

  /// Flat key/value view used by checkpoints and run configs.
  std::map<std::string, std::string> to_map() const;
  /// Unknown keys raise ConfigError; missing keys keep the value in `base`.
  static CycleGANConfig from_map(const std::map<std::string, std::string>& kv,
                                 CycleGANConfig base);
  static CycleGANConfig from_map(const std::map<std::string, std::string>& kv);

  friend bool operator==(const CycleGANConfig&, const CycleGANConfig&) = default;
};

/// lr0 for epoch < epochs_flat, then linear to exactly 0 at epochs_flat + epochs_decay.
/// Throws ScheduleComplete past the end and ParameterError for negative epochs.
double lr_at(double epoch, const CycleGANConfig& config);

/// Scalar values of the loss terms that enter the two objectives.
struct LossTerms {
  double cycle = 0.0;
  double gen_x = 0.0;   // L_G(D_Y, G_X)
  double gen_y = 0.0;   // L_G(D_X, G_Y)
  double identity = 0.0;
  double disc_x = 0.0;  // L_D for D_X (judges X-domain images)
  double disc_y = 0.0;  // L_D for D_Y (judges Y-domain images)
};

struct ObjectiveTotals {
  double generator = 0.0;
  double discriminator = 0.0;
};

/// λ_cyc·L_cycle + L_G_X + L_G_Y + λ_idt·L_idt and L_D_X + L_D_Y.
/// Throws TrainingDivergence when any term is NaN.
ObjectiveTotals full_objective(const LossTerms& terms, double lambda_cycle = 10.0,
                               double lambda_identity = 0.5);

}  // namespace vhist
