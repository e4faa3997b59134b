#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "vhist/cyclegan_config.hpp"
#include "vhist/datasets.hpp"
#include "vhist/optics.hpp"
#include "vhist/phantom.hpp"
#include "vhist/pipeline.hpp"

namespace vhist {

/// Every module setting as section → key → value text. Values are parsed (and checked)
/// by the typed accessors; the map is what gets written as the resolved config.
class RunConfig {
 public:
  RunConfig();

  /// Top-level keys `seed` and `out`, plus one mapping per section. Unknown keys throw.
  void apply_yaml(const std::string& text, const std::string& origin = "<yaml>");
  void apply_yaml_file(const std::filesystem::path& path);
  /// VHIST_SEED, VHIST_OUT and VHIST_<SECTION>_<KEY> from the given environment.
  void apply_env(const std::map<std::string, std::string>& env);
  void apply_process_env();
  /// "section.key" = value.
  void set(const std::string& dotted, const std::string& value);
  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::string& get(const std::string& section, const std::string& key) const;
  int get_int(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;

  std::uint64_t seed = 0;
  std::filesystem::path out = "vhist_run";

  PhantomSpec phantom() const;
  HePalette palette() const;
  AcquisitionSettings acquisition() const;
  DpcMode dpc_mode() const;
  double pixel_pitch_um() const;
  /// Low-pass applied to the phantom phase by `simulate` (fraction of Nyquist, 0 = off).
  double band_limit() const;
  ConversionSettings conversion() const;
  double upsample_factor() const;
  CycleGANConfig cyclegan() const;
  DataSettings data() const;
  ClassifierSettings classifier() const;
  /// Constant-LR epochs run by `finetune` (the LR is cyclegan.finetune_lr).
  int finetune_epochs() const;

  /// Parses every section; throws ConfigError on the first bad value.
  void validate() const;

  std::string to_yaml() const;
  const std::map<std::string, std::map<std::string, std::string>>& sections() const noexcept {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

HePalette faded_palette();

}  // namespace vhist
