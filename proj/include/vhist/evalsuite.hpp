#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vhist/image.hpp"
#include "vhist/phantom.hpp"

namespace vhist {

enum class TileSource { real_he, virtual_he };

struct LabeledTileSet {
  std::vector<Image> tiles;
  std::vector<TissueClass> labels;
  std::vector<TileSource> sources;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return tiles.size(); }
  void add(Image tile, TissueClass label, TileSource source, std::string id);
  /// Throws ParameterError on misaligned vectors or duplicate ids.
  void validate() const;
  LabeledTileSet subset(std::span<const std::size_t> indices) const;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Stratified k-fold partition. Items of each class are shuffled and dealt round-robin
/// with one counter shared across classes, so fold sizes differ by at most one.
std::vector<Fold> kfold_split(std::span<const TissueClass> labels, int k, std::uint64_t seed);

/// Rows: ground truth, columns: prediction.
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(int classes = 2);
  void add(int truth, int predicted);
  void merge(const ConfusionMatrix& other);
  std::size_t total() const;
  std::size_t row_sum(int truth) const;
  double accuracy() const;
};

/// κ = (p_o − p_e)/(1 − p_e). When p_e = 1: κ = 1 if p_o = 1, else UndefinedKappa.
double cohens_kappa(std::span<const int> a, std::span<const int> b);

/// Mean of κ over all unordered rater pairs.
double mean_pairwise_kappa(const std::vector<std::vector<int>>& ratings);

double mean(std::span<const double> v);
double sample_stddev(std::span<const double> v);
/// Average-rank Spearman correlation.
double spearman(std::span<const double> a, std::span<const double> b);

struct MaskScore {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  void add(const Grid<std::uint8_t>& predicted, const Grid<std::uint8_t>& truth);
  double precision() const;
  double recall() const;
  double f1() const;
};

// Reader study.

enum class Modality { he, vhe };
enum class TumorAnswer { yes, no, cannot_assess };

std::string to_string(Modality m);

struct RaterResponse {
  std::string rater_id;
  std::string image_id;
  Modality modality = Modality::he;
  TumorAnswer tumor_present = TumorAnswer::no;
  bool continue_resection = false;
  int confidence = 3;  // 1..5
};

struct ModalitySummary {
  std::size_t responses = 0;
  std::size_t assessed = 0;
  std::size_t correct = 0;
  std::size_t cannot_assess = 0;
  double accuracy = 0.0;            // correct / assessed
  double cannot_assess_rate = 0.0;  // cannot_assess / responses
  double mean_pairwise_kappa = 0.0; // on continue_resection
  std::size_t kappa_pairs = 0;
  double mean_confidence = 0.0;
};

struct StudyReport {
  std::map<Modality, ModalitySummary> modalities;
  std::vector<std::string> warnings;
};

/// `ground_truth` maps image_id → tumor present.
StudyReport study_summary(const std::vector<RaterResponse>& responses,
                          const std::map<std::string, bool>& ground_truth);

std::vector<RaterResponse> read_responses_csv(const std::filesystem::path& path);
void write_responses_csv(const std::filesystem::path& path,
                         const std::vector<RaterResponse>& responses);
std::map<std::string, bool> read_ground_truth_csv(const std::filesystem::path& path);

std::string report_csv(const StudyReport& report);
/// Plain-text table laid out like the reader-study summary (H&E vs virtual H&E).
std::string report_table(const StudyReport& report);

}  // namespace vhist
