#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vhist/datasets.hpp"
#include "vhist/evalsuite.hpp"

namespace vhist {

/// Compact healthy/tumor CNN: three conv-ReLU-maxpool stages, global average pool, linear head.
class TileClassifier {
 public:
  TileClassifier(int width, std::uint64_t seed);
  ~TileClassifier();
  TileClassifier(TileClassifier&&) noexcept;
  TileClassifier& operator=(TileClassifier&&) noexcept;

  /// 0 = healthy, 1 = tumor.
  int predict(const Image& tile) const;
  std::vector<int> predict(const std::vector<Image>& tiles) const;

  struct Impl;
  Impl& impl() noexcept { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

struct ClassifierFit {
  TileClassifier model;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  ConfusionMatrix validation{2};
};

/// Adam with linear warmup then cosine decay. Throws ParameterError on single-class input.
ClassifierFit train_classifier(const LabeledTileSet& train, const LabeledTileSet& validation,
                               const ClassifierSettings& settings, std::uint64_t seed);

struct CrossValidation {
  std::vector<TileClassifier> models;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  ConfusionMatrix confusion{2};  // pooled over validation folds
};

CrossValidation cross_validate(const LabeledTileSet& tiles, const ClassifierSettings& settings, std::uint64_t seed);

ConfusionMatrix score(const TileClassifier& model, const LabeledTileSet& tiles);

struct TransferReport {
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  ConfusionMatrix confusion{2};  // summed over folds
  /// (fold, tile id) of every healthy tile called tumor.
  std::vector<std::pair<int, std::string>> false_positives;
  std::vector<std::pair<int, std::string>> false_negatives;
};

TransferReport evaluate_transfer(const std::vector<TileClassifier>& models, const LabeledTileSet& tiles);

std::string transfer_report_csv(const CrossValidation& cv, const TransferReport& transfer);

}  // namespace vhist
