#include "vhist/classifier.hpp"

#include <torch/torch.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "vhist/nn/networks.hpp"

namespace vhist {

struct TileClassifier::Impl {
  torch::nn::Sequential net{nullptr};

  Impl(int w, std::uint64_t seed) {
    torch::manual_seed(seed);
    using torch::nn::Conv2d;
    using torch::nn::Conv2dOptions;
    const auto pool = [] { return torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2)); };
    net = torch::nn::Sequential(Conv2d(Conv2dOptions(3, w, 3).padding(1)), torch::nn::ReLU(), pool(),
                                Conv2d(Conv2dOptions(w, 2 * w, 3).padding(1)), torch::nn::ReLU(), pool(),
                                Conv2d(Conv2dOptions(2 * w, 4 * w, 3).padding(1)), torch::nn::ReLU(), pool(),
                                torch::nn::AdaptiveAvgPool2d(torch::nn::AdaptiveAvgPool2dOptions(1)),
                                torch::nn::Flatten(), torch::nn::Linear(4 * w, 2));
  }

  torch::Tensor logits(const torch::Tensor& x) { return net->forward(x); }
};

TileClassifier::TileClassifier(int width, std::uint64_t seed) : impl_(std::make_unique<Impl>(width, seed)) {}
TileClassifier::~TileClassifier() = default;
TileClassifier::TileClassifier(TileClassifier&&) noexcept = default;
TileClassifier& TileClassifier::operator=(TileClassifier&&) noexcept = default;

namespace {

torch::Tensor batch_of(const std::vector<Image>& tiles, const std::vector<std::size_t>& idx) {
  std::vector<Image> sel;
  sel.reserve(idx.size());
  for (std::size_t i : idx) sel.push_back(replicate_channels(tiles[i], 3));
  return nn::to_tensor(sel);
}

}  // namespace

std::vector<int> TileClassifier::predict(const std::vector<Image>& tiles) const {
  torch::NoGradGuard guard;
  std::vector<int> out;
  for (std::size_t i = 0; i < tiles.size(); i += 32) {
    std::vector<std::size_t> idx;
    for (std::size_t j = i; j < std::min(tiles.size(), i + 32); ++j) idx.push_back(j);
    const torch::Tensor pred = impl_->logits(batch_of(tiles, idx)).argmax(1);
    for (long j = 0; j < pred.size(0); ++j) out.push_back(static_cast<int>(pred[j].item<long>()));
  }
  return out;
}

int TileClassifier::predict(const Image& tile) const { return predict(std::vector<Image>{tile}).front(); }

ConfusionMatrix score(const TileClassifier& model, const LabeledTileSet& tiles) {
  ConfusionMatrix cm(2);
  const std::vector<int> pred = model.predict(tiles.tiles);
  for (std::size_t i = 0; i < pred.size(); ++i) cm.add(static_cast<int>(tiles.labels[i]), pred[i]);
  return cm;
}

ClassifierFit train_classifier(const LabeledTileSet& train, const LabeledTileSet& validation,
                               const ClassifierSettings& settings, std::uint64_t seed) {
  train.validate();
  const std::set<TissueClass> classes(train.labels.begin(), train.labels.end());
  if (classes.size() < 2) throw ParameterError("classifier training needs both classes present");

  ClassifierFit fit{TileClassifier(settings.width, seed)};
  auto& net = fit.model.impl().net;
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(settings.lr));
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const long steps_per_epoch =
      static_cast<long>((train.size() + settings.batch_size - 1) / settings.batch_size);
  const long total = steps_per_epoch * settings.epochs;
  const long warmup = std::max<long>(1, std::lround(settings.warmup_fraction * total));
  long step = 0;
  for (int e = 0; e < settings.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += settings.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + i,
                                         order.begin() + std::min(order.size(), i + settings.batch_size));
      // linear warmup, then cosine decay to zero
      const double lr = step < warmup ? settings.lr * (step + 1) / static_cast<double>(warmup)
                                      : 0.5 * settings.lr *
                                            (1.0 + std::cos(M_PI * (step - warmup) /
                                                            static_cast<double>(std::max<long>(1, total - warmup))));
      for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
      std::vector<long> labels;
      for (std::size_t k : idx) labels.push_back(static_cast<long>(train.labels[k]));
      opt.zero_grad();
      const torch::Tensor loss =
          torch::nn::functional::cross_entropy(fit.model.impl().logits(batch_of(train.tiles, idx)),
                                               torch::tensor(labels));
      loss.backward();
      opt.step();
      ++step;
    }
  }
  fit.train_accuracy = score(fit.model, train).accuracy();
  if (validation.size() > 0) {
    fit.validation = score(fit.model, validation);
    fit.validation_accuracy = fit.validation.accuracy();
  }
  return fit;
}

CrossValidation cross_validate(const LabeledTileSet& tiles, const ClassifierSettings& settings, std::uint64_t seed) {
  tiles.validate();
  CrossValidation cv;
  const std::vector<Fold> folds = kfold_split(tiles.labels, settings.folds, seed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    ClassifierFit fit = train_classifier(tiles.subset(folds[f].train), tiles.subset(folds[f].validation), settings,
                                         seed + 1000 + f);
    cv.fold_accuracy.push_back(fit.validation_accuracy);
    cv.confusion.merge(fit.validation);
    cv.models.push_back(std::move(fit.model));
  }
  cv.mean_accuracy = mean(cv.fold_accuracy);
  cv.sd_accuracy = sample_stddev(cv.fold_accuracy);
  return cv;
}

TransferReport evaluate_transfer(const std::vector<TileClassifier>& models, const LabeledTileSet& tiles) {
  tiles.validate();
  TransferReport r;
  for (std::size_t f = 0; f < models.size(); ++f) {
    const std::vector<int> pred = models[f].predict(tiles.tiles);
    ConfusionMatrix cm(2);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const int truth = static_cast<int>(tiles.labels[i]);
      cm.add(truth, pred[i]);
      if (truth == 0 && pred[i] == 1) r.false_positives.emplace_back(static_cast<int>(f), tiles.ids[i]);
      if (truth == 1 && pred[i] == 0) r.false_negatives.emplace_back(static_cast<int>(f), tiles.ids[i]);
    }
    r.fold_accuracy.push_back(cm.accuracy());
    r.confusion.merge(cm);
  }
  r.mean_accuracy = mean(r.fold_accuracy);
  r.sd_accuracy = sample_stddev(r.fold_accuracy);
  return r;
}

std::string transfer_report_csv(const CrossValidation& cv, const TransferReport& transfer) {
  std::ostringstream os;
  os.precision(9);
  os << "# classifier: compact CNN trained from scratch (approximates an ImageNet-pretrained ResNet18); "
        "warmup + cosine LR\n";
  os << "fold,he_validation_accuracy,vhe_accuracy\n";
  for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f) {
    os << f << ',' << cv.fold_accuracy[f] << ',' << (f < transfer.fold_accuracy.size() ? transfer.fold_accuracy[f] : 0.0)
       << '\n';
  }
  os << "mean," << cv.mean_accuracy << ',' << transfer.mean_accuracy << '\n';
  os << "sd," << cv.sd_accuracy << ',' << transfer.sd_accuracy << '\n';
  const auto cm = [&os](const char* name, const ConfusionMatrix& m) {
    os << name << "_confusion,tn=" << m.counts[0][0] << ",fp=" << m.counts[0][1] << ",fn=" << m.counts[1][0]
       << ",tp=" << m.counts[1][1] << '\n';
  };
  cm("he", cv.confusion);
  cm("vhe", transfer.confusion);
  return os.str();
}

}  // namespace vhist
