#include "vhist/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "vhist/io.hpp"

namespace vhist {

void LabeledTileSet::add(Image tile, TissueClass label, TileSource source, std::string id) {
  tiles.push_back(std::move(tile));
  labels.push_back(label);
  sources.push_back(source);
  ids.push_back(std::move(id));
}

void LabeledTileSet::validate() const {
  if (labels.size() != tiles.size() || sources.size() != tiles.size() || ids.size() != tiles.size()) {
    throw ParameterError("tile set fields are misaligned");
  }
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ParameterError("duplicate tile id '" + id + "'");
  }
}

LabeledTileSet LabeledTileSet::subset(std::span<const std::size_t> indices) const {
  LabeledTileSet out;
  for (std::size_t i : indices) out.add(tiles.at(i), labels.at(i), sources.at(i), ids.at(i));
  return out;
}

std::vector<Fold> kfold_split(std::span<const TissueClass> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ParameterError("k-fold needs k >= 2");
  if (labels.size() < static_cast<std::size_t>(k)) {
    throw ParameterError("k-fold needs at least k items");
  }
  std::map<TissueClass, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [cls, items] : by_class) {
    if (items.size() < static_cast<std::size_t>(k)) {
      throw StratificationError("class '" + to_string(cls) + "' has " + std::to_string(items.size()) +
                                " items, fewer than k = " + std::to_string(k));
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(labels.size(), -1);
  std::size_t dealt = 0;
  for (auto& [cls, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t i : items) fold_of[i] = static_cast<int>(dealt++ % k);
  }
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < k; ++f) {
      (f == fold_of[i] ? folds[f].validation : folds[f].train).push_back(i);
    }
  }
  return folds;
}

ConfusionMatrix::ConfusionMatrix(int classes)
    : counts(classes, std::vector<std::size_t>(classes, 0)) {}

void ConfusionMatrix::add(int truth, int predicted) {
  const int n = static_cast<int>(counts.size());
  if (truth < 0 || truth >= n || predicted < 0 || predicted >= n) {
    throw IndexError("class index out of range in confusion matrix");
  }
  ++counts[truth][predicted];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.counts.size() != counts.size()) throw DimensionError("confusion matrix size mismatch");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = 0; j < counts.size(); ++j) counts[i][j] += other.counts[i][j];
  }
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

std::size_t ConfusionMatrix::row_sum(int truth) const {
  const auto& row = counts.at(truth);
  return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

double ConfusionMatrix::accuracy() const {
  const std::size_t t = total();
  if (t == 0) return 0.0;
  std::size_t diag = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) diag += counts[i][i];
  return static_cast<double>(diag) / static_cast<double>(t);
}

double cohens_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DimensionError("rating vectors differ in length");
  if (a.empty()) throw UndefinedKappa("kappa of empty rating vectors");
  std::map<int, std::pair<long long, long long>> marginals;
  long long agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
    if (a[i] == b[i]) ++agree;
  }
  const auto n = static_cast<long long>(a.size());
  long long chance = 0;  // n² · p_e
  for (const auto& [cat, m] : marginals) chance += m.first * m.second;
  // κ = (n·agree − n²p_e) / (n² − n²p_e), evaluated in integers.
  const long long num = n * agree - chance;
  const long long den = n * n - chance;
  if (den == 0) {
    if (agree == n) return 1.0;
    throw UndefinedKappa("chance agreement is 1 but observed agreement is below 1");
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double mean_pairwise_kappa(const std::vector<std::vector<int>>& ratings) {
  if (ratings.size() < 2) throw ParameterError("pairwise kappa needs at least two raters");
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    for (std::size_t j = i + 1; j < ratings.size(); ++j) {
      sum += cohens_kappa(ratings[i], ratings[j]);
      ++pairs;
    }
  }
  return sum / pairs;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace {
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DimensionError("spearman needs equal lengths >= 2");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void MaskScore::add(const Grid<std::uint8_t>& predicted, const Grid<std::uint8_t>& truth) {
  if (!predicted.same_shape(truth)) throw DimensionError("mask shapes differ");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++true_positive;
    else if (p) ++false_positive;
    else if (t) ++false_negative;
  }
}

double MaskScore::precision() const {
  const std::size_t d = true_positive + false_positive;
  return d ? static_cast<double>(true_positive) / d : 0.0;
}

double MaskScore::recall() const {
  const std::size_t d = true_positive + false_negative;
  return d ? static_cast<double>(true_positive) / d : 0.0;
}

double MaskScore::f1() const {
  const std::size_t d = 2 * true_positive + false_positive + false_negative;
  return d ? 2.0 * static_cast<double>(true_positive) / d : 1.0;
}

std::string to_string(Modality m) { return m == Modality::he ? "he" : "vhe"; }

StudyReport study_summary(const std::vector<RaterResponse>& responses,
                          const std::map<std::string, bool>& ground_truth) {
  StudyReport report;
  std::set<std::tuple<std::string, std::string, Modality>> seen;
  std::set<std::string> all_raters;
  for (const auto& r : responses) {
    if (r.confidence < 1 || r.confidence > 5) {
      throw RangeError("confidence " + std::to_string(r.confidence) + " outside 1..5");
    }
    if (!seen.insert({r.rater_id, r.image_id, r.modality}).second) {
      throw ParameterError("rater '" + r.rater_id + "' answered image '" + r.image_id + "' twice");
    }
    all_raters.insert(r.rater_id);
  }

  for (Modality m : {Modality::he, Modality::vhe}) {
    ModalitySummary s;
    double confidence_sum = 0.0;
    // rater → image → continue_resection
    std::map<std::string, std::map<std::string, int>> resection;
    for (const auto& r : responses) {
      if (r.modality != m) continue;
      ++s.responses;
      confidence_sum += r.confidence;
      resection[r.rater_id][r.image_id] = r.continue_resection ? 1 : 0;
      if (r.tumor_present == TumorAnswer::cannot_assess) {
        ++s.cannot_assess;
        continue;
      }
      const auto truth = ground_truth.find(r.image_id);
      if (truth == ground_truth.end()) {
        throw ParameterError("no ground truth for image '" + r.image_id + "'");
      }
      ++s.assessed;
      if ((r.tumor_present == TumorAnswer::yes) == truth->second) ++s.correct;
    }
    if (s.responses == 0) continue;
    for (const auto& rater : all_raters) {
      if (!resection.count(rater)) {
        report.warnings.push_back("rater '" + rater + "' has no " + to_string(m) +
                                  " responses; excluded");
      }
    }
    s.accuracy = s.assessed ? static_cast<double>(s.correct) / s.assessed : 0.0;
    s.cannot_assess_rate = static_cast<double>(s.cannot_assess) / s.responses;
    s.mean_confidence = confidence_sum / s.responses;

    double kappa_sum = 0.0;
    for (auto i = resection.begin(); i != resection.end(); ++i) {
      for (auto j = std::next(i); j != resection.end(); ++j) {
        std::vector<int> a, b;
        for (const auto& [image, v] : i->second) {
          const auto other = j->second.find(image);
          if (other == j->second.end()) continue;
          a.push_back(v);
          b.push_back(other->second);
        }
        try {
          kappa_sum += cohens_kappa(a, b);
          ++s.kappa_pairs;
        } catch (const UndefinedKappa& e) {
          report.warnings.push_back("raters '" + i->first + "' and '" + j->first + "': " + e.what());
        }
      }
    }
    s.mean_pairwise_kappa = s.kappa_pairs ? kappa_sum / s.kappa_pairs : 0.0;
    report.modalities[m] = s;
  }
  return report;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

bool parse_yes_no(const std::string& v, const std::string& where) {
  if (v == "yes") return true;
  if (v == "no") return false;
  throw ConfigError(where + ": expected yes/no, got '" + v + "'");
}

}  // namespace

std::vector<RaterResponse> read_responses_csv(const std::filesystem::path& path) {
  std::istringstream is(io::read_text(path));
  std::string line;
  if (!std::getline(is, line)) throw IoError("'" + path.string() + "' is empty");
  const std::vector<std::string> header = split_csv(line);
  const std::vector<std::string> expected = {"rater_id",           "image_id",  "modality", "tumor_present",
                                             "continue_resection", "confidence"};
  if (header != expected) {
    throw ConfigError(path.string() +
                      ": header must be rater_id,image_id,modality,tumor_present,continue_resection,confidence");
  }
  std::vector<RaterResponse> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 6) throw ConfigError(where + ": expected 6 columns");
    RaterResponse r;
    r.rater_id = cells[0];
    r.image_id = cells[1];
    if (cells[2] == "he") r.modality = Modality::he;
    else if (cells[2] == "vhe") r.modality = Modality::vhe;
    else throw ConfigError(where + ": modality must be he or vhe");
    if (cells[3] == "cannot_assess") r.tumor_present = TumorAnswer::cannot_assess;
    else r.tumor_present = parse_yes_no(cells[3], where) ? TumorAnswer::yes : TumorAnswer::no;
    r.continue_resection = parse_yes_no(cells[4], where);
    try {
      r.confidence = std::stoi(cells[5]);
    } catch (const std::exception&) {
      throw ConfigError(where + ": confidence must be an integer");
    }
    if (r.confidence < 1 || r.confidence > 5) throw ConfigError(where + ": confidence outside 1..5");
    out.push_back(std::move(r));
  }
  return out;
}

void write_responses_csv(const std::filesystem::path& path, const std::vector<RaterResponse>& responses) {
  std::ostringstream os;
  os << "rater_id,image_id,modality,tumor_present,continue_resection,confidence\n";
  for (const auto& r : responses) {
    const char* tumor = r.tumor_present == TumorAnswer::yes  ? "yes"
                        : r.tumor_present == TumorAnswer::no ? "no"
                                                             : "cannot_assess";
    os << r.rater_id << ',' << r.image_id << ',' << to_string(r.modality) << ',' << tumor << ','
       << (r.continue_resection ? "yes" : "no") << ',' << r.confidence << '\n';
  }
  io::write_text(path, os.str());
}

std::map<std::string, bool> read_ground_truth_csv(const std::filesystem::path& path) {
  std::istringstream is(io::read_text(path));
  std::string line;
  std::getline(is, line);
  if (split_csv(line) != std::vector<std::string>{"image_id", "tumor_present"}) {
    throw ConfigError(path.string() + ": header must be image_id,tumor_present");
  }
  std::map<std::string, bool> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 2) throw ConfigError(where + ": expected 2 columns");
    out[cells[0]] = parse_yes_no(cells[1], where);
  }
  return out;
}

std::string report_csv(const StudyReport& report) {
  const auto get = [&](Modality m) {
    const auto it = report.modalities.find(m);
    return it == report.modalities.end() ? ModalitySummary{} : it->second;
  };
  const ModalitySummary he = get(Modality::he), vhe = get(Modality::vhe);
  std::ostringstream os;
  os.precision(17);
  os << "parameter,he,vhe\n"
     << "accuracy," << he.accuracy << ',' << vhe.accuracy << '\n'
     << "group_concordance_kappa," << he.mean_pairwise_kappa << ',' << vhe.mean_pairwise_kappa << '\n'
     << "diagnostic_confidence," << he.mean_confidence << ',' << vhe.mean_confidence << '\n'
     << "cannot_assess_rate," << he.cannot_assess_rate << ',' << vhe.cannot_assess_rate << '\n'
     << "responses," << he.responses << ',' << vhe.responses << '\n'
     << "kappa_pairs," << he.kappa_pairs << ',' << vhe.kappa_pairs << '\n';
  return os.str();
}

std::string report_table(const StudyReport& report) {
  const auto get = [&](Modality m) {
    const auto it = report.modalities.find(m);
    return it == report.modalities.end() ? ModalitySummary{} : it->second;
  };
  const ModalitySummary he = get(Modality::he), vhe = get(Modality::vhe);
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-28s %-8s %-12s\n", "Parameter", "H&E", "Virtual H&E");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-28s %-8s %-12s\n", "Accuracy",
                (std::to_string(static_cast<int>(std::lround(he.accuracy * 100))) + "%").c_str(),
                (std::to_string(static_cast<int>(std::lround(vhe.accuracy * 100))) + "%").c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "%-28s %-8.2f %-12.2f\n", "Overall Group Concordance",
                he.mean_pairwise_kappa, vhe.mean_pairwise_kappa);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-28s %-8.1f %-12.1f\n", "Diagnostic Confidence", he.mean_confidence,
                vhe.mean_confidence);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-28s %-8.2f %-12.2f\n", "Cannot-assess rate", he.cannot_assess_rate,
                vhe.cannot_assess_rate);
  out += buf;
  for (const auto& w : report.warnings) out += "warning: " + w + "\n";
  return out;
}

}  // namespace vhist
