#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "test_support.hpp"
#include "vhist/evalsuite.hpp"

using namespace vhist;
using vhist::testing::scratch_dir;

namespace {

// Independent κ from a 2×2 contingency table in floating point.
double kappa_2x2(const std::vector<int>& a, const std::vector<int>& b) {
  double t[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < a.size(); ++i) t[a[i]][b[i]] += 1.0;
  const double n = static_cast<double>(a.size());
  const double po = (t[0][0] + t[1][1]) / n;
  const double a1 = (t[1][0] + t[1][1]) / n, b1 = (t[0][1] + t[1][1]) / n;
  const double pe = a1 * b1 + (1 - a1) * (1 - b1);
  return (po - pe) / (1 - pe);
}

std::vector<int> yn(const std::string& s) {
  std::vector<int> v;
  for (char c : s) v.push_back(c == 'y');
  return v;
}

struct RaterStrings {
  const char* tumor;
  const char* resection;
  const char* confidence;
};

// Five raters × twenty images per modality; images 0–9 contain tumor.
const RaterStrings kHe[5] = {
    {"yyyyyyyynynnnnnynynn", "yyyyyyyyyynnnnnnynnn", "44445555455544445455"},
    {"yyyyyyyyyynnynnnnnnn", "yyyyyyyyyynnnnnnnnnn", "55455544445545445555"},
    {"yyyyyyyyyynnnnnnnnnn", "ynyyyyyyyynnnnnnnnnn", "45555555445555444455"},
    {"yyyyyyyyyynnynnnnnnn", "yyyyyyynyynnnnnnnnyn", "45445555545545445455"},
    {"yyyyyyyyyynnnnnnnynn", "yyyynnyyyynnnnnnynnn", "55545455545544555445"}};
const RaterStrings kVhe[5] = {
    {"yyyyyyynyyyynnnnnnnn", "nynynyynyynnnnnyynnn", "55544554554455555555"},
    {"yyyyyyyyyynnnnnnnnnn", "nynynyyyyynnnnnnynnn", "44555554555545455554"},
    {"yyyyyynyyynnnnnnnnnn", "nynynyyyyynnnnnyynnn", "45555544454555544554"},
    {"yyyyyyyyyynnnnnnnnnn", "nnnynyynyynnnnnyynnn", "55554455545555455455"},
    {"yyyyyyyyyynnnnnnnnnn", "nynynyynynnnnnnyynnn", "54555454554555454555"}};

std::vector<RaterResponse> table_fixture() {
  std::vector<RaterResponse> out;
  for (Modality m : {Modality::he, Modality::vhe}) {
    const RaterStrings* set = m == Modality::he ? kHe : kVhe;
    for (int r = 0; r < 5; ++r) {
      for (int i = 0; i < 20; ++i) {
        RaterResponse x;
        x.rater_id = "R" + std::to_string(r + 1);
        x.image_id = to_string(m) + "-" + std::to_string(i);
        x.modality = m;
        x.tumor_present = set[r].tumor[i] == 'y' ? TumorAnswer::yes : TumorAnswer::no;
        x.continue_resection = set[r].resection[i] == 'y';
        x.confidence = set[r].confidence[i] - '0';
        out.push_back(x);
      }
    }
  }
  return out;
}

std::map<std::string, bool> table_truth() {
  std::map<std::string, bool> t;
  for (Modality m : {Modality::he, Modality::vhe}) {
    for (int i = 0; i < 20; ++i) t[to_string(m) + "-" + std::to_string(i)] = i < 10;
  }
  return t;
}

}  // namespace

TEST_SUITE("evalsuite") {

TEST_CASE("kappa fixtures") {
  // both-yes 4, both-no 3, a-yes/b-no 2, a-no/b-yes 1
  const std::vector<int> a = {1, 1, 1, 1, 0, 0, 0, 1, 1, 0};
  const std::vector<int> b = {1, 1, 1, 1, 0, 0, 0, 0, 0, 1};
  CHECK(cohens_kappa(a, b) == 0.4);
  CHECK(cohens_kappa(b, a) == 0.4);
  const std::vector<int> all_yes(10, 1);
  const std::vector<int> half = {1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  CHECK(cohens_kappa(all_yes, half) == 0.0);
  CHECK(cohens_kappa(half, half) == 1.0);
  CHECK(cohens_kappa(all_yes, all_yes) == 1.0);
  const std::vector<int> all_no(10, 0);
  CHECK(cohens_kappa(all_yes, all_no) == 0.0);  // p_e = 0, p_o = 0
  CHECK_THROWS_AS(cohens_kappa(std::vector<int>{}, std::vector<int>{}), UndefinedKappa);
  CHECK_THROWS_AS(cohens_kappa(a, std::vector<int>(9, 1)), DimensionError);
}

TEST_CASE("kappa properties on random ratings") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a(30), b(30);
    for (int i = 0; i < 30; ++i) a[i] = coin(rng), b[i] = coin(rng) ? a[i] : 1 - a[i];
    double k = 0.0;
    try {
      k = cohens_kappa(a, b);
    } catch (const UndefinedKappa&) {
      continue;
    }
    CHECK(k >= -1.0);
    CHECK(k <= 1.0);
    CHECK(k == doctest::Approx(cohens_kappa(b, a)).epsilon(1e-15));
    std::vector<int> fa(a), fb(b);
    for (int& v : fa) v = 1 - v;
    for (int& v : fb) v = 1 - v;
    CHECK(cohens_kappa(fa, fb) == doctest::Approx(k).epsilon(1e-15));
  }
}

TEST_CASE("mean pairwise kappa agrees with a brute-force pairwise computation") {
  std::mt19937_64 rng(17);
  std::bernoulli_distribution truth(0.5), flip(0.15);
  std::vector<int> base(100);
  for (int& v : base) v = truth(rng);
  std::vector<std::vector<int>> raters(5, base);
  for (auto& r : raters) {
    for (int& v : r) v = flip(rng) ? 1 - v : v;
  }
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) sum += kappa_2x2(raters[i], raters[j]), ++pairs;
  }
  CHECK(std::abs(mean_pairwise_kappa(raters) - sum / pairs) <= 1e-12);
}

TEST_CASE("stratified k-fold partitions") {
  std::vector<TissueClass> labels;
  for (int i = 0; i < 1744; ++i) labels.push_back(i % 3 == 0 ? TissueClass::tumor : TissueClass::healthy);
  const auto folds = kfold_split(labels, 5, 3);
  REQUIRE(folds.size() == 5);
  std::vector<int> seen(labels.size(), 0);
  const double tumor_share = std::count(labels.begin(), labels.end(), TissueClass::tumor) / 1744.0;
  for (const Fold& f : folds) {
    CHECK(f.validation.size() >= 348);
    CHECK(f.validation.size() <= 349);
    CHECK(f.train.size() + f.validation.size() == labels.size());
    std::set<std::size_t> train(f.train.begin(), f.train.end());
    std::size_t tumors = 0;
    for (std::size_t i : f.validation) {
      ++seen[i];
      CHECK(train.count(i) == 0);
      tumors += labels[i] == TissueClass::tumor;
    }
    CHECK(std::abs(static_cast<double>(tumors) - tumor_share * f.validation.size()) <= 1.0);
  }
  for (int v : seen) CHECK(v == 1);

  const auto again = kfold_split(labels, 5, 3);
  for (int k = 0; k < 5; ++k) CHECK(again[k].validation == folds[k].validation);
  std::vector<TissueClass> few = {TissueClass::healthy, TissueClass::healthy, TissueClass::healthy,
                                  TissueClass::tumor, TissueClass::healthy};
  CHECK_THROWS_AS(kfold_split(few, 2, 0), StratificationError);
  CHECK_THROWS_AS(kfold_split(few, 1, 0), ParameterError);
}

TEST_CASE("confusion matrix bookkeeping") {
  ConfusionMatrix m;
  m.add(0, 0);
  m.add(0, 1);
  m.add(1, 1);
  m.add(1, 1);
  CHECK(m.total() == 4);
  CHECK(m.row_sum(0) == 2);
  CHECK(m.row_sum(1) == 2);
  CHECK(m.accuracy() == 0.75);
  ConfusionMatrix n;
  n.add(1, 0);
  m.merge(n);
  CHECK(m.total() == 5);
  CHECK(m.counts[1][0] == 1);
  CHECK_THROWS(m.add(2, 0));
}

TEST_CASE("statistics helpers") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
  CHECK(sample_stddev(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) == doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  // ties take average ranks: ranks (1.5,1.5,3) vs (1,2,3)
  CHECK(spearman(std::vector<double>{5, 5, 7}, std::vector<double>{1, 2, 3}) ==
        doctest::Approx(0.8660254037844386));
}

TEST_CASE("mask scores") {
  Grid<std::uint8_t> truth(4, 1), pred(4, 1);
  truth[0] = truth[1] = 1;
  pred[1] = pred[2] = 1;
  MaskScore s;
  s.add(pred, truth);
  CHECK(s.true_positive == 1);
  CHECK(s.false_positive == 1);
  CHECK(s.false_negative == 1);
  CHECK(s.f1() == 0.5);
  CHECK(MaskScore{}.f1() == 1.0);
}

TEST_CASE("tile sets reject duplicates and misalignment") {
  LabeledTileSet s;
  s.add(Image(2, 2, 3), TissueClass::healthy, TileSource::real_he, "a");
  s.add(Image(2, 2, 3), TissueClass::tumor, TileSource::real_he, "b");
  CHECK_NOTHROW(s.validate());
  const std::vector<std::size_t> pick = {1};
  CHECK(s.subset(pick).ids == std::vector<std::string>{"b"});
  s.ids[1] = "a";
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s.ids[1] = "b";
  s.labels.pop_back();
  CHECK_THROWS_AS(s.validate(), ParameterError);
}

TEST_CASE("reader-study summary reproduces the concordance table") {
  const StudyReport r = study_summary(table_fixture(), table_truth());
  const ModalitySummary& he = r.modalities.at(Modality::he);
  const ModalitySummary& vhe = r.modalities.at(Modality::vhe);
  CHECK(he.accuracy == 0.94);
  CHECK(vhe.accuracy == 0.96);
  CHECK(he.mean_confidence == doctest::Approx(4.6));
  CHECK(vhe.mean_confidence == doctest::Approx(4.7));
  CHECK(he.kappa_pairs == 10);
  CHECK(std::lround(he.mean_pairwise_kappa * 100) == 74);
  CHECK(std::lround(vhe.mean_pairwise_kappa * 100) == 81);
  const std::string table = report_table(r);
  CHECK(table.find("94%") != std::string::npos);
  CHECK(table.find("96%") != std::string::npos);
  CHECK(table.find("0.74") != std::string::npos);
  CHECK(table.find("0.81") != std::string::npos);
  CHECK(table.find("4.6") != std::string::npos);
  CHECK(table.find("4.7") != std::string::npos);

  // response order must not matter
  auto shuffled = table_fixture();
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  const StudyReport s = study_summary(shuffled, table_truth());
  CHECK(s.modalities.at(Modality::he).mean_pairwise_kappa == he.mean_pairwise_kappa);
  CHECK(s.modalities.at(Modality::vhe).accuracy == vhe.accuracy);
}

TEST_CASE("reader-study edge cases") {
  auto perfect = table_fixture();
  const auto truth = table_truth();
  for (auto& x : perfect) {
    const bool t = truth.at(x.image_id);
    x.tumor_present = t ? TumorAnswer::yes : TumorAnswer::no;
    x.continue_resection = t;
  }
  const StudyReport p = study_summary(perfect, truth);
  CHECK(p.modalities.at(Modality::he).accuracy == 1.0);
  CHECK(p.modalities.at(Modality::he).mean_pairwise_kappa == 1.0);

  auto with_cannot = perfect;
  with_cannot[0].tumor_present = TumorAnswer::cannot_assess;
  const ModalitySummary c = study_summary(with_cannot, truth).modalities.at(Modality::he);
  CHECK(c.accuracy == 1.0);
  CHECK(c.assessed == 99);
  CHECK(c.cannot_assess_rate == 0.01);

  auto dup = perfect;
  dup.push_back(dup.front());
  CHECK_THROWS_AS(study_summary(dup, truth), ParameterError);
  auto bad = perfect;
  bad[3].confidence = 6;
  CHECK_THROWS_AS(study_summary(bad, truth), RangeError);

  // a rater who skipped one modality is reported, not fatal
  std::vector<RaterResponse> partial;
  for (const auto& x : perfect) {
    if (!(x.rater_id == "R5" && x.modality == Modality::vhe)) partial.push_back(x);
  }
  const StudyReport pr = study_summary(partial, truth);
  CHECK(pr.modalities.at(Modality::vhe).kappa_pairs == 6);
  CHECK_FALSE(pr.warnings.empty());
}

TEST_CASE("simulated raters with 10% flips") {
  std::mt19937_64 rng(23);
  std::bernoulli_distribution flip(0.1);
  std::map<std::string, bool> truth;
  std::vector<RaterResponse> responses;
  for (int i = 0; i < 200; ++i) truth["img" + std::to_string(i)] = i % 2 == 0;
  std::vector<std::vector<int>> ratings(5);
  for (int r = 0; r < 5; ++r) {
    for (const auto& [id, t] : truth) {
      const bool answer = flip(rng) ? !t : t;
      RaterResponse x{"r" + std::to_string(r), id, Modality::he, answer ? TumorAnswer::yes : TumorAnswer::no,
                      answer, 4};
      responses.push_back(x);
      ratings[r].push_back(answer);
    }
  }
  const ModalitySummary s = study_summary(responses, truth).modalities.at(Modality::he);
  CHECK(std::abs(s.accuracy - 0.9) < 3.0 * std::sqrt(0.09 / 1000.0));
  double brute = 0.0;
  int pairs = 0;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) brute += kappa_2x2(ratings[i], ratings[j]), ++pairs;
  }
  CHECK(s.mean_pairwise_kappa == doctest::Approx(brute / pairs).epsilon(1e-12));
  CHECK(s.mean_pairwise_kappa > 0.0);
  CHECK(s.mean_pairwise_kappa < 1.0);
}

TEST_CASE("CSV round trip and report files") {
  const auto dir = scratch_dir("eval_csv");
  const auto responses = table_fixture();
  write_responses_csv(dir / "r.csv", responses);
  const auto back = read_responses_csv(dir / "r.csv");
  REQUIRE(back.size() == responses.size());
  CHECK(back[7].rater_id == responses[7].rater_id);
  CHECK(back[7].confidence == responses[7].confidence);
  CHECK(back[7].continue_resection == responses[7].continue_resection);

  std::ofstream(dir / "bad.csv") << "rater_id,image_id,modality,tumor_present,continue_resection,confidence\n"
                                 << "a,b,film,yes,no,3\n";
  CHECK_THROWS(read_responses_csv(dir / "bad.csv"));
  std::ofstream(dir / "truth.csv") << "image_id,tumor_present\nx,yes\ny,no\n";
  const auto t = read_ground_truth_csv(dir / "truth.csv");
  CHECK(t.at("x"));
  CHECK_FALSE(t.at("y"));
  const std::string csv = report_csv(study_summary(responses, table_truth()));
  CHECK(csv.find("accuracy") != std::string::npos);
}

}
