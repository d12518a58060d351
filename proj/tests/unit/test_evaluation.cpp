#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "eegfest/errors.hpp"
#include "eegfest/evaluation.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eegfest;

namespace {

const SplitPools& small_split() {
  static const SplitPools split =
      split_subjects(fixture::small_pool(), fixture::small_benchmark().split.train, fixture::small_benchmark().split.eval);
  return split;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.k_shot = 1;
  return cfg;
}

}  // namespace

TEST_CASE("pcc worked examples and errors") {
  const std::vector<double> t{1, 2, 3};
  CHECK(pcc(t, t) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pcc(t, std::vector<double>{-1, -2, -3}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pcc(t, std::vector<double>{1, 2, 4}) == doctest::Approx(0.98198).epsilon(1e-5));
  CHECK_THROWS_AS(pcc(t, std::vector<double>{2, 2, 2}), MetricUndefined);
  CHECK_THROWS_AS(pcc(std::vector<double>{1}, std::vector<double>{1}), MetricUndefined);
  CHECK_THROWS(pcc(t, std::vector<double>{1, 2}));
}

TEST_CASE("rmse worked examples and errors") {
  const std::vector<double> t{0.3, 0.5};
  CHECK(rmse(t, t) == 0.0);
  CHECK(rmse(t, std::vector<double>{0.4, 0.6}) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-14));
  CHECK_THROWS(rmse(t, std::vector<double>{1.0}));
}

TEST_CASE("pcc and rmse match brute-force references") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(2, 50);
  std::uniform_real_distribution<double> a(0.1, 5.0), b(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = len(rng);
    const auto x = oracle::random_vector(rng, n), y = oracle::random_vector(rng, n);
    CHECK(std::abs(pcc(x, y) - static_cast<double>(oracle::pearson(x, y))) < 1e-9);
    CHECK(std::abs(rmse(x, y) - oracle::root_mean_square_error(x, y)) < 1e-9);
    std::vector<double> z = y;
    const double sa = a(rng), sb = b(rng);
    for (auto& v : z) v = sa * v + sb;
    CHECK(std::abs(pcc(x, z) - pcc(x, y)) < 1e-9);
  }
}

TEST_CASE("f1 worked examples") {
  CHECK(*f1_score(8, 2, 2) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(*f1_score(5, 0, 0) == 1.0);
  CHECK(*f1_score(0, 3, 1) == 0.0);
  CHECK_FALSE(f1_score(0, 0, 0));
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> c(0, 40);
  for (int t = 0; t < 200; ++t) {
    const std::size_t tp = c(rng), fp = c(rng), fn = c(rng);
    if (tp + fp + fn == 0) continue;
    CHECK(std::abs(*f1_score(tp, fp, fn) - oracle::f1_harmonic(tp, fp, fn)) < 1e-9);
  }
}

TEST_CASE("confusion matrix bookkeeping") {
  ConfusionMatrix m;
  for (int i = 0; i < 8; ++i) m.add(ClassLabel::Drowsy, ClassLabel::Drowsy);
  m.add(ClassLabel::Drowsy, ClassLabel::NonDrowsy);
  m.add(ClassLabel::Drowsy, ClassLabel::NonDriving);
  m.add(ClassLabel::NonDrowsy, ClassLabel::Drowsy);
  m.add(ClassLabel::NonDriving, ClassLabel::Drowsy);
  m.add(ClassLabel::NonDrowsy, ClassLabel::NonDrowsy);
  CHECK(m.tp(ClassLabel::Drowsy) == 8);
  CHECK(m.fp(ClassLabel::Drowsy) == 2);
  CHECK(m.fn(ClassLabel::Drowsy) == 2);
  CHECK(*m.f1(ClassLabel::Drowsy) == doctest::Approx(0.8));
  CHECK(m.support(ClassLabel::Drowsy) == 10);
  CHECK(m.total() == 13);
  CHECK(*m.accuracy(ClassLabel::Drowsy) == doctest::Approx(0.8));
  CHECK(*m.accuracy(ClassLabel::NonDriving) == 0.0);
  const double nd_f1 = *m.f1(ClassLabel::NonDrowsy), nv_f1 = *m.f1(ClassLabel::NonDriving);
  CHECK(*m.macro_f1() == doctest::Approx((0.8 + nd_f1 + nv_f1) / 3.0));

  ConfusionMatrix two;
  two.add(ClassLabel::Drowsy, ClassLabel::Drowsy);
  two.add(ClassLabel::NonDrowsy, ClassLabel::NonDrowsy);
  CHECK_FALSE(two.accuracy(ClassLabel::NonDriving));
  CHECK_FALSE(two.f1(ClassLabel::NonDriving));
  CHECK(*two.macro_f1() == 1.0);
  CHECK_FALSE(ConfusionMatrix{}.macro_f1());
}

TEST_CASE("subject split is disjoint and exhaustive") {
  const auto& pool = fixture::small_pool();
  const auto& bench = fixture::small_benchmark();
  const auto& split = small_split();
  CHECK(split.train.size() + split.eval.size() == pool.size());
  std::set<std::uint32_t> eval(bench.split.eval.begin(), bench.split.eval.end());
  for (const auto& s : split.train) CHECK(eval.count(s.subject) == 0);
  for (const auto& s : split.eval) CHECK(eval.count(s.subject) == 1);

  const std::vector<std::uint32_t> a{0, 1}, b{1, 2}, none{};
  CHECK_THROWS_AS(split_subjects(pool, a, b), ConfigError);
  CHECK_THROWS_AS(split_subjects(pool, a, none), ConfigError);
}

TEST_CASE("support sampling nests across K and leaves queries disjoint") {
  const auto& eval = small_split().eval;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SupportPlan plan = sample_support(eval, seed);
    CHECK(plan.driving.size() == 2);
    CHECK(plan.non_driving.size() == 2);
    std::set<std::size_t> support20;
    for (const auto& [subject, classes] : plan.driving) {
      for (auto label : {ClassLabel::NonDrowsy, ClassLabel::Drowsy}) {
        std::vector<std::size_t> prev;
        for (auto k : kShotLevels) {
          auto s = plan.support(subject, label, k);
          CHECK(s.size() == k);
          for (auto i : s) {
            CHECK(eval[i].subject == subject);
            CHECK(*eval[i].label == label);
          }
          for (auto i : prev) CHECK(std::find(s.begin(), s.end(), i) != s.end());
          prev = s;
        }
        support20.insert(prev.begin(), prev.end());
      }
    }
    CHECK(support20.size() == 2 * 2 * kMaxShot);
    for (const auto& [subject, idx] : plan.non_driving) support20.insert(idx.begin(), idx.end());
    for (auto q : plan.queries) CHECK(support20.count(q) == 0);
    CHECK(plan.queries.size() + support20.size() == eval.size());
  }
  CHECK(sample_support(eval, 3).queries == sample_support(eval, 3).queries);
  CHECK(sample_support(eval, 3).driving != sample_support(eval, 4).driving);
  CHECK_THROWS_AS(sample_support(eval, 0, 1000), DataError);
}

TEST_CASE("k-fold sessions") {
  const auto f = kfold_sessions(885, 5);
  for (std::size_t k = 0; k < 5; ++k) CHECK(std::count(f.begin(), f.end(), k) == 177);
  CHECK(std::is_sorted(f.begin(), f.end()));
  const auto g = kfold_sessions(10, 2);
  CHECK(std::count(g.begin(), g.end(), 0u) == 5);
  const auto h = kfold_sessions(7, 3);
  CHECK(h == std::vector<std::size_t>{0, 0, 0, 1, 1, 2, 2});
  CHECK_THROWS_AS(kfold_sessions(3, 5), DataError);
  CHECK_THROWS_AS(kfold_sessions(10, 1), ConfigError);
}

TEST_CASE("mean and population std") {
  const auto m = mean_std(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(m.mean == 5.0);
  CHECK(m.std == 2.0);
  CHECK(mean_std(std::vector<double>{0.3, 0.3, 0.3}).std == 0.0);
}

TEST_CASE("run_trials report shape and determinism") {
  const auto& eval = small_split().eval;
  const ModelConfig cfg = small_model();
  const ModelParams params = ModelParams::init(4, cfg);
  const EvalReport a = run_trials(eval, cfg, params, 5, 5, 11);
  const EvalReport b = run_trials(eval, cfg, params, 5, 5, 11);
  CHECK(a.k_shot == 5);
  REQUIRE(a.trials.size() == 5);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(a.trials[t].accuracy == b.trials[t].accuracy);
    CHECK(a.trials[t].confusion.total() == sample_support(eval, 11 + 1000 * t).queries.size());
    for (double acc : a.trials[t].accuracy) {
      CHECK(acc >= 0.0);
      CHECK(acc <= 1.0);
    }
  }
  CHECK(a.macro_f1.mean >= 0.0);
  CHECK(a.macro_f1.mean <= 1.0);
  CHECK(a.config_echo.find("k_shot=5") != std::string::npos);
  CHECK_THROWS_AS(run_trials(eval, cfg, params, 21), ConfigError);

  // All-driving verdict with zero determination weights: identical support
  // rankings across trials give zero spread.
  ModelParams fixed = ModelParams::init(4, cfg);
  fixed.det_w.mutable_value().fill(0.0);
  fixed.det_b.mutable_value() = Tensor::row({0.0, 1.0});
  const EvalReport z = run_trials(eval, cfg, fixed, 20, 3, 0);
  CHECK(z.accuracy[2].mean == 0.0);
  CHECK(z.accuracy[2].std == 0.0);

  std::ostringstream csv, table;
  const std::vector<EvalReport> reports{a};
  write_report_csv(csv, reports);
  write_report_table(table, reports);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 5 + 2);
  CHECK(table.str().find("5-shot") != std::string::npos);
}

TEST_CASE("ablation suite table layout") {
  const auto& eval = small_split().eval;
  ModelConfig base = small_model();
  std::size_t built = 0;
  const ModelFactory factory = [&](const ModelConfig& cfg) {
    ++built;
    return ModelParams::init(4, cfg);
  };
  const std::vector<std::size_t> shots{1, 5, 10, 20};
  const AblationResult r = ablation_suite(eval, base, factory, shots, 2, 0);
  CHECK(built == 6);
  CHECK(r.metric_non_drowsy.columns.size() == 4);
  CHECK(r.metric_drowsy.k_rows == shots);
  CHECK(r.determination.columns == std::vector<std::string>{"with", "without"});
  CHECK(r.similarity.columns.size() == 4);
  for (const auto* t : {&r.metric_non_drowsy, &r.metric_drowsy, &r.determination, &r.similarity}) {
    REQUIRE(t->values.size() == 4);
    for (const auto& row : t->values) {
      CHECK(row.size() == t->columns.size());
      for (double v : row) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  std::ostringstream csv, text;
  write_table_csv(csv, r.determination);
  write_table_text(text, r.determination);
  CHECK(csv.str().rfind("k_shot,with,without", 0) == 0);
  CHECK(text.str().find("20") != std::string::npos);
}
