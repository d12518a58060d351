// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: eegfest_acceptance [criterion ...]   (default: all of 1..10)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eegfest/dataset.hpp"
#include "eegfest/evaluation.hpp"
#include "eegfest/io.hpp"
#include "eegfest/model.hpp"
#include "eegfest/signal.hpp"
#include "eegfest/training.hpp"
#include "oracles.hpp"

using namespace eegfest;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances -------------------------------------------------------

namespace tol {
constexpr double kGradRelative = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr std::size_t kGradSeeds = 10;
constexpr double kSoftmaxSum = 1e-6;
constexpr double kNormMean = 1e-6;
constexpr double kNormVariance = 1e-4;
constexpr std::size_t kNormCases = 10000;
constexpr double kDeNats = 0.05;
constexpr double kDeScaling = 1e-6;
constexpr double kMetricAbs = 1e-9;
constexpr std::size_t kMetricCases = 1000;
constexpr double kWorkedDecimals = 0.5e-5;
constexpr double kOverfitAccuracy = 0.95;
constexpr std::size_t kOverfitSteps = 500;
constexpr double kOverfitSeconds = 300.0;
constexpr double kCrossSubjectF1 = 0.90;
constexpr double kTrendInversion = 0.01;
constexpr double kAblationMargin = 0.02;
constexpr double kVigilancePcc = 0.9;
constexpr double kVigilanceRmse = 0.1;
constexpr std::size_t kProtocolSeeds = 100;
constexpr std::size_t kTrials = 5;
constexpr std::size_t kEpisodicEpochs = 15;
constexpr std::size_t kVigilanceEpochs = 50;
}  // namespace tol

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// ---- shared trained models for criteria 6, 7 and 10 -------------------------

struct Trained {
  ModelConfig cfg;
  ModelParams params;
};

struct CrossSubject {
  SyntheticBenchmark bench;
  SplitPools split;
  std::map<std::pair<bool, bool>, Trained> models;  // (similarity, determination)
};

CrossSubject& cross_subject() {
  static std::optional<CrossSubject> data;
  if (!data) {
    data.emplace();
    data->bench = make_benchmark(BenchmarkSpec{});
    const SamplePool pool = featurize(data->bench.epochs);
    data->split = split_subjects(pool, data->bench.split.train, data->bench.split.eval);
  }
  return *data;
}

const Trained& trained_model(bool similarity, bool determination) {
  auto& cs = cross_subject();
  const auto key = std::make_pair(similarity, determination);
  auto it = cs.models.find(key);
  if (it == cs.models.end()) {
    ModelConfig cfg;
    cfg.use_similarity_block = similarity;
    cfg.use_determination_block = determination;
    ModelParams params = ModelParams::init(cs.split.train.front().de.channels, cfg);
    TrainConfig tc;
    tc.epochs_total = tol::kEpisodicEpochs;
    tc.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    train_episodic(cs.split.train, cfg, tc, params);
    std::cout << "  trained similarity=" << similarity << " determination=" << determination << " in "
              << fmt(seconds_since(t0), 3) << " s\n";
    it = cs.models.emplace(key, Trained{cfg, std::move(params)}).first;
  }
  return it->second;
}

// ---- 1 ----------------------------------------------------------------------

// Derivative of f along direction u for a leaf parameter.
double directional_difference(Var param, const std::vector<double>& u, const std::function<double()>& f, double h) {
  Tensor& x = param.mutable_value();
  const Tensor saved = x;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = saved[i] + h * u[i];
  const double up = f();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = saved[i] - h * u[i];
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

double rel_err(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

Outcome criterion_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  for (std::size_t seed = 0; seed < tol::kGradSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    ModelConfig cfg;
    cfg.k_shot = 1;
    cfg.seed = seed;
    const std::size_t channels = 3;
    const ModelParams params = ModelParams::init(channels, cfg);
    Episode ep;
    auto de = [&] {
      DeFeature d;
      d.channels = channels;
      d.values = oracle::random_vector(rng, kBandCount * channels, -2.0, 2.0);
      return d;
    };
    ep.query = de();
    ep.support = {{de()}, {de()}};
    ep.support_labels = {ClassLabel::NonDrowsy, ClassLabel::Drowsy};
    ep.query_truth = seed % 2 ? ClassLabel::Drowsy : ClassLabel::NonDrowsy;
    ep.driving_truth = true;
    const TrainConfig tc;
    const auto loss = [&] { return episode_loss(ep, cfg, tc, params).total.item(); };

    params.zero_grad();
    backward(episode_loss(ep, cfg, tc, params).total);
    for (const auto& named : params.named()) {
      Var p = named.var;
      const Tensor grad = p.has_grad() ? p.grad() : Tensor(p.shape(), 0.0);
      double gmax = 0.0;
      std::size_t argmax = 0;
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (std::abs(grad[i]) > gmax) gmax = std::abs(grad[i]), argmax = i;
      // Entries: the largest-gradient one plus three random ones, judged
      // against the tensor's gradient scale.
      std::vector<std::size_t> entries{argmax};
      std::uniform_int_distribution<std::size_t> pick(0, grad.size() - 1);
      for (int j = 0; j < 3; ++j) entries.push_back(pick(rng));
      const double floor = std::max(1e-3 * gmax, 1e-10);
      auto check = [&](double analytic, const std::function<double(double)>& numeric) {
        double e = rel_err(analytic, numeric(1e-6), floor);
        // A ReLU kink inside the stencil: retry with a narrower one.
        if (e >= tol::kGradRelative) e = std::min(e, rel_err(analytic, numeric(1e-7), floor));
        ++checks;
        if (e > worst) worst = e, worst_name = named.name;
      };
      for (auto i : entries)
        check(grad[i], [&](double h) { return oracle::central_difference(p, i, loss, h); });
      std::vector<double> u = oracle::random_vector(rng, grad.size());
      double norm = 0.0;
      for (double v : u) norm += v * v;
      norm = std::sqrt(norm);
      double analytic = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) analytic += grad[i] * (u[i] /= norm);
      check(analytic, [&](double h) { return directional_difference(p, u, loss, h); });
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst < tol::kGradRelative && elapsed < tol::kGradSeconds;
  o.detail = "max relative error " + fmt(worst, 3) + " (" + worst_name + ") over " + std::to_string(checks) +
             " checks, " + std::to_string(tol::kGradSeeds) + " seeds, " + fmt(elapsed, 3) + " s";
  return o;
}

// ---- 2 ----------------------------------------------------------------------

Outcome criterion_normalization() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> dim(2, 40);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  double worst_sum = 0.0, worst_mean = 0.0, worst_var = 0.0;
  auto inspect_softmax = [&](const Tensor& p) {
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) s += p(r, c);
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  };
  // Expected output variance is v / (v + eps) for input variance v.
  auto input_variance = [](const Tensor& x) {
    double m = 0.0, v = 0.0;
    for (double a : x.values()) m += a;
    m /= static_cast<double>(x.size());
    for (double a : x.values()) v += (a - m) * (a - m);
    return v / static_cast<double>(x.size());
  };
  auto inspect_norm = [&](const Tensor& y, double expected) {
    double m = 0.0, v = 0.0;
    for (double x : y.values()) m += x;
    m /= static_cast<double>(y.size());
    for (double x : y.values()) v += (x - m) * (x - m);
    v /= static_cast<double>(y.size());
    worst_mean = std::max(worst_mean, std::abs(m));
    worst_var = std::max(worst_var, std::abs(v - expected));
  };
  for (std::size_t i = 0; i < tol::kNormCases; ++i) {
    const double scale = std::pow(10.0, log_scale(rng));
    Tensor x = oracle::random_tensor(rng, dim(rng), dim(rng), scale);
    std::normal_distribution<double> shift(0.0, 10.0);
    const double offset = shift(rng);
    for (auto& v : x.values()) v += offset;
    inspect_softmax(softmax_rows(constant(x)).value());
    const double vin = input_variance(x);
    inspect_norm(layer_norm(constant(x)).value(), vin / (vin + 1e-5));
  }
  // Every attention map and normalization site inside the feature block.
  ModelConfig cfg;
  const FeatureBlockParams fb = [&] {
    std::mt19937_64 r(3);
    return FeatureBlockParams::init(17, cfg.attention, r);
  }();
  for (int i = 0; i < 200; ++i) {
    AttentionTrace trace;
    feature_extraction_block(constant(oracle::random_tensor(rng, 5, 17, 3.0)), fb, cfg.attention, &trace);
    for (const auto& p : trace.probabilities) inspect_softmax(p);
    for (const auto& n : trace.normalized) inspect_norm(n, 1.0);
  }
  Outcome o;
  o.pass = worst_sum <= tol::kSoftmaxSum && worst_mean < tol::kNormMean && worst_var <= tol::kNormVariance;
  o.detail = "softmax |sum-1| " + fmt(worst_sum, 3) + ", layer-norm |mean| " + fmt(worst_mean, 3) + ", |var - expected| " +
             fmt(worst_var, 3) + " over " + std::to_string(tol::kNormCases) + " random cases + 200 traced blocks";
  return o;
}

// ---- 3 ----------------------------------------------------------------------

Outcome criterion_de() {
  std::mt19937_64 rng(4);
  double worst_iid = 0.0, worst_band = 0.0, worst_scale = 0.0;
  // Direct Gaussian samples, averaged over draws.
  for (double sigma : {0.5, 1.0, 2.0, 5.0}) {
    for (std::size_t t : {1600u, 3200u}) {
      std::normal_distribution<double> n(0.0, sigma);
      double mean = 0.0;
      const int draws = 50;
      for (int d = 0; d < draws; ++d) {
        std::vector<double> x(t);
        for (auto& v : x) v = n(rng);
        mean += differential_entropy(x) / draws;
      }
      worst_iid = std::max(worst_iid, std::abs(mean - oracle::gaussian_entropy(sigma * sigma)));
    }
  }
  // Band-limited synthetic noise through the full DE pipeline.
  for (std::size_t t : {1600u, 3200u}) {
    SynthRequest r;
    r.profile = {0.8, 1.5, 2.0, 0.6, 0.3};
    r.channels = 8;
    r.samples_per_channel = t;
    std::array<double, kBandCount> bias{};
    const int epochs = 30;
    for (int e = 0; e < epochs; ++e) {
      r.subject_seed = 1000 + e;
      r.epoch_seed = 2000 + e;
      const auto gains = subject_channel_gains(r.subject_seed, r.channels);
      const DeFeature de = de_features(synthesize_epoch(r));
      for (std::size_t b = 0; b < kBandCount; ++b)
        for (std::size_t c = 0; c < r.channels; ++c) {
          const double sigma = gains[c] * r.profile[b];
          bias[b] += (de.at(b, c) - oracle::gaussian_entropy(sigma * sigma)) / (epochs * r.channels);
        }
    }
    for (double b : bias) worst_band = std::max(worst_band, std::abs(b));
  }
  // Scaling property on raw epochs.
  std::uniform_real_distribution<double> a_dist(0.1, 10.0);
  for (int e = 0; e < 20; ++e) {
    SynthRequest r;
    r.profile = {1.0, 1.0, 1.0, 1.0, 1.0};
    r.channels = 4;
    r.subject_seed = 77 + e;
    r.epoch_seed = 99 + e;
    const EegEpoch x = synthesize_epoch(r);
    // Powers of two keep the f32 samples exact under scaling.
    const double a = std::ldexp(1.0, static_cast<int>(std::lround(std::log2(a_dist(rng)))));
    EegEpoch y = x;
    for (auto& v : y.samples) v = static_cast<float>(a * v);
    const DeFeature dx = de_features(x), dy = de_features(y);
    for (std::size_t i = 0; i < dx.values.size(); ++i)
      worst_scale = std::max(worst_scale, std::abs(dy.values[i] - dx.values[i] - std::log(a)));
    // Non-dyadic factor with the scaled signal held in double.
    const BandSignals bands = band_decompose(x);
    const double b = a_dist(rng);
    for (std::size_t band = 0; band < kBandCount; ++band)
      for (const auto& sig : bands[band]) {
        std::vector<double> scaled(sig);
        for (auto& v : scaled) v *= b;
        worst_scale = std::max(worst_scale,
                               std::abs(differential_entropy(scaled) - differential_entropy(sig) - std::log(b)));
      }
  }
  Outcome o;
  o.pass = worst_iid <= tol::kDeNats && worst_band <= tol::kDeNats && worst_scale <= tol::kDeScaling;
  o.detail = "Gaussian DE error " + fmt(worst_iid, 3) + " nats, per-band synthetic bias " + fmt(worst_band, 3) +
             " nats, scaling error " + fmt(worst_scale, 3);
  return o;
}

// ---- 4 ----------------------------------------------------------------------

Outcome criterion_metrics() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  std::uniform_int_distribution<std::size_t> count(0, 500);
  double worst = 0.0;
  for (std::size_t i = 0; i < tol::kMetricCases; ++i) {
    const std::size_t n = len(rng);
    const auto x = oracle::random_vector(rng, n, -5.0, 5.0);
    const auto y = oracle::random_vector(rng, n, -5.0, 5.0);
    worst = std::max(worst, std::abs(pcc(x, y) - oracle::pearson(x, y)));
    worst = std::max(worst, std::abs(rmse(x, y) - oracle::root_mean_square_error(x, y)));
    const std::size_t tp = count(rng), fp = count(rng), fn = count(rng) + 1;
    worst = std::max(worst, std::abs(*f1_score(tp, fp, fn) - oracle::f1_harmonic(tp, fp, fn)));
  }
  const double f1 = *f1_score(8, 2, 2);
  const double idx = drowsiness_index(2.0);
  const bool worked = std::abs(f1 - 0.8) < tol::kWorkedDecimals && std::abs(idx - 0.46212) < tol::kWorkedDecimals;
  Outcome o;
  o.pass = worst <= tol::kMetricAbs && worked;
  o.detail = "max deviation from references " + fmt(worst, 3) + " over " + std::to_string(tol::kMetricCases) +
             " cases; F1(8,2,2) = " + fmt(f1, 6) + ", index(2 s) = " + fmt(idx, 6);
  return o;
}

// ---- 5 ----------------------------------------------------------------------

Outcome criterion_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  BenchmarkSpec spec;
  spec.train_driving_subjects = 6;
  spec.train_non_driving_subjects = 3;
  spec.eval_driving_subjects = 0;
  spec.eval_non_driving_subjects = 0;
  spec.drowsy = {1.0, 1.0, 2.0, 1.0, 0.5};  // alpha σ doubled
  const SamplePool pool = featurize(make_benchmark(spec).epochs);
  ModelConfig cfg;
  cfg.k_shot = 5;
  TrainConfig tc;
  tc.epochs_total = 1000;
  tc.max_steps = tol::kOverfitSteps;
  ModelParams params = ModelParams::init(spec.channels, cfg);
  std::vector<double> acc;
  std::optional<std::size_t> reached;
  train_episodic(pool, cfg, tc, params, [&](const LossRow& row) {
    acc.push_back(row.accuracy);
    if (acc.size() >= 10 && !reached) {
      const double window = std::accumulate(acc.end() - 10, acc.end(), 0.0) / 10.0;
      if (window >= tol::kOverfitAccuracy) reached = row.step;
    }
  });
  const double elapsed = seconds_since(t0);
  const double final_window = std::accumulate(acc.end() - 10, acc.end(), 0.0) / 10.0;
  Outcome o;
  o.pass = reached.has_value() && elapsed <= tol::kOverfitSeconds;
  o.detail = (reached ? "10-step mean episode accuracy >= 0.95 at step " + std::to_string(*reached)
                      : std::string("accuracy target not reached")) +
             ", final 10-step mean " + fmt(final_window, 3) + ", " + fmt(elapsed, 3) + " s";
  return o;
}

// ---- 6 ----------------------------------------------------------------------

Outcome criterion_cross_subject() {
  const Trained& m = trained_model(true, true);
  const auto& eval = cross_subject().split.eval;
  std::vector<double> f1;
  std::string row;
  for (auto k : kShotLevels) {
    const EvalReport r = run_trials(eval, m.cfg, m.params, k, tol::kTrials, 0);
    f1.push_back(r.macro_f1.mean);
    row += " K=" + std::to_string(k) + ":" + fmt(r.macro_f1.mean, 4) + "±" + fmt(r.macro_f1.std, 2);
  }
  std::size_t inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < f1.size(); ++i) {
    if (f1[i] < f1[i - 1]) {
      ++inversions;
      small = small && f1[i - 1] - f1[i] <= tol::kTrendInversion;
    }
  }
  Outcome o;
  o.pass = f1.back() >= tol::kCrossSubjectF1 && inversions <= 1 && small;
  o.detail = "macro F1" + row + "; inversions " + std::to_string(inversions);
  return o;
}

// ---- 7 ----------------------------------------------------------------------

Outcome criterion_ablation() {
  const auto& eval = cross_subject().split.eval;
  const Trained& full = trained_model(true, true);
  const Trained& no_det = trained_model(true, false);
  const Trained& no_sim = trained_model(false, true);
  auto mean_acc = [&](const Trained& m, std::size_t cls) {
    double s = 0.0;
    for (auto k : kShotLevels) s += run_trials(eval, m.cfg, m.params, k, tol::kTrials, 0).accuracy[cls].mean;
    return s / static_cast<double>(kShotLevels.size());
  };
  const double det_with = mean_acc(full, 2), det_without = mean_acc(no_det, 2);
  const double nd_with = mean_acc(full, 0), nd_without = mean_acc(no_sim, 0);
  const double dr_with = mean_acc(full, 1), dr_without = mean_acc(no_sim, 1);
  const double d_det = det_with - det_without, d_nd = nd_with - nd_without, d_dr = dr_with - dr_without;
  Outcome o;
  o.pass = d_det >= tol::kAblationMargin && d_nd >= tol::kAblationMargin && d_dr >= tol::kAblationMargin;
  o.detail = "determination: non-driving " + fmt(det_with) + " vs " + fmt(det_without) + " (Δ " + fmt(d_det, 3) +
             "); similarity: non-drowsy " + fmt(nd_with) + " vs " + fmt(nd_without) + " (Δ " + fmt(d_nd, 3) +
             "), drowsy " + fmt(dr_with) + " vs " + fmt(dr_without) + " (Δ " + fmt(d_dr, 3) +
             "); means over K and 5 trials, margin " + fmt(tol::kAblationMargin);
  return o;
}

// ---- 8 ----------------------------------------------------------------------

Outcome criterion_vigilance() {
  const auto subjects = make_vigilance_subjects(VigilanceSpec{});
  TrainConfig tc;
  tc.epochs_total = tol::kVigilanceEpochs;
  bool pass = true;
  std::string detail;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const SamplePool pool = featurize(subjects[s]);
    ModelConfig cfg;
    cfg.seed = s;
    const VigilanceResult r = train_vigilance_regressor(pool, cfg, tc, 5);
    pass = pass && r.pcc >= tol::kVigilancePcc && r.rmse <= tol::kVigilanceRmse;
    detail += (s ? "; " : "") + std::string("subject ") + std::to_string(s) + " PCC " + fmt(r.pcc, 3) + " RMSE " +
              fmt(r.rmse, 3);
  }
  return {pass, detail};
}

// ---- 9 ----------------------------------------------------------------------

Outcome criterion_protocol() {
  BenchmarkSpec spec;
  spec.channels = 4;
  spec.samples_per_channel = 400;
  spec.train_driving_subjects = 4;
  spec.train_non_driving_subjects = 2;
  spec.eval_driving_subjects = 3;
  spec.eval_non_driving_subjects = 2;
  spec.epochs_per_class = 26;
  spec.non_driving_epochs = 24;
  const SyntheticBenchmark bench = make_benchmark(spec);
  const SamplePool pool = featurize(bench.epochs);
  std::vector<std::uint32_t> subjects;
  for (const auto& [s, _] : by_subject(pool)) subjects.push_back(s);

  std::size_t failures = 0;
  std::string first;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first = what;
  };
  for (std::uint64_t seed = 0; seed < tol::kProtocolSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    // Subject disjointness over a random partition.
    std::vector<std::uint32_t> order = subjects;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<std::size_t> cut(1, order.size() - 1);
    const std::size_t c = cut(rng);
    const std::vector<std::uint32_t> tr(order.begin(), order.begin() + c), ev(order.begin() + c, order.end());
    const SplitPools split = split_subjects(pool, tr, ev);
    const std::set<std::uint32_t> ev_set(ev.begin(), ev.end());
    for (const auto& s : split.train)
      if (ev_set.count(s.subject)) fail("eval subject in training pool");
    if (split.train.size() + split.eval.size() != pool.size()) fail("split lost samples");

    // Support nesting and query disjointness on the fixed evaluation pool.
    const SplitPools fixed = split_subjects(pool, bench.split.train, bench.split.eval);
    const SupportPlan plan = sample_support(fixed.eval, seed);
    std::set<std::size_t> reserved;
    for (const auto& [subject, classes] : plan.driving)
      for (auto label : {ClassLabel::NonDrowsy, ClassLabel::Drowsy}) {
        std::vector<std::size_t> prev;
        for (auto k : kShotLevels) {
          auto cur = plan.support(subject, label, k);
          if (cur.size() != k) fail("support size");
          for (auto i : prev)
            if (std::find(cur.begin(), cur.end(), i) == cur.end()) fail("support nesting");
          for (auto i : cur)
            if (fixed.eval[i].subject != subject || *fixed.eval[i].label != label) fail("support membership");
          prev = std::move(cur);
        }
        if (prev.size() != kMaxShot) fail("support(20) size");
        reserved.insert(prev.begin(), prev.end());
      }
    for (const auto& [subject, idx] : plan.non_driving) reserved.insert(idx.begin(), idx.end());
    for (auto q : plan.queries)
      if (reserved.count(q)) fail("query in support");
    if (plan.queries.size() + reserved.size() != fixed.eval.size()) fail("queries do not cover the rest");

    // Report shape.
    if (seed % 10 == 0) {
      ModelConfig cfg;
      cfg.seed = seed;
      const ModelParams params = ModelParams::init(spec.channels, cfg);
      const std::size_t k = kShotLevels[seed / 10 % kShotLevels.size()];
      const EvalReport r = run_trials(fixed.eval, cfg, params, k, tol::kTrials, seed);
      if (r.trials.size() != tol::kTrials || r.k_shot != k) fail("report shape");
      std::ostringstream csv;
      const std::vector<EvalReport> one{r};
      write_report_csv(csv, one);
      const std::string text = csv.str();
      if (static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) != 1 + tol::kTrials + 2)
        fail("report CSV rows");
    }

    // Fold partition exactness.
    std::uniform_int_distribution<std::size_t> kd(2, 10), nd(10, 2000);
    const std::size_t k = kd(rng), n = nd(rng);
    const auto folds = kfold_sessions(n, k);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (folds[i] >= k) fail("fold id");
      else ++sizes[folds[i]];
      if (i && folds[i] < folds[i - 1]) fail("folds not contiguous");
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    if (*hi - *lo > 1 || *lo == 0 || std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != n)
      fail("fold sizes");
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = std::to_string(tol::kProtocolSeeds) + " seeds: support nesting, subject disjointness, " +
             std::to_string(tol::kTrials) + "-trial report shape, fold partition; " + std::to_string(failures) +
             " violations" + (failures ? " (first: " + first + ")" : "");
  return o;
}

// ---- 10 ---------------------------------------------------------------------

Outcome criterion_roundtrip() {
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("eegfest_acceptance_" + std::to_string(rd()));
  fs::create_directories(dir);
  std::size_t failures = 0;
  std::string first;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first = what;
  };
  std::mt19937_64 rng(10);

  // Checkpoints: random and trained-shape parameter sets.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelConfig cfg;
    cfg.seed = seed;
    const ModelParams params = ModelParams::init(1 + seed % 17, cfg);
    const Checkpoint ckpt = capture(params.named(), model_echo(cfg) + "step=" + std::to_string(seed) + "\n");
    const fs::path p = dir / "m.eegf", q = dir / "m2.eegf";
    save_checkpoint(p, ckpt);
    const Checkpoint back = load_checkpoint(p);
    if (!(back == ckpt)) fail("checkpoint tensors differ after load");
    save_checkpoint(q, back);
    if (read_file(p) != read_file(q)) fail("checkpoint re-save not byte-identical");
    ModelParams other = ModelParams::init(1 + seed % 17, ModelConfig{.seed = seed + 100});
    restore(back, other.named());
    if (!(capture(other.named(), ckpt.config_echo) == ckpt)) fail("restore then capture differs");
    if (model_from_echo(back.config_echo).seed != seed) fail("config echo");
  }

  // Epoch files.
  std::uniform_int_distribution<std::size_t> ch(1, 32), len(2, 800);
  std::uniform_real_distribution<double> rate(100.0, 1000.0), unit(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    EegEpoch e;
    e.channels = ch(rng);
    e.samples_per_channel = len(rng);
    e.sample_rate = static_cast<float>(rate(rng));
    e.subject_id = static_cast<std::uint32_t>(rng());
    if (i % 4) e.class_label = static_cast<ClassLabel>(i % 3);
    if (i % 3) e.vigilance = static_cast<float>(unit(rng));
    std::normal_distribution<float> n(0.0f, 10.0f);
    e.samples.resize(e.channels * e.samples_per_channel);
    for (auto& v : e.samples) v = n(rng);
    const fs::path p = dir / "e.eege";
    write_epoch(p, e);
    const EegEpoch back = read_epoch(p);
    const bool same = back.channels == e.channels && back.samples_per_channel == e.samples_per_channel &&
                      back.sample_rate == e.sample_rate && back.subject_id == e.subject_id &&
                      back.class_label == e.class_label && back.vigilance == e.vigilance &&
                      back.samples.size() == e.samples.size() &&
                      std::memcmp(back.samples.data(), e.samples.data(), e.samples.size() * sizeof(float)) == 0;
    if (!same) fail("epoch file round-trip");
    if (read_file(p) != encode_epoch(back)) fail("epoch re-encode not byte-identical");
  }

  // Config documents.
  for (int i = 0; i < 100; ++i) {
    RunConfig cfg;
    cfg.seed = rng() % 100000;
    cfg.apply_seed();
    cfg.model.k_shot = 1 + rng() % 20;
    cfg.model.metric = kAllMetrics[rng() % 4];
    cfg.model.use_similarity_block = rng() % 2;
    cfg.model.use_determination_block = rng() % 2;
    cfg.model.attention.pe_base = 10.0 + unit(rng) * 1e4;
    cfg.train.lr_start = unit(rng) * 1e-4;
    cfg.train.lr_end = cfg.train.lr_start + unit(rng) * 1e-3;
    cfg.train.epochs_total = rng() % 100;
    cfg.bench.drowsy[2] = unit(rng) * 5.0;
    cfg.bench.epoch_band_jitter = unit(rng);
    cfg.eval_shots = {1 + rng() % 20};
    cfg.out_dir = "out/" + std::to_string(i);
    const std::string text = emit_config(cfg);
    const RunConfig back = parse_config(text);
    if (!(back == cfg) || emit_config(back) != text) fail("config parse/emit");
    if (back.train.lr_end != cfg.train.lr_end || back.model.attention.pe_base != cfg.model.attention.pe_base ||
        back.bench.drowsy != cfg.bench.drowsy || back.model.metric != cfg.model.metric ||
        back.train.seed != cfg.train.seed)
      fail("config field values");
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  Outcome o;
  o.pass = failures == 0;
  o.detail = "20 checkpoints, 100 epoch files, 100 configs; " + std::to_string(failures) + " mismatches" +
             (failures ? " (first: " + first + ")" : "");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", criterion_gradient},
      {"normalization invariants", criterion_normalization},
      {"differential entropy oracle", criterion_de},
      {"metric oracles", criterion_metrics},
      {"overfit check", criterion_overfit},
      {"cross-subject few-shot", criterion_cross_subject},
      {"ablation directionality", criterion_ablation},
      {"vigilance regression", criterion_vigilance},
      {"protocol invariants", criterion_protocol},
      {"round-trips", criterion_roundtrip},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "'\n";
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(n));
  }
  if (selected.empty())
    for (std::size_t i = 1; i <= criteria.size(); ++i) selected.push_back(i);

  std::size_t failed = 0;
  for (auto n : selected) {
    const auto& [name, run] = criteria[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << name << "): " << o.detail << " ["
              << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  std::cout << (selected.size() - failed) << "/" << selected.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
