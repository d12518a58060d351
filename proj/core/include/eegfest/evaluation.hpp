#pragma once

// Metrics, subject splits, nested K-shot support sampling, repeated trials
// and the ablation drivers.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegfest/dataset.hpp"
#include "eegfest/model.hpp"

namespace eegfest {

// Pearson correlation. Throws MetricUndefined when either side is constant
// or n < 2, DimensionError on a length mismatch.
double pcc(std::span<const double> truth, std::span<const double> pred);
// Plain root mean squared residual.
double rmse(std::span<const double> truth, std::span<const double> pred);
// TP / (TP + ½(FP + FN)); empty when all three counts are zero.
std::optional<double> f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

class ConfusionMatrix {
 public:
  void add(ClassLabel truth, ClassLabel predicted);
  std::size_t count(ClassLabel truth, ClassLabel predicted) const;
  std::size_t tp(ClassLabel c) const;
  std::size_t fp(ClassLabel c) const;
  std::size_t fn(ClassLabel c) const;
  std::size_t support(ClassLabel c) const;
  std::size_t total() const;
  // Fraction of class-c samples predicted as c; empty without samples.
  std::optional<double> accuracy(ClassLabel c) const;
  std::optional<double> f1(ClassLabel c) const;
  // Unweighted mean of the defined per-class F1 scores.
  std::optional<double> macro_f1() const;

 private:
  std::array<std::array<std::size_t, kClassCount>, kClassCount> counts_{};
};

struct SplitPools {
  SamplePool train;
  SamplePool eval;
};

// Throws ConfigError on overlapping subject sets or an empty eval set.
SplitPools split_subjects(const SamplePool& pool, std::span<const std::uint32_t> train_subjects,
                          std::span<const std::uint32_t> eval_subjects);

inline constexpr std::size_t kMaxShot = 20;
inline constexpr std::array<std::size_t, 4> kShotLevels{1, 5, 10, 20};

// Ranked support lists: support(K) of a class is the first K entries, so the
// sets for smaller K nest inside larger ones. Every sample not ranked as
// support is a query.
struct SupportPlan {
  std::size_t max_shot = kMaxShot;
  // driving subject → [non_drowsy ranks, drowsy ranks]
  std::map<std::uint32_t, std::array<std::vector<std::size_t>, 2>> driving;
  // non-driving subject → ranks (used only by the determination ablation)
  std::map<std::uint32_t, std::vector<std::size_t>> non_driving;
  std::vector<std::size_t> queries;

  std::vector<std::size_t> support(std::uint32_t subject, ClassLabel label, std::size_t k) const;
};

// Throws DataError when a driving subject has fewer than max_shot epochs of
// either class (or a non-driving subject fewer than max_shot epochs).
SupportPlan sample_support(const SamplePool& eval_pool, std::uint64_t seed, std::size_t max_shot = kMaxShot);

// Fold id per sample: k contiguous blocks in temporal order, sizes differ by
// at most one. Throws DataError when n < k, ConfigError when k < 2.
std::vector<std::size_t> kfold_sessions(std::size_t n, std::size_t k = 5);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(std::span<const double> values);

struct TrialMetrics {
  ConfusionMatrix confusion;
  std::array<double, kClassCount> accuracy{};  // NaN when the class has no queries
  double macro_f1 = 0.0;
};

struct EvalReport {
  std::size_t k_shot = 0;
  std::vector<TrialMetrics> trials;
  std::array<MeanStd, kClassCount> accuracy{};
  MeanStd macro_f1;
  std::string config_echo;
};

// Repeats the cross-subject evaluation with `trials` support resamplings
// (seed_t = master_seed + 1000·t). Driving queries are paired with their own
// subject's support; non-driving queries are spread round-robin over the
// driving subjects. Episodes are evaluated one at a time.
EvalReport run_trials(const SamplePool& eval_pool, const ModelConfig& cfg, const ModelParams& params,
                      std::size_t k_shot, std::size_t trials = 5, std::uint64_t master_seed = 0);

void write_report_csv(std::ostream& os, std::span<const EvalReport> reports);
void write_report_table(std::ostream& os, std::span<const EvalReport> reports);

using ModelFactory = std::function<ModelParams(const ModelConfig&)>;

struct AblationTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::size_t> k_rows;
  std::vector<std::vector<double>> values;  // [row][column]
};

struct AblationResult {
  AblationTable metric_non_drowsy;   // K × metric, non-drowsy accuracy
  AblationTable metric_drowsy;       // K × metric, drowsy accuracy
  AblationTable determination;       // K × {with, without}, non-driving accuracy
  AblationTable similarity;          // K × {with non-drowsy, with drowsy, without non-drowsy, without drowsy}
};

// Trains one model per variant through `factory` and evaluates each over the
// shot levels with `trials` resamplings.
AblationResult ablation_suite(const SamplePool& eval_pool, const ModelConfig& base, const ModelFactory& factory,
                              std::span<const std::size_t> shots = kShotLevels, std::size_t trials = 5,
                              std::uint64_t seed = 0);

void write_table_csv(std::ostream& os, const AblationTable& table);
void write_table_text(std::ostream& os, const AblationTable& table);

}  // namespace eegfest
