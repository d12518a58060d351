#pragma once

// Featurized samples and the synthetic benchmark used by training,
// evaluation and the CLI.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "eegfest/signal.hpp"

namespace eegfest {

struct LabeledSample {
  DeFeature de;
  std::uint32_t subject = 0;
  std::optional<ClassLabel> label;
  std::optional<double> vigilance;
};

using SamplePool = std::vector<LabeledSample>;

LabeledSample featurize(const EegEpoch& epoch);
SamplePool featurize(std::span<const EegEpoch> epochs);

// Sample indices grouped by subject id, in pool order.
std::map<std::uint32_t, std::vector<std::size_t>> by_subject(const SamplePool& pool);

inline bool is_driving(const LabeledSample& s) { return s.label && *s.label != ClassLabel::NonDriving; }

// Class profiles and subject structure of the synthetic benchmark.
struct BenchmarkSpec {
  SpectralProfile non_drowsy{1.0, 1.0, 1.0, 1.0, 0.5};
  SpectralProfile drowsy{1.0, 1.0, 2.0, 1.0, 0.5};
  SpectralProfile non_driving{1.0, 1.0, 1.0, 1.0, 1.5};

  std::size_t channels = 17;
  double sample_rate = 200.0;
  std::size_t samples_per_channel = 1600;

  std::size_t train_driving_subjects = 16;
  std::size_t train_non_driving_subjects = 10;
  std::size_t eval_driving_subjects = 7;
  std::size_t eval_non_driving_subjects = 5;
  std::size_t epochs_per_class = 30;         // per driving subject and class
  std::size_t non_driving_epochs = 40;       // per non-driving subject

  // Log-normal per-subject multiplier on every band σ (std in log space).
  double subject_band_jitter = 0.25;
  // Same for non-driving subjects, recorded under other conditions.
  double non_driving_subject_jitter = 0.25;
  // Log-normal per-epoch multiplier on every band σ (std in log space).
  double epoch_band_jitter = 0.15;
  // Non-driving epochs additionally scale one random non-gamma band by a
  // factor drawn log-uniformly from [1/x, x].
  double non_driving_band_spread = 2.0;

  std::uint64_t seed = 1;
};

struct SubjectSplit {
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> eval;
};

struct SyntheticBenchmark {
  std::vector<EegEpoch> epochs;
  SubjectSplit split;
};

// Subject ids: driving subjects first, non-driving after, training before
// evaluation within each group. Deterministic in `spec.seed`.
SyntheticBenchmark make_benchmark(const BenchmarkSpec& spec);

// Vigilance-regression subjects: alpha σ follows a slow random drift; the
// label is sigmoid(gain·(alpha DE − centre)) plus N(0, noise²) clipped to [0, 1].
struct VigilanceSpec {
  std::size_t subjects = 3;
  std::size_t epochs_per_subject = 200;
  std::size_t channels = 17;
  double sample_rate = 200.0;
  std::size_t samples_per_channel = 1600;
  double label_noise = 0.02;
  double sigmoid_gain = 3.0;
  std::uint64_t seed = 7;
};

std::vector<std::vector<EegEpoch>> make_vigilance_subjects(const VigilanceSpec& spec);

}  // namespace eegfest
