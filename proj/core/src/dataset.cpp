#include "eegfest/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace eegfest {

LabeledSample featurize(const EegEpoch& epoch) {
  return LabeledSample{de_features(epoch), epoch.subject_id, epoch.class_label, epoch.vigilance};
}

SamplePool featurize(std::span<const EegEpoch> epochs) {
  SamplePool pool;
  pool.reserve(epochs.size());
  for (const auto& e : epochs) pool.push_back(featurize(e));
  return pool;
}

std::map<std::uint32_t, std::vector<std::size_t>> by_subject(const SamplePool& pool) {
  std::map<std::uint32_t, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < pool.size(); ++i) out[pool[i].subject].push_back(i);
  return out;
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined key
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SpectralProfile scaled(const SpectralProfile& p, const std::array<double, kBandCount>& factors) {
  SpectralProfile out;
  for (std::size_t b = 0; b < kBandCount; ++b) out[b] = p[b] * factors[b];
  return out;
}

std::array<double, kBandCount> lognormal_factors(std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  std::array<double, kBandCount> f;
  for (auto& v : f) v = sd > 0.0 ? std::exp(n(rng)) : 1.0;
  return f;
}

}  // namespace

SyntheticBenchmark make_benchmark(const BenchmarkSpec& spec) {
  SyntheticBenchmark out;
  std::uint32_t next_id = 0;
  std::vector<std::uint32_t> driving_train, driving_eval, nd_train, nd_eval;
  for (std::size_t i = 0; i < spec.train_driving_subjects; ++i) driving_train.push_back(next_id++);
  for (std::size_t i = 0; i < spec.eval_driving_subjects; ++i) driving_eval.push_back(next_id++);
  for (std::size_t i = 0; i < spec.train_non_driving_subjects; ++i) nd_train.push_back(next_id++);
  for (std::size_t i = 0; i < spec.eval_non_driving_subjects; ++i) nd_eval.push_back(next_id++);
  out.split.train = driving_train;
  out.split.train.insert(out.split.train.end(), nd_train.begin(), nd_train.end());
  out.split.eval = driving_eval;
  out.split.eval.insert(out.split.eval.end(), nd_eval.begin(), nd_eval.end());

  auto request_for = [&](std::uint32_t subject, std::uint64_t epoch_index, const SpectralProfile& profile) {
    SynthRequest r;
    r.profile = profile;
    r.subject_seed = mix(spec.seed, subject);
    r.epoch_seed = mix(r.subject_seed, epoch_index + 1);
    r.channels = spec.channels;
    r.samples_per_channel = spec.samples_per_channel;
    r.sample_rate = spec.sample_rate;
    return r;
  };

  auto driving_subject = [&](std::uint32_t subject) {
    std::mt19937_64 rng(mix(spec.seed ^ 0xD1u, subject));
    const auto subject_factors = lognormal_factors(rng, spec.subject_band_jitter);
    std::uniform_real_distribution<double> awake(0.0, 0.7), sleepy(0.7, 1.0);
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < spec.epochs_per_class; ++i) {
      for (ClassLabel label : {ClassLabel::NonDrowsy, ClassLabel::Drowsy}) {
        const auto& base = label == ClassLabel::Drowsy ? spec.drowsy : spec.non_drowsy;
        auto profile = scaled(scaled(base, subject_factors), lognormal_factors(rng, spec.epoch_band_jitter));
        EegEpoch e = synthesize_epoch(request_for(subject, index++, profile));
        e.subject_id = subject;
        e.class_label = label;
        e.vigilance = label == ClassLabel::Drowsy ? sleepy(rng) : awake(rng);
        out.epochs.push_back(std::move(e));
      }
    }
  };

  auto non_driving_subject = [&](std::uint32_t subject) {
    std::mt19937_64 rng(mix(spec.seed ^ 0xA7u, subject));
    const auto subject_factors = lognormal_factors(rng, spec.non_driving_subject_jitter);
    std::uniform_int_distribution<std::size_t> band(0, kGammaBand - 1);
    const double spread = std::log(std::max(spec.non_driving_band_spread, 1.0));
    std::uniform_real_distribution<double> log_factor(-spread, spread);
    for (std::size_t i = 0; i < spec.non_driving_epochs; ++i) {
      auto profile = scaled(scaled(spec.non_driving, subject_factors), lognormal_factors(rng, spec.epoch_band_jitter));
      profile[band(rng)] *= std::exp(log_factor(rng));
      EegEpoch e = synthesize_epoch(request_for(subject, i, profile));
      e.subject_id = subject;
      e.class_label = ClassLabel::NonDriving;
      out.epochs.push_back(std::move(e));
    }
  };

  for (auto s : driving_train) driving_subject(s);
  for (auto s : driving_eval) driving_subject(s);
  for (auto s : nd_train) non_driving_subject(s);
  for (auto s : nd_eval) non_driving_subject(s);
  return out;
}

std::vector<std::vector<EegEpoch>> make_vigilance_subjects(const VigilanceSpec& spec) {
  std::vector<std::vector<EegEpoch>> out;
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    const auto subject = static_cast<std::uint32_t>(s);
    std::mt19937_64 rng(mix(spec.seed, subject));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, 0.05), noise(0.0, spec.label_noise);
    const double p1 = phase(rng), p2 = phase(rng);
    const double n = static_cast<double>(spec.epochs_per_subject);

    std::vector<EegEpoch> epochs;
    std::vector<double> alpha_de;
    for (std::size_t i = 0; i < spec.epochs_per_subject; ++i) {
      const double t = static_cast<double>(i) / n;
      // Several slow cycles so every contiguous fold spans the label range.
      const double drift = 0.5 * std::sin(2.0 * std::numbers::pi * 3.0 * t + p1) +
                           0.2 * std::sin(2.0 * std::numbers::pi * 7.0 * t + p2);
      SpectralProfile profile{1.0, 1.0, std::exp(drift), 1.0, 0.5};
      for (auto& v : profile) v *= std::exp(jitter(rng));
      SynthRequest r;
      r.profile = profile;
      r.subject_seed = mix(spec.seed ^ 0x51u, subject);
      r.epoch_seed = mix(r.subject_seed, i + 1);
      r.channels = spec.channels;
      r.samples_per_channel = spec.samples_per_channel;
      r.sample_rate = spec.sample_rate;
      EegEpoch e = synthesize_epoch(r);
      e.subject_id = subject;
      const DeFeature de = de_features(e);
      double mean_alpha = 0.0;
      for (std::size_t c = 0; c < de.channels; ++c) mean_alpha += de.at(kAlphaBand, c);
      alpha_de.push_back(mean_alpha / static_cast<double>(de.channels));
      epochs.push_back(std::move(e));
    }
    double centre = 0.0;
    for (double a : alpha_de) centre += a / n;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const double clean = 1.0 / (1.0 + std::exp(-spec.sigmoid_gain * (alpha_de[i] - centre)));
      const double v = std::clamp(clean + noise(rng), 0.0, 1.0);
      epochs[i].vigilance = v;
      epochs[i].class_label = perclos_label(v, 1.0).label;
    }
    out.push_back(std::move(epochs));
  }
  return out;
}

}  // namespace eegfest
