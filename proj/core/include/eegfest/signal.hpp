#pragma once

// Raw EEG epochs, band decomposition, differential-entropy features, label
// rules and a synthetic epoch generator with known spectral structure.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eegfest {

enum class ClassLabel : std::int8_t { NonDrowsy = 0, Drowsy = 1, NonDriving = 2 };

inline constexpr std::size_t kClassCount = 3;

std::string to_string(ClassLabel label);
ClassLabel class_label_from_string(const std::string& text);

struct EegEpoch {
  std::size_t channels = 0;
  double sample_rate = 0.0;  // Hz
  std::size_t samples_per_channel = 0;
  std::vector<float> samples;  // channel-major, channels × samples_per_channel
  std::uint32_t subject_id = 0;
  std::optional<ClassLabel> class_label;
  std::optional<double> vigilance;  // in [0, 1]

  double seconds() const { return static_cast<double>(samples_per_channel) / sample_rate; }
  std::span<const float> channel(std::size_t c) const {
    return std::span<const float>(samples).subspan(c * samples_per_channel, samples_per_channel);
  }
  std::span<float> channel(std::size_t c) {
    return std::span<float>(samples).subspan(c * samples_per_channel, samples_per_channel);
  }

  // Throws DataError / LabelError on a broken invariant.
  void validate() const;

  friend bool operator==(const EegEpoch&, const EegEpoch&) = default;
};

struct Band {
  const char* name;
  double low_hz;
  double high_hz;
};

inline constexpr std::size_t kBandCount = 5;
// Row order of every DE matrix. Edges are inclusive.
inline constexpr std::array<Band, kBandCount> kBands{{
    {"delta", 1.0, 3.0},
    {"theta", 4.0, 7.0},
    {"alpha", 8.0, 13.0},
    {"beta", 14.0, 30.0},
    {"gamma", 31.0, 50.0},
}};
inline constexpr std::size_t kAlphaBand = 2;
inline constexpr std::size_t kGammaBand = 4;

// 5 × c matrix of differential entropies, row = band, column = channel.
struct DeFeature {
  std::size_t channels = 0;
  std::vector<double> values;  // row-major, kBandCount × channels

  double at(std::size_t band, std::size_t channel) const { return values[band * channels + channel]; }
  double& at(std::size_t band, std::size_t channel) { return values[band * channels + channel]; }

  friend bool operator==(const DeFeature&, const DeFeature&) = default;
};

// Band-limited copies of every channel: result[band][channel][t].
using BandSignals = std::array<std::vector<std::vector<double>>, kBandCount>;

inline constexpr double kMinSampleRate = 100.0;
inline constexpr double kVarianceFloor = 1e-12;

// Zero-phase ideal band-pass: forward real FFT, zero every bin outside
// [low, high], inverse FFT. Throws ConfigError when sample_rate < 100 Hz.
BandSignals band_decompose(const EegEpoch& epoch);
std::vector<double> bandpass(std::span<const double> signal, double sample_rate, double low_hz, double high_hz);

// ½·log(2πe·σ²) with σ² the 1/T variance, floored at 1e-12.
double differential_entropy(std::span<const double> band_signal);

DeFeature de_features(const EegEpoch& epoch);

struct VigilanceLabel {
  double vigilance;
  ClassLabel label;
};

inline constexpr double kPerclosDrowsyThreshold = 0.7;
// Drowsiness-index cut for binary labels (the source data never states one).
inline constexpr double kIndexDrowsyThreshold = 0.5;

// PERCLOS = eye-closed / interval; drowsy iff ≥ 0.7.
VigilanceLabel perclos_label(double eye_closed_seconds, double interval_seconds);

// max(0, (1 − e^{−(t−1)}) / (1 + e^{−(t−1)})).
double drowsiness_index(double reaction_time_s);
ClassLabel index_label(double index);

// Trailing moving average; the first window−1 outputs average the available prefix.
std::vector<double> smooth_index(std::span<const double> series, std::size_t window = 10);

// Linear interpolation of every channel onto a new sample rate.
EegEpoch resample_linear(const EegEpoch& epoch, double new_rate);

// Standard deviation of each band's component, delta..gamma.
using SpectralProfile = std::array<double, kBandCount>;

struct SynthRequest {
  SpectralProfile profile{};
  std::uint64_t subject_seed = 0;
  std::uint64_t epoch_seed = 0;
  std::size_t channels = 17;
  std::size_t samples_per_channel = 1600;
  double sample_rate = 200.0;
};

// Per-channel gains in [0.8, 1.2] drawn once from the subject seed.
std::vector<double> subject_channel_gains(std::uint64_t subject_seed, std::size_t channels);

// Each channel is the sum over bands of band-limited Gaussian noise (random
// complex-Gaussian spectrum restricted to the band, expected variance σ²),
// scaled by the subject's channel gain. Labels are left empty.
EegEpoch synthesize_epoch(const SynthRequest& request);

}  // namespace eegfest
