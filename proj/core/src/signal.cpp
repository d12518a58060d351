#include "eegfest/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>

#include "eegfest/errors.hpp"

namespace eegfest {

std::string to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::NonDrowsy:
      return "non_drowsy";
    case ClassLabel::Drowsy:
      return "drowsy";
    case ClassLabel::NonDriving:
      return "non_driving";
  }
  return "unknown";
}

ClassLabel class_label_from_string(const std::string& text) {
  if (text == "non_drowsy" || text == "0") return ClassLabel::NonDrowsy;
  if (text == "drowsy" || text == "1") return ClassLabel::Drowsy;
  if (text == "non_driving" || text == "2") return ClassLabel::NonDriving;
  throw LabelError("unknown class label '" + text + "'");
}

void EegEpoch::validate() const {
  if (channels == 0 || samples_per_channel == 0) throw DataError("epoch has no channels or no samples");
  if (!(sample_rate > 0.0)) throw DataError("epoch sample rate must be positive");
  if (samples.size() != channels * samples_per_channel) {
    throw DataError("epoch holds " + std::to_string(samples.size()) + " samples, expected " +
                    std::to_string(channels) + "x" + std::to_string(samples_per_channel));
  }
  if (vigilance && !(*vigilance >= 0.0 && *vigilance <= 1.0)) {
    throw LabelError("vigilance " + std::to_string(*vigilance) + " outside [0, 1]");
  }
}

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer real_buffer(std::size_t n) { return RealBuffer(static_cast<double*>(fftw_malloc(sizeof(double) * n))); }
ComplexBuffer complex_buffer(std::size_t n) {
  return ComplexBuffer(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

// FFTW planning is not thread-safe; plans are created once per length under a
// lock and executed through the new-array interface afterwards.
class PlanCache {
 public:
  struct Plans {
    fftw_plan forward;
    fftw_plan inverse;
  };

  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  Plans get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto in = real_buffer(n);
    auto out = complex_buffer(n / 2 + 1);
    const int len = static_cast<int>(n);
    Plans p{fftw_plan_dft_r2c_1d(len, in.get(), out.get(), FFTW_ESTIMATE),
            fftw_plan_dft_c2r_1d(len, out.get(), in.get(), FFTW_ESTIMATE)};
    plans_.emplace(n, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, Plans> plans_;
};

bool bin_in_band(std::size_t k, std::size_t n, double sample_rate, double low, double high) {
  const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
  constexpr double tol = 1e-9;
  return f >= low - tol && f <= high + tol;
}

void check_rate(double sample_rate) {
  if (sample_rate < kMinSampleRate) {
    throw ConfigError("sample rate " + std::to_string(sample_rate) +
                      " Hz cannot represent the 50 Hz gamma edge (need >= 100 Hz)");
  }
}

// Forward transform of one channel into `spectrum`.
void forward_fft(std::span<const double> signal, fftw_complex* spectrum) {
  const std::size_t n = signal.size();
  auto plans = PlanCache::instance().get(n);
  auto in = real_buffer(n);
  std::copy(signal.begin(), signal.end(), in.get());
  fftw_execute_dft_r2c(plans.forward, in.get(), spectrum);
}

// Inverse of a masked copy of `spectrum`, normalized by 1/n.
std::vector<double> masked_inverse(const fftw_complex* spectrum, std::size_t n, double sample_rate, double low,
                                   double high) {
  const std::size_t bins = n / 2 + 1;
  auto plans = PlanCache::instance().get(n);
  auto masked = complex_buffer(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool keep = bin_in_band(k, n, sample_rate, low, high);
    masked[k][0] = keep ? spectrum[k][0] : 0.0;
    masked[k][1] = keep ? spectrum[k][1] : 0.0;
  }
  auto out = real_buffer(n);
  fftw_execute_dft_c2r(plans.inverse, masked.get(), out.get());
  std::vector<double> result(out.get(), out.get() + n);
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : result) v *= inv;
  return result;
}

}  // namespace

std::vector<double> bandpass(std::span<const double> signal, double sample_rate, double low_hz, double high_hz) {
  check_rate(sample_rate);
  const std::size_t n = signal.size();
  if (n == 0) return {};
  auto spectrum = complex_buffer(n / 2 + 1);
  forward_fft(signal, spectrum.get());
  return masked_inverse(spectrum.get(), n, sample_rate, low_hz, high_hz);
}

BandSignals band_decompose(const EegEpoch& epoch) {
  check_rate(epoch.sample_rate);
  epoch.validate();
  const std::size_t n = epoch.samples_per_channel;
  BandSignals out;
  for (auto& band : out) band.resize(epoch.channels);
  auto spectrum = complex_buffer(n / 2 + 1);
  std::vector<double> channel(n);
  for (std::size_t c = 0; c < epoch.channels; ++c) {
    auto src = epoch.channel(c);
    std::copy(src.begin(), src.end(), channel.begin());
    forward_fft(channel, spectrum.get());
    for (std::size_t b = 0; b < kBandCount; ++b) {
      out[b][c] = masked_inverse(spectrum.get(), n, epoch.sample_rate, kBands[b].low_hz, kBands[b].high_hz);
    }
  }
  return out;
}

double differential_entropy(std::span<const double> band_signal) {
  const std::size_t n = band_signal.size();
  if (n < 2) throw DataError("differential entropy needs at least 2 samples");
  double mu = 0.0;
  for (double v : band_signal) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : band_signal) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  var = std::max(var, kVarianceFloor);
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * var);
}

DeFeature de_features(const EegEpoch& epoch) {
  const BandSignals bands = band_decompose(epoch);
  DeFeature de{epoch.channels, std::vector<double>(kBandCount * epoch.channels)};
  for (std::size_t b = 0; b < kBandCount; ++b)
    for (std::size_t c = 0; c < epoch.channels; ++c) de.at(b, c) = differential_entropy(bands[b][c]);
  return de;
}

VigilanceLabel perclos_label(double eye_closed_seconds, double interval_seconds) {
  if (!(interval_seconds > 0.0)) throw LabelError("PERCLOS interval must be positive");
  const double ratio = eye_closed_seconds / interval_seconds;
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw LabelError("PERCLOS ratio " + std::to_string(ratio) + " outside [0, 1]");
  }
  return {ratio, ratio >= kPerclosDrowsyThreshold ? ClassLabel::Drowsy : ClassLabel::NonDrowsy};
}

double drowsiness_index(double reaction_time_s) {
  // (1 − e^{−x}) / (1 + e^{−x}) = tanh(x/2); tanh rounds to 1 for large x.
  const double x = reaction_time_s - 1.0;
  return std::clamp(std::tanh(0.5 * x), 0.0, std::nextafter(1.0, 0.0));
}

ClassLabel index_label(double index) {
  return index >= kIndexDrowsyThreshold ? ClassLabel::Drowsy : ClassLabel::NonDrowsy;
}

std::vector<double> smooth_index(std::span<const double> series, std::size_t window) {
  if (window == 0) throw ConfigError("smoothing window must be >= 1");
  std::vector<double> out(series.size());
  double running = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    running += series[i];
    if (i >= window) running -= series[i - window];
    const std::size_t count = std::min(i + 1, window);
    out[i] = running / static_cast<double>(count);
  }
  return out;
}

EegEpoch resample_linear(const EegEpoch& epoch, double new_rate) {
  epoch.validate();
  if (!(new_rate > 0.0)) throw ConfigError("resample rate must be positive");
  EegEpoch out = epoch;
  out.sample_rate = new_rate;
  const auto n_out = static_cast<std::size_t>(std::llround(epoch.seconds() * new_rate));
  out.samples_per_channel = n_out;
  out.samples.assign(epoch.channels * n_out, 0.0f);
  const std::size_t n_in = epoch.samples_per_channel;
  for (std::size_t c = 0; c < epoch.channels; ++c) {
    auto src = epoch.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < n_out; ++i) {
      const double pos = static_cast<double>(i) * epoch.sample_rate / new_rate;
      const auto lo = std::min(static_cast<std::size_t>(pos), n_in - 1);
      const std::size_t hi = std::min(lo + 1, n_in - 1);
      const double frac = pos - static_cast<double>(lo);
      dst[i] = static_cast<float>((1.0 - frac) * src[lo] + frac * src[hi]);
    }
  }
  return out;
}

std::vector<double> subject_channel_gains(std::uint64_t subject_seed, std::size_t channels) {
  std::seed_seq seq{static_cast<std::uint32_t>(subject_seed), static_cast<std::uint32_t>(subject_seed >> 32),
                    0x9a1u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> gain(0.8, 1.2);
  std::vector<double> out(channels);
  for (auto& g : out) g = gain(rng);
  return out;
}

EegEpoch synthesize_epoch(const SynthRequest& request) {
  check_rate(request.sample_rate);
  const std::size_t n = request.samples_per_channel;
  const std::size_t bins = n / 2 + 1;
  EegEpoch epoch;
  epoch.channels = request.channels;
  epoch.sample_rate = request.sample_rate;
  epoch.samples_per_channel = n;
  epoch.samples.assign(request.channels * n, 0.0f);

  const auto gains = subject_channel_gains(request.subject_seed, request.channels);
  std::seed_seq seq{static_cast<std::uint32_t>(request.subject_seed),
                    static_cast<std::uint32_t>(request.subject_seed >> 32),
                    static_cast<std::uint32_t>(request.epoch_seed),
                    static_cast<std::uint32_t>(request.epoch_seed >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto plans = PlanCache::instance().get(n);
  auto spectrum = complex_buffer(bins);
  auto signal = real_buffer(n);
  for (std::size_t c = 0; c < request.channels; ++c) {
    for (std::size_t k = 0; k < bins; ++k) spectrum[k][0] = spectrum[k][1] = 0.0;
    for (std::size_t b = 0; b < kBandCount; ++b) {
      const double sigma = request.profile[b];
      // Weight 2 per interior bin (its mirror image), 1 for the Nyquist bin.
      double weight = 0.0;
      for (std::size_t k = 1; k < bins; ++k) {
        if (!bin_in_band(k, n, request.sample_rate, kBands[b].low_hz, kBands[b].high_hz)) continue;
        weight += (n % 2 == 0 && k == n / 2) ? 1.0 : 2.0;
      }
      if (weight == 0.0) continue;
      const double power = sigma * sigma * static_cast<double>(n) * static_cast<double>(n) / weight;
      for (std::size_t k = 1; k < bins; ++k) {
        if (!bin_in_band(k, n, request.sample_rate, kBands[b].low_hz, kBands[b].high_hz)) continue;
        const double re = normal(rng);
        const double im = normal(rng);
        if (n % 2 == 0 && k == n / 2) {
          spectrum[k][0] = std::sqrt(power) * re;
        } else {
          const double amp = std::sqrt(power / 2.0);
          spectrum[k][0] = amp * re;
          spectrum[k][1] = amp * im;
        }
      }
    }
    fftw_execute_dft_c2r(plans.inverse, spectrum.get(), signal.get());
    const double norm = gains[c] / static_cast<double>(n);
    auto dst = epoch.channel(c);
    for (std::size_t t = 0; t < n; ++t) dst[t] = static_cast<float>(signal[t] * norm);
  }
  return epoch;
}

}  // namespace eegfest
