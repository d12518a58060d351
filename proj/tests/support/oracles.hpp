#pragma once

// Reference computations shared by the unit and acceptance suites. Nothing
// here calls into the library's own math, so they act as independent checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "eegfest/tensor.hpp"

namespace oracle {

// Central difference of f with respect to entry i of a leaf parameter.
inline double central_difference(eegfest::Var param, std::size_t i, const std::function<double()>& f, double h) {
  double& x = param.mutable_value()[i];
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Largest relative error over every entry of `param`.
inline double max_gradient_error(eegfest::Var param, const std::function<double()>& f, double h = 1e-6) {
  const auto& g = param.grad();
  double worst = 0.0;
  for (std::size_t i = 0; i < param.value().size(); ++i) {
    const double analytic = g.empty() ? 0.0 : g[i];
    worst = std::max(worst, relative_error(analytic, central_difference(param, i, f, h)));
  }
  return worst;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline eegfest::Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  return eegfest::Tensor({rows, cols}, random_vector(rng, rows * cols, -scale, scale));
}

// Pearson correlation by the two-pass textbook formula in long double.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(num / std::sqrt(da * db));
}

inline double root_mean_square_error(std::span<const double> a, std::span<const double> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return static_cast<double>(std::sqrt(s / a.size()));
}

// F1 as the harmonic mean of precision and recall.
inline double f1_harmonic(double tp, double fp, double fn) {
  if (tp == 0) return 0.0;
  const double precision = tp / (tp + fp), recall = tp / (tp + fn);
  return 2 * precision * recall / (precision + recall);
}

inline double gaussian_entropy(double variance) {
  constexpr double pi = 3.14159265358979323846;
  return 0.5 * std::log(2 * pi * std::exp(1.0) * variance);
}

}  // namespace oracle
