#pragma once

// The full few-shot network: feature extraction of a query and an N-way
// K-shot support set, cross-attention similarity highlighting, the
// driving / non-driving determination head and nearest-prototype drowsiness
// classification.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegfest/attention.hpp"
#include "eegfest/signal.hpp"
#include "eegfest/tensor.hpp"

namespace eegfest {

enum class DistanceMetric { Euclidean, StdEuclidean, Cosine, Correlation };

inline constexpr std::array<DistanceMetric, 4> kAllMetrics{DistanceMetric::Euclidean, DistanceMetric::StdEuclidean,
                                                          DistanceMetric::Cosine, DistanceMetric::Correlation};

std::string to_string(DistanceMetric metric);
// Throws ConfigError for unknown names.
DistanceMetric metric_from_string(const std::string& name);

struct ModelConfig {
  std::size_t n_way = 2;
  std::size_t k_shot = 5;
  DistanceMetric metric = DistanceMetric::Euclidean;
  bool use_similarity_block = true;
  bool use_determination_block = true;
  // Decide driving / non-driving by majority over the N pairings instead of
  // feeding the class-averaged query vector to the head.
  bool determination_vote = false;
  AttentionConfig attention;
  std::uint64_t seed = 0;

  void validate() const;
};

// Index convention of the determination logits.
inline constexpr std::size_t kNonDrivingIndex = 0;
inline constexpr std::size_t kDrivingIndex = 1;

struct ModelParams {
  FeatureBlockParams feature;
  AttentionParams ca_query;    // Q = prototype map, K-V = query map
  AttentionParams ca_support;  // Q = query map, K-V = prototype map
  Var det_w;                   // d × 2
  Var det_b;                   // 1 × 2

  static ModelParams init(std::size_t channels, const ModelConfig& cfg);
  std::size_t channels() const { return feature.channels(); }

  // Stable, unique names used by checkpoints.
  std::vector<NamedParam> named() const;
  std::vector<Var> feature_params() const;
  std::vector<Var> all_params() const;
  void zero_grad() const;
};

struct Episode {
  DeFeature query;
  // support[i] holds the K shots of class support_labels[i].
  std::vector<std::vector<DeFeature>> support;
  std::vector<ClassLabel> support_labels;
  std::optional<ClassLabel> query_truth;
  bool driving_truth = true;
  std::uint32_t query_subject = 0;

  std::size_t n_way() const { return support.size(); }
  std::size_t k_shot() const { return support.empty() ? 0 : support.front().size(); }
  // `allow_non_driving_support` is set by the determination-block ablation,
  // which adds a non-driving prototype.
  void validate(bool allow_non_driving_support = false) const;
};

Episode episode_from_epochs(const EegEpoch& query, const std::vector<std::vector<EegEpoch>>& support,
                            const std::vector<ClassLabel>& support_labels);

// DE matrix as a 5 × c constant.
Var de_input(const DeFeature& de);

struct ForwardStats {
  std::size_t feature_block_calls = 0;
  std::size_t cross_attention_calls = 0;
};

struct PairedFeatures {
  std::vector<Var> prototypes;  // S_fi, one 5 × d map per class
  Var query;                    // x_f^q, computed once
};

PairedFeatures build_pairs(const Episode& episode, const ModelParams& params, const ModelConfig& cfg,
                           ForwardStats* stats = nullptr);

struct PairedHighlighted {
  std::vector<Var> support_pooled;  // pooled S*_fi per class
  std::vector<Var> query_pooled;    // pooled x^{q*} per class pairing
};

// With the block disabled both sides are the pooled raw feature maps.
PairedHighlighted similarity_highlight(const PairedFeatures& pairs, const ModelParams& params,
                                       const ModelConfig& cfg, ForwardStats* stats = nullptr);

struct Determination {
  Var logits;  // 1 × 2
  bool is_driving = true;
};

// relu(x)·W + b on one pooled vector. argmax with ties to index 0.
Determination determination_head(const Var& pooled, const ModelParams& params);
// Throws UnsupportedOperation when the block is disabled.
Determination determine_driving(const PairedHighlighted& ph, const ModelParams& params, const ModelConfig& cfg);

// Per-dimension variance across the pooled support vectors, floored at 1e-8.
std::vector<double> support_variances(std::span<const Var> pooled);

// u, v are 1 × d. `support_var` is only read for StdEuclidean.
Var pairwise_distance(const Var& u, const Var& v, DistanceMetric metric, std::span<const double> support_var = {});

std::vector<Var> class_distances(const PairedHighlighted& ph, DistanceMetric metric);

// Lowest index wins ties.
std::size_t argmin_index(std::span<const double> values);
std::size_t classify_drowsiness(const PairedHighlighted& ph, DistanceMetric metric);

struct ForwardResult {
  Var driving_logits;            // empty when the determination block is off
  std::vector<Var> distances;    // one 1 × 1 per support class
  bool is_driving = true;
  std::size_t nearest = 0;       // argmin over distances
  ClassLabel prediction = ClassLabel::NonDrowsy;
  ForwardStats stats;

  std::vector<double> distance_values() const;
};

ForwardResult forward(const Episode& episode, const ModelConfig& cfg, const ModelParams& params);

// Same pipeline from already extracted feature maps (evaluation caches the
// maps of every sample once per parameter set).
ForwardResult forward_pairs(const PairedFeatures& pairs, std::span<const ClassLabel> support_labels,
                            const ModelConfig& cfg, const ModelParams& params);

// Feature map of one DE matrix.
Var feature_map(const DeFeature& de, const ModelParams& params, const ModelConfig& cfg);

}  // namespace eegfest
