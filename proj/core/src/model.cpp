#include "eegfest/model.hpp"

#include <algorithm>
#include <cmath>

#include "eegfest/errors.hpp"

namespace eegfest {

std::string to_string(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::Euclidean:
      return "euclidean";
    case DistanceMetric::StdEuclidean:
      return "std_euclidean";
    case DistanceMetric::Cosine:
      return "cosine";
    case DistanceMetric::Correlation:
      return "correlation";
  }
  return "unknown";
}

DistanceMetric metric_from_string(const std::string& name) {
  for (auto m : kAllMetrics)
    if (to_string(m) == name) return m;
  throw ConfigError("unknown distance metric '" + name + "'");
}

void ModelConfig::validate() const {
  if (n_way < 2) throw ConfigError("n_way must be >= 2");
  if (k_shot < 1) throw ConfigError("k_shot must be >= 1");
  attention.validate();
}

ModelParams ModelParams::init(std::size_t channels, const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  ModelParams p;
  p.feature = FeatureBlockParams::init(channels, cfg.attention, rng);
  p.ca_query = AttentionParams::init(cfg.attention, rng);
  p.ca_support = AttentionParams::init(cfg.attention, rng);
  p.det_w = parameter(init_weight(cfg.attention.model_dim, 2, rng));
  p.det_b = parameter(Tensor({1, 2}, 0.0));
  return p;
}

std::vector<NamedParam> ModelParams::named() const {
  std::vector<NamedParam> out;
  feature.collect("feature", out);
  ca_query.collect("similarity.ca_query", out);
  ca_support.collect("similarity.ca_support", out);
  out.push_back({"determination.w", det_w});
  out.push_back({"determination.b", det_b});
  return out;
}

std::vector<Var> ModelParams::feature_params() const {
  std::vector<NamedParam> named;
  feature.collect("feature", named);
  std::vector<Var> out;
  for (auto& n : named) out.push_back(n.var);
  return out;
}

std::vector<Var> ModelParams::all_params() const {
  std::vector<Var> out;
  for (auto& n : named()) out.push_back(n.var);
  return out;
}

void ModelParams::zero_grad() const {
  for (auto v : all_params()) v.zero_grad();
}

void Episode::validate(bool allow_non_driving_support) const {
  if (support.size() < 2) throw DataError("episode needs at least 2 support classes");
  if (support_labels.size() != support.size()) throw DataError("episode support labels do not match classes");
  const std::size_t k = support.front().size();
  if (k == 0) throw DataError("episode support classes must hold at least one shot");
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].size() != k) throw DataError("every support class must hold K shots");
    if (!allow_non_driving_support && support_labels[i] == ClassLabel::NonDriving) {
      throw DataError("non-driving samples cannot form a support class");
    }
    for (const auto& shot : support[i]) {
      if (shot.channels != query.channels) throw DimensionError("support and query channel counts differ");
    }
  }
}

Episode episode_from_epochs(const EegEpoch& query, const std::vector<std::vector<EegEpoch>>& support,
                            const std::vector<ClassLabel>& support_labels) {
  Episode ep;
  ep.query = de_features(query);
  ep.query_truth = query.class_label;
  ep.driving_truth = query.class_label != ClassLabel::NonDriving;
  ep.query_subject = query.subject_id;
  ep.support_labels = support_labels;
  for (const auto& shots : support) {
    auto& dst = ep.support.emplace_back();
    for (const auto& shot : shots) dst.push_back(de_features(shot));
  }
  return ep;
}

Var de_input(const DeFeature& de) { return constant(Tensor({kBandCount, de.channels}, de.values)); }

PairedFeatures build_pairs(const Episode& episode, const ModelParams& params, const ModelConfig& cfg,
                           ForwardStats* stats) {
  PairedFeatures out;
  auto extract = [&](const DeFeature& de) {
    if (stats) ++stats->feature_block_calls;
    return feature_extraction_block(de_input(de), params.feature, cfg.attention);
  };
  out.query = extract(episode.query);
  for (const auto& shots : episode.support) {
    std::vector<Var> maps;
    maps.reserve(shots.size());
    for (const auto& shot : shots) maps.push_back(extract(shot));
    out.prototypes.push_back(maps.size() == 1 ? maps.front() : average(maps));
  }
  return out;
}

PairedHighlighted similarity_highlight(const PairedFeatures& pairs, const ModelParams& params,
                                       const ModelConfig& cfg, ForwardStats* stats) {
  PairedHighlighted out;
  if (!cfg.use_similarity_block) {
    const Var q = global_average_pool(pairs.query);
    for (const auto& proto : pairs.prototypes) {
      out.support_pooled.push_back(global_average_pool(proto));
      out.query_pooled.push_back(q);
    }
    return out;
  }
  for (const auto& proto : pairs.prototypes) {
    const Var q_star = cross_attention_module(proto, pairs.query, params.ca_query, cfg.attention);
    const Var s_star = cross_attention_module(pairs.query, proto, params.ca_support, cfg.attention);
    if (stats) stats->cross_attention_calls += 2;
    out.query_pooled.push_back(global_average_pool(q_star));
    out.support_pooled.push_back(global_average_pool(s_star));
  }
  return out;
}

Determination determination_head(const Var& pooled, const ModelParams& params) {
  Determination d;
  d.logits = add_row(matmul(relu(pooled), params.det_w), params.det_b);
  const auto& v = d.logits.value();
  d.is_driving = v[kDrivingIndex] > v[kNonDrivingIndex];
  return d;
}

Determination determine_driving(const PairedHighlighted& ph, const ModelParams& params, const ModelConfig& cfg) {
  if (!cfg.use_determination_block) throw UnsupportedOperation("determination block is disabled");
  if (ph.query_pooled.empty()) throw DataError("no query pairings to determine");
  if (!cfg.determination_vote) {
    const Var pooled = ph.query_pooled.size() == 1 ? ph.query_pooled.front() : average(ph.query_pooled);
    return determination_head(pooled, params);
  }
  std::vector<Var> logits;
  std::size_t driving_votes = 0;
  for (const auto& q : ph.query_pooled) {
    auto d = determination_head(q, params);
    driving_votes += d.is_driving ? 1 : 0;
    logits.push_back(d.logits);
  }
  Determination out;
  out.logits = average(logits);
  out.is_driving = 2 * driving_votes > logits.size();
  return out;
}

std::vector<double> support_variances(std::span<const Var> pooled) {
  if (pooled.empty()) return {};
  const std::size_t d = pooled.front().value().size();
  const double n = static_cast<double>(pooled.size());
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& p : pooled)
    for (std::size_t j = 0; j < d; ++j) mean[j] += p.value()[j] / n;
  for (const auto& p : pooled)
    for (std::size_t j = 0; j < d; ++j) {
      const double r = p.value()[j] - mean[j];
      var[j] += r * r / n;
    }
  for (auto& v : var) v = std::max(v, 1e-8);
  return var;
}

namespace {

double norm_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

Var centered(const Var& u) {
  const std::size_t n = u.value().size();
  Tensor c({n, n}, -1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) c(i, i) += 1.0;
  return matmul(u, constant(std::move(c)));
}

Var cosine_distance(const Var& u, const Var& v) {
  if (norm_of(u.value()) == 0.0 || norm_of(v.value()) == 0.0) return constant(Tensor::scalar(1.0));
  const Var dot = sum(mul(u, v));
  const Var norms = mul(sqrt(sum(mul(u, u))), sqrt(sum(mul(v, v))));
  return add_scalar(scale(div(dot, norms), -1.0), 1.0);
}

}  // namespace

Var pairwise_distance(const Var& u, const Var& v, DistanceMetric metric, std::span<const double> support_var) {
  if (u.shape() != v.shape()) {
    throw DimensionError("pairwise_distance: " + shape_string(u.shape()) + " vs " + shape_string(v.shape()));
  }
  switch (metric) {
    case DistanceMetric::Euclidean: {
      const Var diff = sub(u, v);
      return sqrt(sum(mul(diff, diff)));
    }
    case DistanceMetric::StdEuclidean: {
      if (support_var.size() != u.value().size()) {
        throw DimensionError("std_euclidean needs one variance per dimension");
      }
      Tensor inv(u.shape(), 0.0);
      for (std::size_t j = 0; j < inv.size(); ++j) inv[j] = 1.0 / std::max(support_var[j], 1e-8);
      const Var diff = sub(u, v);
      return sqrt(sum(mul(mul(diff, diff), constant(std::move(inv)))));
    }
    case DistanceMetric::Cosine:
      return cosine_distance(u, v);
    case DistanceMetric::Correlation: {
      const Var uc = centered(u);
      const Var vc = centered(v);
      // A constant vector has no defined correlation; its centred norm is ~0.
      constexpr double tiny = 1e-12;
      if (norm_of(uc.value()) <= tiny * (1.0 + norm_of(u.value())) ||
          norm_of(vc.value()) <= tiny * (1.0 + norm_of(v.value()))) {
        return constant(Tensor::scalar(1.0));
      }
      return cosine_distance(uc, vc);
    }
  }
  throw ConfigError("unknown distance metric");
}

std::vector<Var> class_distances(const PairedHighlighted& ph, DistanceMetric metric) {
  std::vector<double> var;
  if (metric == DistanceMetric::StdEuclidean) var = support_variances(ph.support_pooled);
  std::vector<Var> out;
  out.reserve(ph.support_pooled.size());
  for (std::size_t i = 0; i < ph.support_pooled.size(); ++i) {
    out.push_back(pairwise_distance(ph.support_pooled[i], ph.query_pooled[i], metric, var));
  }
  return out;
}

std::size_t argmin_index(std::span<const double> values) {
  if (values.empty()) throw DataError("argmin of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  return best;
}

std::size_t classify_drowsiness(const PairedHighlighted& ph, DistanceMetric metric) {
  if (ph.support_pooled.size() < 2) throw DataError("classification needs N >= 2");
  std::vector<double> d;
  for (const auto& v : class_distances(ph, metric)) d.push_back(v.item());
  return argmin_index(d);
}

std::vector<double> ForwardResult::distance_values() const {
  std::vector<double> out;
  out.reserve(distances.size());
  for (const auto& d : distances) out.push_back(d.item());
  return out;
}

ForwardResult forward_pairs(const PairedFeatures& pairs, std::span<const ClassLabel> support_labels,
                            const ModelConfig& cfg, const ModelParams& params) {
  if (support_labels.size() != pairs.prototypes.size()) throw DataError("support labels do not match prototypes");
  ForwardResult result;
  const PairedHighlighted ph = similarity_highlight(pairs, params, cfg, &result.stats);
  result.distances = class_distances(ph, cfg.metric);
  result.nearest = argmin_index(result.distance_values());
  result.prediction = support_labels[result.nearest];
  if (cfg.use_determination_block) {
    auto det = determine_driving(ph, params, cfg);
    result.driving_logits = det.logits;
    result.is_driving = det.is_driving;
    if (!det.is_driving) result.prediction = ClassLabel::NonDriving;
  } else {
    result.is_driving = result.prediction != ClassLabel::NonDriving;
  }
  return result;
}

ForwardResult forward(const Episode& episode, const ModelConfig& cfg, const ModelParams& params) {
  episode.validate(!cfg.use_determination_block);
  ForwardStats stats;
  const PairedFeatures pairs = build_pairs(episode, params, cfg, &stats);
  ForwardResult result = forward_pairs(pairs, episode.support_labels, cfg, params);
  result.stats.feature_block_calls = stats.feature_block_calls;
  return result;
}

Var feature_map(const DeFeature& de, const ModelParams& params, const ModelConfig& cfg) {
  return feature_extraction_block(de_input(de), params.feature, cfg.attention);
}

}  // namespace eegfest
