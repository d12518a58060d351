#include "eegfest/attention.hpp"

#include <cmath>

#include "eegfest/errors.hpp"

namespace eegfest {

void AttentionConfig::validate() const {
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("model dim " + std::to_string(model_dim) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (model_dim % 2 != 0) throw ConfigError("positional encoding needs an even model dim");
  if (ff_dim == 0) throw ConfigError("feed-forward width must be positive");
  if (!(pe_base > 0.0)) throw ConfigError("pe_base must be positive");
}

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({fan_in, fan_out}, 0.0);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

AttentionParams AttentionParams::init(const AttentionConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t d = cfg.model_dim, f = cfg.ff_dim;
  AttentionParams p;
  p.w_q = parameter(init_weight(d, d, rng));
  p.w_k = parameter(init_weight(d, d, rng));
  p.w_v = parameter(init_weight(d, d, rng));
  p.w_m = parameter(init_weight(d, d, rng));
  p.w_1 = parameter(init_weight(d, f, rng));
  p.b_1 = parameter(Tensor({1, f}, 0.0));
  p.w_2 = parameter(init_weight(f, d, rng));
  p.b_2 = parameter(Tensor({1, d}, 0.0));
  return p;
}

void AttentionParams::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".w_q", w_q});
  out.push_back({prefix + ".w_k", w_k});
  out.push_back({prefix + ".w_v", w_v});
  out.push_back({prefix + ".w_m", w_m});
  out.push_back({prefix + ".ff.w_1", w_1});
  out.push_back({prefix + ".ff.b_1", b_1});
  out.push_back({prefix + ".ff.w_2", w_2});
  out.push_back({prefix + ".ff.b_2", b_2});
}

FeatureBlockParams FeatureBlockParams::init(std::size_t channels, const AttentionConfig& cfg,
                                            std::mt19937_64& rng) {
  if (channels == 0) throw ConfigError("feature block needs at least one channel");
  FeatureBlockParams p;
  p.proj_w = parameter(init_weight(channels, cfg.model_dim, rng));
  p.proj_b = parameter(Tensor({1, cfg.model_dim}, 0.0));
  for (auto& m : p.modules) m = AttentionParams::init(cfg, rng);
  return p;
}

void FeatureBlockParams::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".proj.w", proj_w});
  out.push_back({prefix + ".proj.b", proj_b});
  for (std::size_t i = 0; i < modules.size(); ++i) modules[i].collect(prefix + ".sa" + std::to_string(i), out);
}

Tensor positional_encoding(std::size_t positions, std::size_t dim, double base) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("positional encoding dim must be even, got " + std::to_string(dim));
  Tensor pe({positions, dim}, 0.0);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t k = 0; 2 * k < dim; ++k) {
      const double angle = static_cast<double>(p) /
                           std::pow(base, static_cast<double>(2 * k) / static_cast<double>(dim));
      pe(p, 2 * k) = std::sin(angle);
      pe(p, 2 * k + 1) = std::cos(angle);
    }
  }
  return pe;
}

namespace {

void require_feature_map(const Var& x, const AttentionConfig& cfg, const char* what) {
  const Shape expected{kFeatureRows, cfg.model_dim};
  if (x.shape() != expected) {
    throw DimensionError(std::string(what) + ": expected " + shape_string(expected) + ", got " +
                         shape_string(x.shape()));
  }
}

}  // namespace

Var attention_core(const Var& q_source, const Var& kv_source, const AttentionParams& params,
                   const AttentionConfig& cfg, AttentionTrace* trace) {
  const std::size_t dh = cfg.head_dim();
  const Var q = matmul(q_source, params.w_q);
  const Var k = matmul(kv_source, params.w_k);
  const Var v = matmul(kv_source, params.w_v);
  std::vector<Var> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Var scores = matmul_nt(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh));
    if (cfg.scaled_attention) scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(dh)));
    Var probs = softmax_rows(scores);
    if (trace) trace->probabilities.push_back(probs.value());
    heads.push_back(matmul(probs, slice_cols(v, h * dh, dh)));
  }
  const Var merged = matmul(concat_cols(heads), params.w_m);
  const Var normed = layer_norm(add(merged, kv_source));
  if (trace) trace->normalized.push_back(normed.value());
  const Var hidden = relu(add_row(matmul(normed, params.w_1), params.b_1));
  const Var ff = add_row(matmul(hidden, params.w_2), params.b_2);
  Var out = layer_norm(add(ff, kv_source));
  if (trace) trace->normalized.push_back(out.value());
  return out;
}

Var self_attention_module(const Var& x, const AttentionParams& params, const AttentionConfig& cfg, bool add_pe,
                          AttentionTrace* trace) {
  require_feature_map(x, cfg, "self_attention_module");
  Var input = x;
  if (add_pe) input = add(x, constant(positional_encoding(kFeatureRows, cfg.model_dim, cfg.pe_base)));
  return attention_core(input, input, params, cfg, trace);
}

Var cross_attention_module(const Var& q_feat, const Var& kv_feat, const AttentionParams& params,
                           const AttentionConfig& cfg, AttentionTrace* trace) {
  require_feature_map(q_feat, cfg, "cross_attention_module (Q)");
  require_feature_map(kv_feat, cfg, "cross_attention_module (K-V)");
  return attention_core(q_feat, kv_feat, params, cfg, trace);
}

Var feature_extraction_block(const Var& de, const FeatureBlockParams& params, const AttentionConfig& cfg,
                             AttentionTrace* trace) {
  const Tensor& D = de.value();
  if (D.rank() != 2 || D.rows() != kFeatureRows || D.cols() != params.channels()) {
    throw DimensionError("feature_extraction_block: DE matrix " + shape_string(D.shape()) +
                         " does not match projection " + shape_string(params.proj_w.shape()));
  }
  Var x = add_row(matmul(de, params.proj_w), params.proj_b);
  for (std::size_t i = 0; i < params.modules.size(); ++i) {
    const bool add_pe = i == 0 || cfg.pe_every_module;
    x = self_attention_module(x, params.modules[i], cfg, add_pe, trace);
  }
  return x;
}

Var global_average_pool(const Var& x) { return mean_rows(x); }

}  // namespace eegfest
