#pragma once

// Self-attention and cross-attention modules over 5 × d band feature maps.
//
// One module computes, for a Q source and a K-V source (identical for
// self-attention):
//
//   heads_h = softmax(Q_h K_hᵀ) V_h          Q = q W_q, K = kv W_k, V = kv W_v
//   M       = concat(heads) W_m
//   I_n     = LN(M + kv)
//   O_ff    = relu(I_n W_1 + b_1) W_2 + b_2
//   out     = LN(O_ff + kv)
//
// where LN normalizes over the whole matrix. The residual stream follows the
// K-V input. W_q, W_k and W_v are stored packed as d × d; columns
// [h·d_h, (h+1)·d_h) form head h's projection.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eegfest/tensor.hpp"

namespace eegfest {

struct AttentionConfig {
  std::size_t model_dim = 32;
  std::size_t heads = 8;
  std::size_t ff_dim = 64;
  double pe_base = 1000.0;
  // Divide QKᵀ by sqrt(d_h). Off by default: plain softmax(QKᵀ)V.
  bool scaled_attention = false;
  // Re-add the positional encoding before modules 2 and 3 as well.
  bool pe_every_module = false;

  void validate() const;
  std::size_t head_dim() const { return model_dim / heads; }
};

inline constexpr std::size_t kFeatureRows = 5;
inline constexpr std::size_t kStackedModules = 3;

struct NamedParam {
  std::string name;
  Var var;
};

struct AttentionParams {
  Var w_q, w_k, w_v;  // d × d, packed heads
  Var w_m;            // d × d
  Var w_1, b_1;       // d × d_ff, 1 × d_ff
  Var w_2, b_2;       // d_ff × d, 1 × d

  static AttentionParams init(const AttentionConfig& cfg, std::mt19937_64& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct FeatureBlockParams {
  Var proj_w;  // c × d
  Var proj_b;  // 1 × d
  std::array<AttentionParams, kStackedModules> modules;

  static FeatureBlockParams init(std::size_t channels, const AttentionConfig& cfg, std::mt19937_64& rng);
  std::size_t channels() const { return proj_w.value().rows(); }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Uniform in ±1/sqrt(fan_in) where fan_in is the row count.
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// PE(p, 2k) = sin(p / base^{2k/d}), PE(p, 2k+1) = cos(p / base^{2k/d}).
// Throws ConfigError for odd d.
Tensor positional_encoding(std::size_t positions, std::size_t dim, double base = 1000.0);

// Optional observer: attention probabilities of every head and the output of
// every normalization site, in evaluation order.
struct AttentionTrace {
  std::vector<Tensor> probabilities;
  std::vector<Tensor> normalized;
};

Var attention_core(const Var& q_source, const Var& kv_source, const AttentionParams& params,
                   const AttentionConfig& cfg, AttentionTrace* trace = nullptr);

Var self_attention_module(const Var& x, const AttentionParams& params, const AttentionConfig& cfg, bool add_pe,
                          AttentionTrace* trace = nullptr);

Var cross_attention_module(const Var& q_feat, const Var& kv_feat, const AttentionParams& params,
                           const AttentionConfig& cfg, AttentionTrace* trace = nullptr);

// D = De·W + b, then three stacked self-attention modules. `de` is 5 × c.
Var feature_extraction_block(const Var& de, const FeatureBlockParams& params, const AttentionConfig& cfg,
                             AttentionTrace* trace = nullptr);

// Mean over the band rows: 5 × d → 1 × d.
Var global_average_pool(const Var& x);

}  // namespace eegfest
