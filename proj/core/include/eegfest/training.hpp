#pragma once

// Losses, Adam, the warm-up schedule, feature-block pretraining, episodic
// training and subject-specific vigilance regression.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "eegfest/dataset.hpp"
#include "eegfest/model.hpp"
#include "eegfest/tensor.hpp"

namespace eegfest {

struct TrainConfig {
  std::size_t batch_size_train = 16;
  std::size_t batch_size_eval = 1;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double lr_start = 1e-5;
  double lr_end = 1e-4;
  std::size_t warmup_epochs = 10;
  std::size_t epochs_total = 50;
  // Stop after this many optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;
  double loss_weight_determination = 1.0;
  double loss_weight_classification = 1.0;
  bool freeze_feature_block = false;
  std::size_t pretrain_epochs = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

// −log softmax(logits)[target]. `logits` is 1 × n.
Var cross_entropy(const Var& logits, std::size_t target);
// sqrt(mean((pred − truth)²) + 1e-12).
Var rmse_loss(const Var& pred, const Var& truth);

// Linear from lr_start at epoch 0 to lr_end at epoch warmup−1, constant after.
double lr_schedule(double epoch, const TrainConfig& cfg);

class Adam {
 public:
  Adam(std::vector<Var> params, double beta1, double beta2, double eps = 1e-8);
  explicit Adam(std::vector<Var> params, const TrainConfig& cfg)
      : Adam(std::move(params), cfg.beta1, cfg.beta2, cfg.adam_eps) {}

  // Applies one bias-corrected update from the accumulated gradients.
  // Parameters without a gradient buffer are treated as having zero gradient.
  void step(double lr);
  std::size_t steps() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t step_ = 0;
};

struct LossRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_det = 0.0;
  double loss_cls = 0.0;
  double accuracy = 0.0;  // fraction of episodes in the step predicted correctly
};

void write_loss_csv(std::ostream& os, std::span<const LossRow> rows);

struct PretrainResult {
  FeatureBlockParams feature;
  // Accuracy of the temporary 3-class head on the pretraining pool.
  double head_accuracy = 0.0;
  std::vector<LossRow> curve;
};

// Trains a fresh copy of `init` plus a temporary linear 3-class head on the
// labeled pool with cross-entropy; the head is discarded. Zero epochs returns
// an unchanged copy. Throws UsageError for an empty pool.
PretrainResult pretrain_feature_block(const SamplePool& pool, const FeatureBlockParams& init,
                                      const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                      std::size_t epochs);

FeatureBlockParams clone(const FeatureBlockParams& p);
ModelParams clone(const ModelParams& p);

// Episode construction shared by training and evaluation.
// The query's own subject provides the driving support when the query is a
// driving sample; otherwise `support_subject` does. With
// `non_driving_support` set, a K-shot non-driving class from
// `non_driving_subject` is appended (determination-block ablation).
struct EpisodeRequest {
  std::size_t query_index = 0;
  std::uint32_t support_subject = 0;
  bool non_driving_support = false;
  std::uint32_t non_driving_subject = 0;
};

class EpisodeSampler {
 public:
  EpisodeSampler(const SamplePool& pool, std::size_t k_shot);

  const std::vector<std::uint32_t>& driving_subjects() const { return driving_subjects_; }
  const std::vector<std::uint32_t>& non_driving_subjects() const { return non_driving_subjects_; }

  // Support shots are drawn without replacement and never include the query.
  Episode sample(const EpisodeRequest& request, std::mt19937_64& rng) const;

 private:
  const SamplePool& pool_;
  std::size_t k_shot_;
  std::map<std::uint32_t, std::array<std::vector<std::size_t>, kClassCount>> by_subject_class_;
  std::vector<std::uint32_t> driving_subjects_;
  std::vector<std::uint32_t> non_driving_subjects_;
};

struct EpisodeLoss {
  Var total;
  double det = 0.0;
  double cls = 0.0;
  bool correct = false;
};

// Determination cross-entropy plus prototypical cross-entropy over
// softmax(−d). Non-driving queries contribute only the determination term
// unless a non-driving support class exists.
EpisodeLoss episode_loss(const Episode& episode, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                         const ModelParams& params);

struct TrainResult {
  std::vector<LossRow> curve;
  std::size_t steps = 0;

  std::vector<double> epoch_mean_losses() const;
};

using StepCallback = std::function<void(const LossRow&)>;

// Episodic training over `pool` (driving classes plus non-driving samples).
// One epoch visits every sample once as a query, in a seeded shuffled order,
// in batches of batch_size_train episodes.
TrainResult train_episodic(const SamplePool& pool, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                           ModelParams& params, const StepCallback& on_step = {});

struct VigilanceFold {
  std::size_t fold = 0;
  std::vector<std::size_t> test_indices;
  std::vector<double> truth;
  std::vector<double> prediction;
  double pcc = 0.0;
  double rmse = 0.0;
};

struct VigilanceModel {
  FeatureBlockParams feature;
  Var head_w;  // d × 1
  Var head_b;  // 1 × 1

  std::vector<Var> params() const;
  double predict(const DeFeature& de, const AttentionConfig& cfg) const;
};

struct VigilanceResult {
  std::vector<VigilanceFold> folds;
  std::vector<VigilanceModel> models;
  double pcc = 0.0;   // over the concatenated out-of-fold predictions
  double rmse = 0.0;
};

// One subject, k contiguous folds, a fresh model per fold. The head bias
// starts at the training-label mean.
VigilanceResult train_vigilance_regressor(const SamplePool& subject_samples, const ModelConfig& model_cfg,
                                          const TrainConfig& train_cfg, std::size_t folds = 5);

}  // namespace eegfest
