#include "eegfest/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "eegfest/errors.hpp"
#include "eegfest/evaluation.hpp"

namespace eegfest {

void TrainConfig::validate() const {
  if (batch_size_train == 0 || batch_size_eval == 0) throw ConfigError("batch sizes must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(lr_start >= 0.0) || !(lr_start <= lr_end)) throw ConfigError("need 0 <= lr_start <= lr_end");
  if (warmup_epochs < 1) throw ConfigError("warmup_epochs must be >= 1");
  if (loss_weight_determination < 0.0 || loss_weight_classification < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
}

Var cross_entropy(const Var& logits, std::size_t target) {
  const std::size_t n = logits.value().size();
  if (target >= n) {
    throw UsageError("cross_entropy: target " + std::to_string(target) + " outside " + std::to_string(n) +
                     " logits");
  }
  return scale(pick(log_softmax_rows(logits), target), -1.0);
}

Var rmse_loss(const Var& pred, const Var& truth) {
  if (pred.value().size() != truth.value().size()) {
    throw DimensionError("rmse_loss: " + shape_string(pred.shape()) + " vs " + shape_string(truth.shape()));
  }
  if (pred.value().empty()) throw DimensionError("rmse_loss: empty input");
  const Var diff = sub(pred, truth);
  return sqrt(add_scalar(mean(mul(diff, diff)), 1e-12));
}

double lr_schedule(double epoch, const TrainConfig& cfg) {
  if (!(epoch >= 0.0)) throw UsageError("lr_schedule: negative epoch");
  const double last = static_cast<double>(cfg.warmup_epochs) - 1.0;
  if (last <= 0.0 || epoch >= last) return cfg.lr_end;
  return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * epoch / last;
}

Adam::Adam(std::vector<Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step(double lr) {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const bool has = p.has_grad();
    auto m = m_[i].values();
    auto v = v_[i].values();
    auto w = p.mutable_value().values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = has ? p.grad()[j] : 0.0;
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

void write_loss_csv(std::ostream& os, std::span<const LossRow> rows) {
  os << "step,epoch,lr,loss_total,loss_det,loss_cls,accuracy\n";
  os.precision(9);
  for (const auto& r : rows) {
    os << r.step << ',' << r.epoch << ',' << r.lr << ',' << r.loss_total << ',' << r.loss_det << ',' << r.loss_cls
       << ',' << r.accuracy << '\n';
  }
}

namespace {

Var copy_param(const Var& v) { return parameter(v.value()); }

AttentionParams clone(const AttentionParams& p) {
  return {copy_param(p.w_q), copy_param(p.w_k), copy_param(p.w_v), copy_param(p.w_m),
          copy_param(p.w_1), copy_param(p.b_1), copy_param(p.w_2), copy_param(p.b_2)};
}

std::vector<Var> vars_of(const FeatureBlockParams& f) {
  std::vector<NamedParam> named;
  f.collect("feature", named);
  std::vector<Var> out;
  for (auto& n : named) out.push_back(n.var);
  return out;
}

void zero_all(const std::vector<Var>& vars) {
  for (auto v : vars) v.zero_grad();
}

std::size_t label_index(ClassLabel l) { return static_cast<std::size_t>(l); }

}  // namespace

FeatureBlockParams clone(const FeatureBlockParams& p) {
  FeatureBlockParams out;
  out.proj_w = copy_param(p.proj_w);
  out.proj_b = copy_param(p.proj_b);
  for (std::size_t i = 0; i < p.modules.size(); ++i) out.modules[i] = clone(p.modules[i]);
  return out;
}

ModelParams clone(const ModelParams& p) {
  ModelParams out;
  out.feature = clone(p.feature);
  out.ca_query = clone(p.ca_query);
  out.ca_support = clone(p.ca_support);
  out.det_w = copy_param(p.det_w);
  out.det_b = copy_param(p.det_b);
  return out;
}

PretrainResult pretrain_feature_block(const SamplePool& pool, const FeatureBlockParams& init,
                                      const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                      std::size_t epochs) {
  train_cfg.validate();
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].label) labeled.push_back(i);
  if (labeled.empty()) throw UsageError("pretraining needs a non-empty labeled pool");

  PretrainResult out;
  out.feature = clone(init);
  if (epochs == 0) return out;

  const auto& acfg = model_cfg.attention;
  std::mt19937_64 rng(train_cfg.seed ^ 0x5EEDull);
  const Var head_w = parameter(init_weight(acfg.model_dim, kClassCount, rng));
  const Var head_b = parameter(Tensor({1, kClassCount}, 0.0));
  std::vector<Var> vars = vars_of(out.feature);
  vars.push_back(head_w);
  vars.push_back(head_b);
  Adam adam(vars, train_cfg);

  auto logits_of = [&](const LabeledSample& s) {
    const Var pooled = global_average_pool(feature_extraction_block(de_input(s.de), out.feature, acfg));
    return add_row(matmul(pooled, head_w), head_b);
  };

  const std::size_t batch = train_cfg.batch_size_train;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(labeled.begin(), labeled.end(), rng);
    const double lr = lr_schedule(static_cast<double>(epoch), train_cfg);
    for (std::size_t start = 0; start < labeled.size(); start += batch) {
      const std::size_t end = std::min(labeled.size(), start + batch);
      const double w = 1.0 / static_cast<double>(end - start);
      zero_all(vars);
      LossRow row;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = pool[labeled[i]];
        const Var logits = logits_of(s);
        const Var loss = cross_entropy(logits, label_index(*s.label));
        backward(scale(loss, w));
        row.loss_cls += loss.item() * w;
        const auto& lv = logits.value();
        const auto arg = static_cast<std::size_t>(std::max_element(lv.values().begin(), lv.values().end()) -
                                                  lv.values().begin());
        row.accuracy += (arg == label_index(*s.label) ? 1.0 : 0.0) * w;
      }
      adam.step(lr);
      row.step = ++step;
      row.epoch = epoch;
      row.lr = lr;
      row.loss_total = row.loss_cls;
      out.curve.push_back(row);
    }
  }

  NoGradGuard guard;
  std::size_t correct = 0;
  for (auto i : labeled) {
    const Var logits = logits_of(pool[i]);
    const auto& lv = logits.value();
    const auto arg = static_cast<std::size_t>(std::max_element(lv.values().begin(), lv.values().end()) -
                                              lv.values().begin());
    correct += arg == label_index(*pool[i].label) ? 1 : 0;
  }
  out.head_accuracy = static_cast<double>(correct) / static_cast<double>(labeled.size());
  return out;
}

EpisodeSampler::EpisodeSampler(const SamplePool& pool, std::size_t k_shot) : pool_(pool), k_shot_(k_shot) {
  if (k_shot == 0) throw ConfigError("k_shot must be >= 1");
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].label) continue;
    by_subject_class_[pool[i].subject][label_index(*pool[i].label)].push_back(i);
  }
  for (const auto& [subject, classes] : by_subject_class_) {
    if (!classes[label_index(ClassLabel::NonDrowsy)].empty() || !classes[label_index(ClassLabel::Drowsy)].empty()) {
      driving_subjects_.push_back(subject);
    }
    if (!classes[label_index(ClassLabel::NonDriving)].empty()) non_driving_subjects_.push_back(subject);
  }
}

Episode EpisodeSampler::sample(const EpisodeRequest& request, std::mt19937_64& rng) const {
  if (request.query_index >= pool_.size()) throw UsageError("episode query index out of range");
  const auto& q = pool_[request.query_index];
  if (!q.label) throw LabelError("episode query has no class label");

  auto draw = [&](std::uint32_t subject, ClassLabel label) {
    const auto it = by_subject_class_.find(subject);
    std::vector<std::size_t> candidates;
    if (it != by_subject_class_.end()) {
      for (auto i : it->second[label_index(label)])
        if (i != request.query_index) candidates.push_back(i);
    }
    if (candidates.size() < k_shot_) {
      throw DataError("subject " + std::to_string(subject) + " has " + std::to_string(candidates.size()) + " " +
                      to_string(label) + " epochs, need " + std::to_string(k_shot_) + " support shots");
    }
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k_shot_; ++i) {
      std::uniform_int_distribution<std::size_t> pick_one(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick_one(rng)]);
    }
    std::vector<DeFeature> shots;
    for (std::size_t i = 0; i < k_shot_; ++i) shots.push_back(pool_[candidates[i]].de);
    return shots;
  };

  Episode ep;
  ep.query = q.de;
  ep.query_truth = q.label;
  ep.driving_truth = *q.label != ClassLabel::NonDriving;
  ep.query_subject = q.subject;
  const std::uint32_t subject = ep.driving_truth ? q.subject : request.support_subject;
  for (ClassLabel label : {ClassLabel::NonDrowsy, ClassLabel::Drowsy}) {
    ep.support.push_back(draw(subject, label));
    ep.support_labels.push_back(label);
  }
  if (request.non_driving_support) {
    ep.support.push_back(draw(request.non_driving_subject, ClassLabel::NonDriving));
    ep.support_labels.push_back(ClassLabel::NonDriving);
  }
  return ep;
}

EpisodeLoss episode_loss(const Episode& episode, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                         const ModelParams& params) {
  const ForwardResult r = forward(episode, model_cfg, params);
  EpisodeLoss out;
  Var total = constant(Tensor::scalar(0.0));
  if (model_cfg.use_determination_block) {
    const Var det = cross_entropy(r.driving_logits, episode.driving_truth ? kDrivingIndex : kNonDrivingIndex);
    out.det = det.item();
    total = add(total, scale(det, train_cfg.loss_weight_determination));
  }
  if (episode.query_truth) {
    const auto& labels = episode.support_labels;
    const auto it = std::find(labels.begin(), labels.end(), *episode.query_truth);
    if (it != labels.end()) {
      const Var logits = scale(concat_cols(r.distances), -1.0);
      const Var cls = cross_entropy(logits, static_cast<std::size_t>(it - labels.begin()));
      out.cls = cls.item();
      total = add(total, scale(cls, train_cfg.loss_weight_classification));
    }
    out.correct = r.prediction == *episode.query_truth;
  }
  out.total = total;
  return out;
}

std::vector<double> TrainResult::epoch_mean_losses() const {
  std::vector<double> sums, counts;
  for (const auto& r : curve) {
    if (r.epoch >= sums.size()) {
      sums.resize(r.epoch + 1, 0.0);
      counts.resize(r.epoch + 1, 0.0);
    }
    sums[r.epoch] += r.loss_total;
    counts[r.epoch] += 1.0;
  }
  std::vector<double> out;
  for (std::size_t e = 0; e < sums.size(); ++e)
    if (counts[e] > 0.0) out.push_back(sums[e] / counts[e]);
  return out;
}

TrainResult train_episodic(const SamplePool& pool, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                           ModelParams& params, const StepCallback& on_step) {
  model_cfg.validate();
  train_cfg.validate();
  EpisodeSampler sampler(pool, model_cfg.k_shot);
  if (sampler.driving_subjects().empty()) throw ConfigError("training pool holds no driving epochs");
  const bool need_nd_support = !model_cfg.use_determination_block;

  std::vector<std::size_t> queries;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].label) continue;
    if (*pool[i].label == ClassLabel::NonDriving && model_cfg.use_determination_block == false &&
        sampler.non_driving_subjects().empty()) {
      continue;
    }
    queries.push_back(i);
  }
  bool has[kClassCount] = {false, false, false};
  for (auto i : queries) has[label_index(*pool[i].label)] = true;
  if (!has[0] || !has[1]) throw ConfigError("training pool needs both driving classes");
  if (need_nd_support && sampler.non_driving_subjects().empty()) {
    throw ConfigError("training without the determination block needs non-driving epochs");
  }

  std::vector<Var> trainable;
  const auto feature_vars = params.feature_params();
  for (auto v : feature_vars) v.set_requires_grad(!train_cfg.freeze_feature_block);
  for (const auto& v : params.all_params())
    if (v.requires_grad()) trainable.push_back(v);
  Adam adam(trainable, train_cfg);

  std::mt19937_64 rng(train_cfg.seed);
  const auto& drivers = sampler.driving_subjects();
  const auto& nd_subjects = sampler.non_driving_subjects();
  std::uniform_int_distribution<std::size_t> pick_driver(0, drivers.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_nd(0, nd_subjects.empty() ? 0 : nd_subjects.size() - 1);

  TrainResult result;
  const std::size_t batch = train_cfg.batch_size_train;
  for (std::size_t epoch = 0; epoch < train_cfg.epochs_total; ++epoch) {
    std::shuffle(queries.begin(), queries.end(), rng);
    const double lr = lr_schedule(static_cast<double>(epoch), train_cfg);
    for (std::size_t start = 0; start < queries.size(); start += batch) {
      if (train_cfg.max_steps != 0 && result.steps >= train_cfg.max_steps) return result;
      const std::size_t end = std::min(queries.size(), start + batch);
      const double w = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      LossRow row;
      for (std::size_t i = start; i < end; ++i) {
        EpisodeRequest req;
        req.query_index = queries[i];
        req.support_subject = drivers[pick_driver(rng)];
        req.non_driving_support = need_nd_support;
        if (need_nd_support) req.non_driving_subject = nd_subjects[pick_nd(rng)];
        const Episode ep = sampler.sample(req, rng);
        const EpisodeLoss loss = episode_loss(ep, model_cfg, train_cfg, params);
        if (loss.total.requires_grad()) backward(scale(loss.total, w));
        row.loss_total += loss.total.item() * w;
        row.loss_det += loss.det * w;
        row.loss_cls += loss.cls * w;
        row.accuracy += (loss.correct ? 1.0 : 0.0) * w;
      }
      adam.step(lr);
      row.step = ++result.steps;
      row.epoch = epoch;
      row.lr = lr;
      result.curve.push_back(row);
      if (on_step) on_step(row);
    }
  }
  return result;
}

std::vector<Var> VigilanceModel::params() const {
  auto out = vars_of(feature);
  out.push_back(head_w);
  out.push_back(head_b);
  return out;
}

namespace {

Var vigilance_output(const VigilanceModel& m, const DeFeature& de, const AttentionConfig& cfg) {
  const Var pooled = global_average_pool(feature_extraction_block(de_input(de), m.feature, cfg));
  return add(matmul(pooled, m.head_w), m.head_b);
}

}  // namespace

double VigilanceModel::predict(const DeFeature& de, const AttentionConfig& cfg) const {
  NoGradGuard guard;
  return vigilance_output(*this, de, cfg).item();
}

VigilanceResult train_vigilance_regressor(const SamplePool& subject_samples, const ModelConfig& model_cfg,
                                          const TrainConfig& train_cfg, std::size_t folds) {
  model_cfg.validate();
  train_cfg.validate();
  for (const auto& s : subject_samples)
    if (!s.vigilance) throw LabelError("vigilance regression needs a vigilance label on every epoch");
  const auto fold_of = kfold_sessions(subject_samples.size(), folds);
  const auto& acfg = model_cfg.attention;
  const std::size_t channels = subject_samples.front().de.channels;

  VigilanceResult result;
  std::vector<double> all_truth, all_pred;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < subject_samples.size(); ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(i);

    std::mt19937_64 rng(model_cfg.seed + 7919 * f);
    VigilanceModel model;
    model.feature = FeatureBlockParams::init(channels, acfg, rng);
    model.head_w = parameter(Tensor({acfg.model_dim, 1}, 0.0));
    double label_mean = 0.0;
    for (auto i : train_idx) label_mean += *subject_samples[i].vigilance / static_cast<double>(train_idx.size());
    model.head_b = parameter(Tensor::scalar(label_mean));

    const auto vars = model.params();
    Adam adam(vars, train_cfg);
    std::mt19937_64 order(train_cfg.seed + 104729 * f);
    const std::size_t batch = train_cfg.batch_size_train;
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < train_cfg.epochs_total; ++epoch) {
      if (train_cfg.max_steps != 0 && steps >= train_cfg.max_steps) break;
      std::shuffle(train_idx.begin(), train_idx.end(), order);
      const double lr = lr_schedule(static_cast<double>(epoch), train_cfg);
      for (std::size_t start = 0; start < train_idx.size(); start += batch) {
        if (train_cfg.max_steps != 0 && steps >= train_cfg.max_steps) break;
        const std::size_t end = std::min(train_idx.size(), start + batch);
        std::vector<Var> preds;
        std::vector<double> truth;
        for (std::size_t i = start; i < end; ++i) {
          preds.push_back(vigilance_output(model, subject_samples[train_idx[i]].de, acfg));
          truth.push_back(*subject_samples[train_idx[i]].vigilance);
        }
        zero_all(vars);
        backward(rmse_loss(concat_cols(preds), constant(Tensor::row(truth))));
        adam.step(lr);
        ++steps;
      }
    }

    VigilanceFold fold;
    fold.fold = f;
    fold.test_indices = test_idx;
    for (auto i : test_idx) {
      fold.truth.push_back(*subject_samples[i].vigilance);
      fold.prediction.push_back(model.predict(subject_samples[i].de, acfg));
    }
    fold.rmse = rmse(fold.truth, fold.prediction);
    try {
      fold.pcc = pcc(fold.truth, fold.prediction);
    } catch (const MetricUndefined&) {
      fold.pcc = std::nan("");
    }
    all_truth.insert(all_truth.end(), fold.truth.begin(), fold.truth.end());
    all_pred.insert(all_pred.end(), fold.prediction.begin(), fold.prediction.end());
    result.folds.push_back(std::move(fold));
    result.models.push_back(std::move(model));
  }
  result.rmse = rmse(all_truth, all_pred);
  try {
    result.pcc = pcc(all_truth, all_pred);
  } catch (const MetricUndefined&) {
    result.pcc = std::nan("");
  }
  return result;
}

}  // namespace eegfest
