#include "eegfest/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "eegfest/errors.hpp"

namespace eegfest {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b) +
                         " differ");
  }
}

std::size_t idx(ClassLabel c) { return static_cast<std::size_t>(c); }

constexpr std::array<ClassLabel, kClassCount> kClasses{ClassLabel::NonDrowsy, ClassLabel::Drowsy,
                                                       ClassLabel::NonDriving};

}  // namespace

double pcc(std::span<const double> truth, std::span<const double> pred) {
  require_same_length(truth.size(), pred.size(), "pcc");
  const std::size_t n = truth.size();
  if (n < 2) throw MetricUndefined("pcc needs at least two samples");
  double mt = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += truth[i];
    mp += pred[i];
  }
  mt /= static_cast<double>(n);
  mp /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = truth[i] - mt, b = pred[i] - mp;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw MetricUndefined("pcc of a constant vector is undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double rmse(std::span<const double> truth, std::span<const double> pred) {
  require_same_length(truth.size(), pred.size(), "rmse");
  if (truth.empty()) throw MetricUndefined("rmse of empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double r = pred[i] - truth[i];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(truth.size()));
}

std::optional<double> f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fp + fn == 0) return std::nullopt;
  return static_cast<double>(tp) / (static_cast<double>(tp) + 0.5 * static_cast<double>(fp + fn));
}

void ConfusionMatrix::add(ClassLabel truth, ClassLabel predicted) { ++counts_[idx(truth)][idx(predicted)]; }

std::size_t ConfusionMatrix::count(ClassLabel truth, ClassLabel predicted) const {
  return counts_[idx(truth)][idx(predicted)];
}

std::size_t ConfusionMatrix::tp(ClassLabel c) const { return count(c, c); }

std::size_t ConfusionMatrix::fp(ClassLabel c) const {
  std::size_t s = 0;
  for (auto t : kClasses)
    if (t != c) s += count(t, c);
  return s;
}

std::size_t ConfusionMatrix::fn(ClassLabel c) const {
  std::size_t s = 0;
  for (auto p : kClasses)
    if (p != c) s += count(c, p);
  return s;
}

std::size_t ConfusionMatrix::support(ClassLabel c) const {
  std::size_t s = 0;
  for (auto p : kClasses) s += count(c, p);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto c : kClasses) s += support(c);
  return s;
}

std::optional<double> ConfusionMatrix::accuracy(ClassLabel c) const {
  const auto n = support(c);
  if (n == 0) return std::nullopt;
  return static_cast<double>(tp(c)) / static_cast<double>(n);
}

std::optional<double> ConfusionMatrix::f1(ClassLabel c) const { return f1_score(tp(c), fp(c), fn(c)); }

std::optional<double> ConfusionMatrix::macro_f1() const {
  double s = 0.0;
  std::size_t n = 0;
  for (auto c : kClasses) {
    if (auto f = f1(c)) {
      s += *f;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

SplitPools split_subjects(const SamplePool& pool, std::span<const std::uint32_t> train_subjects,
                          std::span<const std::uint32_t> eval_subjects) {
  if (eval_subjects.empty()) throw ConfigError("evaluation subject set is empty");
  const std::set<std::uint32_t> train(train_subjects.begin(), train_subjects.end());
  const std::set<std::uint32_t> eval(eval_subjects.begin(), eval_subjects.end());
  for (auto s : eval) {
    if (train.count(s)) throw ConfigError("subject " + std::to_string(s) + " is in both training and evaluation");
  }
  SplitPools out;
  for (const auto& sample : pool) {
    if (train.count(sample.subject)) out.train.push_back(sample);
    else if (eval.count(sample.subject)) out.eval.push_back(sample);
  }
  return out;
}

std::vector<std::size_t> SupportPlan::support(std::uint32_t subject, ClassLabel label, std::size_t k) const {
  if (k > max_shot) throw ConfigError("requested " + std::to_string(k) + " shots, plan holds " + std::to_string(max_shot));
  const std::vector<std::size_t>* ranks = nullptr;
  if (label == ClassLabel::NonDriving) {
    const auto it = non_driving.find(subject);
    if (it != non_driving.end()) ranks = &it->second;
  } else {
    const auto it = driving.find(subject);
    if (it != driving.end()) ranks = &it->second[idx(label)];
  }
  if (!ranks) throw DataError("no support for subject " + std::to_string(subject) + " / " + to_string(label));
  return {ranks->begin(), ranks->begin() + static_cast<std::ptrdiff_t>(k)};
}

SupportPlan sample_support(const SamplePool& eval_pool, std::uint64_t seed, std::size_t max_shot) {
  if (max_shot == 0) throw ConfigError("max_shot must be >= 1");
  std::map<std::uint32_t, std::array<std::vector<std::size_t>, kClassCount>> groups;
  for (std::size_t i = 0; i < eval_pool.size(); ++i) {
    if (eval_pool[i].label) groups[eval_pool[i].subject][idx(*eval_pool[i].label)].push_back(i);
  }
  SupportPlan plan;
  plan.max_shot = max_shot;
  std::mt19937_64 rng(seed);
  std::vector<bool> reserved(eval_pool.size(), false);
  auto rank = [&](std::vector<std::size_t> members, std::uint32_t subject, ClassLabel label) {
    if (members.size() < max_shot) {
      throw DataError("subject " + std::to_string(subject) + " has " + std::to_string(members.size()) + " " +
                      to_string(label) + " epochs; " + std::to_string(max_shot) + " support samples required");
    }
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(max_shot);
    for (auto i : members) reserved[i] = true;
    return members;
  };
  for (auto& [subject, classes] : groups) {
    const bool driving = !classes[0].empty() || !classes[1].empty();
    if (driving) {
      auto& slot = plan.driving[subject];
      slot[0] = rank(classes[0], subject, ClassLabel::NonDrowsy);
      slot[1] = rank(classes[1], subject, ClassLabel::Drowsy);
    }
    if (!classes[2].empty()) plan.non_driving[subject] = rank(classes[2], subject, ClassLabel::NonDriving);
  }
  for (std::size_t i = 0; i < eval_pool.size(); ++i)
    if (eval_pool[i].label && !reserved[i]) plan.queries.push_back(i);
  return plan;
}

std::vector<std::size_t> kfold_sessions(std::size_t n, std::size_t k) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (n < k) throw DataError(std::to_string(n) + " epochs cannot form " + std::to_string(k) + " folds");
  std::vector<std::size_t> fold(n);
  const std::size_t base = n / k, extra = n % k;
  std::size_t i = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) fold[i++] = f;
  }
  return fold;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return {std::nan(""), std::nan("")};
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

namespace {

std::vector<Var> cache_feature_maps(const SamplePool& pool, const ModelConfig& cfg, const ModelParams& params) {
  NoGradGuard guard;
  std::vector<Var> maps;
  maps.reserve(pool.size());
  for (const auto& s : pool) {
    if (s.de.channels != params.channels()) {
      throw DimensionError("sample has " + std::to_string(s.de.channels) + " channels, model expects " +
                           std::to_string(params.channels()));
    }
    maps.push_back(feature_map(s.de, params, cfg));
  }
  return maps;
}

Var prototype(const std::vector<Var>& maps, const std::vector<std::size_t>& members) {
  std::vector<Var> parts;
  parts.reserve(members.size());
  for (auto i : members) parts.push_back(maps[i]);
  return parts.size() == 1 ? parts.front() : average(parts);
}

TrialMetrics evaluate_trial(const SamplePool& pool, const std::vector<Var>& maps, const SupportPlan& plan,
                            const ModelConfig& cfg, const ModelParams& params, std::size_t k) {
  NoGradGuard guard;
  std::vector<std::uint32_t> drivers, nd_subjects;
  for (const auto& [s, _] : plan.driving) drivers.push_back(s);
  for (const auto& [s, _] : plan.non_driving) nd_subjects.push_back(s);
  if (drivers.empty()) throw DataError("evaluation pool holds no driving subjects");
  const bool nd_support = !cfg.use_determination_block;
  if (nd_support && nd_subjects.empty()) throw DataError("ablation without determination needs non-driving subjects");

  std::map<std::tuple<std::uint32_t, int>, Var> protos;
  auto proto_of = [&](std::uint32_t subject, ClassLabel label) {
    const auto key = std::make_tuple(subject, static_cast<int>(label));
    auto it = protos.find(key);
    if (it == protos.end()) it = protos.emplace(key, prototype(maps, plan.support(subject, label, k))).first;
    return it->second;
  };

  TrialMetrics out;
  std::size_t nd_query_turn = 0, nd_support_turn = 0;
  for (auto q : plan.queries) {
    const auto& sample = pool[q];
    const ClassLabel truth = *sample.label;
    std::uint32_t subject = sample.subject;
    if (truth == ClassLabel::NonDriving) subject = drivers[nd_query_turn++ % drivers.size()];
    PairedFeatures pairs;
    pairs.query = maps[q];
    std::vector<ClassLabel> labels{ClassLabel::NonDrowsy, ClassLabel::Drowsy};
    pairs.prototypes = {proto_of(subject, ClassLabel::NonDrowsy), proto_of(subject, ClassLabel::Drowsy)};
    if (nd_support) {
      const auto nd = nd_subjects[nd_support_turn++ % nd_subjects.size()];
      pairs.prototypes.push_back(proto_of(nd, ClassLabel::NonDriving));
      labels.push_back(ClassLabel::NonDriving);
    }
    const ForwardResult r = forward_pairs(pairs, labels, cfg, params);
    out.confusion.add(truth, r.prediction);
  }
  for (auto c : kClasses) out.accuracy[idx(c)] = out.confusion.accuracy(c).value_or(std::nan(""));
  out.macro_f1 = out.confusion.macro_f1().value_or(0.0);
  return out;
}

std::string echo(const ModelConfig& cfg, std::size_t k, std::size_t trials, std::uint64_t seed) {
  std::ostringstream os;
  os << "k_shot=" << k << ";trials=" << trials << ";master_seed=" << seed << ";metric=" << to_string(cfg.metric)
     << ";similarity_block=" << cfg.use_similarity_block << ";determination_block=" << cfg.use_determination_block
     << ";determination_vote=" << cfg.determination_vote;
  return os.str();
}

EvalReport aggregate(std::vector<TrialMetrics> trials, std::size_t k) {
  EvalReport report;
  report.k_shot = k;
  for (auto c : kClasses) {
    std::vector<double> v;
    for (const auto& t : trials)
      if (!std::isnan(t.accuracy[idx(c)])) v.push_back(t.accuracy[idx(c)]);
    report.accuracy[idx(c)] = mean_std(v);
  }
  std::vector<double> f;
  for (const auto& t : trials) f.push_back(t.macro_f1);
  report.macro_f1 = mean_std(f);
  report.trials = std::move(trials);
  return report;
}

EvalReport run_cached(const SamplePool& pool, const std::vector<Var>& maps, const ModelConfig& cfg,
                      const ModelParams& params, std::size_t k, std::size_t trials, std::uint64_t seed) {
  if (k == 0 || k > kMaxShot) throw ConfigError("k_shot must be in [1, " + std::to_string(kMaxShot) + "]");
  if (trials == 0) throw ConfigError("need at least one trial");
  std::vector<TrialMetrics> rows;
  for (std::size_t t = 0; t < trials; ++t) {
    const SupportPlan plan = sample_support(pool, seed + 1000 * t);
    rows.push_back(evaluate_trial(pool, maps, plan, cfg, params, k));
  }
  EvalReport r = aggregate(std::move(rows), k);
  r.config_echo = echo(cfg, k, trials, seed);
  return r;
}

}  // namespace

EvalReport run_trials(const SamplePool& eval_pool, const ModelConfig& cfg, const ModelParams& params,
                      std::size_t k_shot, std::size_t trials, std::uint64_t master_seed) {
  cfg.validate();
  const auto maps = cache_feature_maps(eval_pool, cfg, params);
  return run_cached(eval_pool, maps, cfg, params, k_shot, trials, master_seed);
}

void write_report_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << "k_shot,trial,acc_non_drowsy,acc_drowsy,acc_non_driving,macro_f1\n";
  os << std::setprecision(9);
  for (const auto& r : reports) {
    for (std::size_t t = 0; t < r.trials.size(); ++t) {
      const auto& row = r.trials[t];
      os << r.k_shot << ',' << t << ',' << row.accuracy[0] << ',' << row.accuracy[1] << ',' << row.accuracy[2] << ','
         << row.macro_f1 << '\n';
    }
    os << r.k_shot << ",mean," << r.accuracy[0].mean << ',' << r.accuracy[1].mean << ',' << r.accuracy[2].mean << ','
       << r.macro_f1.mean << '\n';
    os << r.k_shot << ",std," << r.accuracy[0].std << ',' << r.accuracy[1].std << ',' << r.accuracy[2].std << ','
       << r.macro_f1.std << '\n';
  }
}

void write_report_table(std::ostream& os, std::span<const EvalReport> reports) {
  auto cell = [](const MeanStd& m) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << m.mean << " ± " << m.std;
    return s.str();
  };
  os << std::left << std::setw(8) << "Shot" << std::setw(16) << "Non-drowsy" << std::setw(16) << "Drowsy"
     << std::setw(16) << "Non-driving" << "F1 Score\n";
  for (const auto& r : reports) {
    os << std::setw(8) << (std::to_string(r.k_shot) + "-shot") << std::setw(18) << cell(r.accuracy[0])
       << std::setw(18) << cell(r.accuracy[1]) << std::setw(18) << cell(r.accuracy[2]) << cell(r.macro_f1) << '\n';
  }
  if (!reports.empty()) os << "# " << reports.front().config_echo << '\n';
}

AblationResult ablation_suite(const SamplePool& eval_pool, const ModelConfig& base, const ModelFactory& factory,
                              std::span<const std::size_t> shots, std::size_t trials, std::uint64_t seed) {
  base.validate();
  using Key = std::tuple<int, bool, bool>;
  std::map<Key, std::vector<EvalReport>> done;
  auto reports_for = [&](DistanceMetric m, bool sim, bool det) -> const std::vector<EvalReport>& {
    const Key key{static_cast<int>(m), sim, det};
    auto it = done.find(key);
    if (it != done.end()) return it->second;
    ModelConfig cfg = base;
    cfg.metric = m;
    cfg.use_similarity_block = sim;
    cfg.use_determination_block = det;
    const ModelParams params = factory(cfg);
    const auto maps = cache_feature_maps(eval_pool, cfg, params);
    std::vector<EvalReport> reports;
    for (auto k : shots) {
      ModelConfig at_k = cfg;
      at_k.k_shot = k;
      reports.push_back(run_cached(eval_pool, maps, at_k, params, k, trials, seed));
    }
    return done.emplace(key, std::move(reports)).first->second;
  };

  auto table = [&](std::string name, std::vector<std::string> columns) {
    AblationTable t;
    t.name = std::move(name);
    t.columns = std::move(columns);
    t.k_rows.assign(shots.begin(), shots.end());
    t.values.assign(shots.size(), std::vector<double>(t.columns.size(), 0.0));
    return t;
  };

  AblationResult out;
  std::vector<std::string> metric_names;
  for (auto m : kAllMetrics) metric_names.push_back(to_string(m));
  out.metric_non_drowsy = table("distance_metric_non_drowsy", metric_names);
  out.metric_drowsy = table("distance_metric_drowsy", metric_names);
  for (std::size_t c = 0; c < kAllMetrics.size(); ++c) {
    const auto& reps = reports_for(kAllMetrics[c], base.use_similarity_block, base.use_determination_block);
    for (std::size_t r = 0; r < shots.size(); ++r) {
      out.metric_non_drowsy.values[r][c] = reps[r].accuracy[idx(ClassLabel::NonDrowsy)].mean;
      out.metric_drowsy.values[r][c] = reps[r].accuracy[idx(ClassLabel::Drowsy)].mean;
    }
  }

  out.determination = table("determination_block", {"with", "without"});
  {
    const auto& with = reports_for(base.metric, base.use_similarity_block, true);
    const auto& without = reports_for(base.metric, base.use_similarity_block, false);
    for (std::size_t r = 0; r < shots.size(); ++r) {
      out.determination.values[r][0] = with[r].accuracy[idx(ClassLabel::NonDriving)].mean;
      out.determination.values[r][1] = without[r].accuracy[idx(ClassLabel::NonDriving)].mean;
    }
  }

  out.similarity = table("similarity_block",
                         {"with_non_drowsy", "with_drowsy", "without_non_drowsy", "without_drowsy"});
  {
    const auto& with = reports_for(base.metric, true, base.use_determination_block);
    const auto& without = reports_for(base.metric, false, base.use_determination_block);
    for (std::size_t r = 0; r < shots.size(); ++r) {
      out.similarity.values[r][0] = with[r].accuracy[idx(ClassLabel::NonDrowsy)].mean;
      out.similarity.values[r][1] = with[r].accuracy[idx(ClassLabel::Drowsy)].mean;
      out.similarity.values[r][2] = without[r].accuracy[idx(ClassLabel::NonDrowsy)].mean;
      out.similarity.values[r][3] = without[r].accuracy[idx(ClassLabel::Drowsy)].mean;
    }
  }
  return out;
}

void write_table_csv(std::ostream& os, const AblationTable& table) {
  os << "k_shot";
  for (const auto& c : table.columns) os << ',' << c;
  os << '\n' << std::setprecision(9);
  for (std::size_t r = 0; r < table.k_rows.size(); ++r) {
    os << table.k_rows[r];
    for (double v : table.values[r]) os << ',' << v;
    os << '\n';
  }
}

void write_table_text(std::ostream& os, const AblationTable& table) {
  os << table.name << '\n' << std::left << std::setw(8) << "Shot";
  for (const auto& c : table.columns) os << std::setw(20) << c;
  os << '\n';
  for (std::size_t r = 0; r < table.k_rows.size(); ++r) {
    os << std::setw(8) << (std::to_string(table.k_rows[r]) + "-shot");
    for (double v : table.values[r]) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << v;
      os << std::setw(20) << s.str();
    }
    os << '\n';
  }
}

}  // namespace eegfest
