#include "eegfest/io.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "eegfest/errors.hpp"
#include "eegfest/evaluation.hpp"

namespace eegfest {

namespace fs = std::filesystem;

namespace {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    const auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& in, const char* what) : in_(in), what_(what) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw CorruptionError(std::string(what_) + " truncated at byte " + std::to_string(pos_) + " (need " +
                            std::to_string(n) + " more)");
    }
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  const char* what_;
  std::size_t pos_ = 0;
};

void expect_magic(ByteReader& r, const char* magic, const char* what) {
  if (r.remaining() < 4) throw FormatError(std::string(what) + ": file too short for magic");
  if (r.str(4) != magic) throw FormatError(std::string(what) + ": bad magic, expected '" + magic + "'");
  if (r.remaining() < 4) throw CorruptionError(std::string(what) + ": truncated before version");
  const auto version = r.le<std::uint32_t>();
  if (version != kFormatVersion) throw FormatError(std::string(what) + ": unsupported version " + std::to_string(version));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) {
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError(what + ": '" + s + "' is not a non-negative integer");
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(what + ": '" + s + "' is not a boolean");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- epochs -------------------------------------------------------------------

std::vector<std::uint8_t> encode_epoch(const EegEpoch& e) {
  e.validate();
  ByteWriter w;
  w.bytes("EEGE", 4);
  w.le<std::uint32_t>(kFormatVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(e.channels));
  w.f32(static_cast<float>(e.sample_rate));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(e.samples_per_channel));
  w.le<std::int8_t>(e.class_label ? static_cast<std::int8_t>(*e.class_label) : std::int8_t{-1});
  w.f32(e.vigilance ? static_cast<float>(*e.vigilance) : std::numeric_limits<float>::quiet_NaN());
  w.le<std::uint32_t>(e.subject_id);
  for (float s : e.samples) w.f32(s);
  return w.take();
}

EegEpoch decode_epoch(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "epoch file");
  expect_magic(r, "EEGE", "epoch file");
  EegEpoch e;
  e.channels = r.le<std::uint32_t>();
  e.sample_rate = r.f32();
  e.samples_per_channel = r.le<std::uint32_t>();
  const auto label = r.le<std::int8_t>();
  if (label < -1 || label > 2) throw FormatError("epoch file: label code " + std::to_string(label));
  if (label >= 0) e.class_label = static_cast<ClassLabel>(label);
  const float vig = r.f32();
  if (!std::isnan(vig)) e.vigilance = vig;
  e.subject_id = r.le<std::uint32_t>();
  const std::size_t n = e.channels * e.samples_per_channel;
  r.need(4 * n);
  e.samples.resize(n);
  for (auto& s : e.samples) s = r.f32();
  if (r.remaining() != 0) throw CorruptionError("epoch file: " + std::to_string(r.remaining()) + " trailing bytes");
  e.validate();
  return e;
}

void write_epoch(const fs::path& path, const EegEpoch& epoch) { write_file_atomic(path, encode_epoch(epoch)); }

EegEpoch read_epoch(const fs::path& path) { return decode_epoch(read_file(path)); }

EegEpoch read_epoch_csv(const fs::path& path, double sample_rate) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  const auto header = split(trim(line), ',');
  if (header.size() < 4 || header[0] != "subject" || header[1] != "label" || header[2] != "vigilance") {
    throw FormatError(path.string() + ": header must be subject,label,vigilance,ch0..chN");
  }
  const std::size_t channels = header.size() - 3;
  for (std::size_t c = 0; c < channels; ++c) {
    if (header[3 + c] != "ch" + std::to_string(c)) throw FormatError(path.string() + ": bad channel column " + header[3 + c]);
  }
  EegEpoch e;
  e.channels = channels;
  e.sample_rate = sample_rate;
  std::vector<std::vector<float>> cols(channels);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    const std::string where = path.string() + ":" + std::to_string(row + 2);
    if (cells.size() != header.size()) throw FormatError(where + ": expected " + std::to_string(header.size()) + " cells");
    if (row == 0) {
      e.subject_id = static_cast<std::uint32_t>(parse_uint(cells[0], where));
      if (!cells[1].empty()) e.class_label = class_label_from_string(cells[1]);
      if (!cells[2].empty()) {
        const double v = parse_double(cells[2], where);
        if (!std::isnan(v)) e.vigilance = v;
      }
    }
    for (std::size_t c = 0; c < channels; ++c) cols[c].push_back(static_cast<float>(parse_double(cells[3 + c], where)));
    ++row;
  }
  e.samples_per_channel = row;
  for (auto& c : cols) e.samples.insert(e.samples.end(), c.begin(), c.end());
  e.validate();
  return e;
}

void write_epoch_csv(const fs::path& path, const EegEpoch& e) {
  e.validate();
  std::ostringstream os;
  os << "subject,label,vigilance";
  for (std::size_t c = 0; c < e.channels; ++c) os << ",ch" << c;
  os << '\n';
  const std::string label = e.class_label ? std::to_string(static_cast<int>(*e.class_label)) : "";
  const std::string vig = e.vigilance ? fmt_double(*e.vigilance) : "";
  char buf[32];
  for (std::size_t t = 0; t < e.samples_per_channel; ++t) {
    os << e.subject_id << ',' << label << ',' << vig;
    for (std::size_t c = 0; c < e.channels; ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(e.samples[c * e.samples_per_channel + t]));
      os << ',' << buf;
    }
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

std::vector<EegEpoch> load_epoch_dir(const fs::path& dir, double csv_sample_rate) {
  if (!fs::is_directory(dir)) throw DataError("data directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".eege" || (ext == ".csv" && entry.path().filename() != "manifest.csv")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EegEpoch> out;
  out.reserve(files.size());
  for (const auto& f : files)
    out.push_back(f.extension() == ".eege" ? read_epoch(f) : read_epoch_csv(f, csv_sample_rate));
  return out;
}

// ---- checkpoints ----------------------------------------------------------------

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes("EEGF", 4);
  w.le<std::uint32_t>(ckpt.version);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  std::set<std::string> seen;
  for (const auto& t : ckpt.tensors) {
    if (!seen.insert(t.name).second) throw FormatError("duplicate tensor name '" + t.name + "'");
    if (t.name.size() > 0xFFFF) throw FormatError("tensor name too long");
    if (t.value.rank() > 0xFF) throw FormatError("tensor rank too large");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.value.rank()));
    for (auto d : t.value.shape()) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : t.value.values()) w.f32(static_cast<float>(v));
  }
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.config_echo.size()));
  w.bytes(ckpt.config_echo.data(), ckpt.config_echo.size());
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "checkpoint");
  expect_magic(r, "EEGF", "checkpoint");
  Checkpoint ckpt;
  const auto count = r.le<std::uint32_t>();
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(r.le<std::uint16_t>());
    if (!seen.insert(t.name).second) throw FormatError("checkpoint: duplicate tensor name '" + t.name + "'");
    const auto rank = r.le<std::uint8_t>();
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.le<std::uint32_t>();
      n *= d;
    }
    r.need(4 * n);
    std::vector<double> values(n);
    for (auto& v : values) v = r.f32();
    t.value = Tensor(std::move(shape), std::move(values));
    ckpt.tensors.push_back(std::move(t));
  }
  ckpt.config_echo = r.str(r.le<std::uint32_t>());
  if (r.remaining() != 0) throw CorruptionError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  return ckpt;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) { write_file_atomic(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("checkpoint " + path.string() + " does not exist");
  return decode_checkpoint(read_file(path));
}

Checkpoint capture(const std::vector<NamedParam>& params, std::string config_echo) {
  Checkpoint ckpt;
  ckpt.config_echo = std::move(config_echo);
  for (const auto& p : params) {
    Tensor t = p.var.value();
    for (auto& v : t.values()) v = static_cast<float>(v);
    ckpt.tensors.push_back({p.name, std::move(t)});
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, const std::vector<NamedParam>& params) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t.value;
  for (const auto& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + p.name + "'");
    if (it->second->shape() != p.var.shape()) {
      throw DimensionError("tensor '" + p.name + "': checkpoint shape " + shape_string(it->second->shape()) +
                           " does not match model shape " + shape_string(p.var.shape()));
    }
  }
  if (by_name.size() != params.size()) throw FormatError("checkpoint holds tensors the model does not have");
  for (const auto& p : params) {
    Var v = p.var;
    v.mutable_value() = *by_name.at(p.name);
  }
}

// ---- run configuration --------------------------------------------------------

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string join_profile(const SpectralProfile& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + fmt_double(p[i]);
  return s;
}

SpectralProfile parse_profile(const std::string& v, const std::string& what) {
  const auto parts = split(v, ',');
  if (parts.size() != kBandCount) throw ConfigError(what + ": expected " + std::to_string(kBandCount) + " band values");
  SpectralProfile p;
  for (std::size_t i = 0; i < kBandCount; ++i) p[i] = parse_double(parts[i], what);
  return p;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto sz = [&](std::string key, auto ref) {
      f.push_back({key, [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
                   [ref, key](RunConfig& c, const std::string& v) {
                     ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_uint(v, key));
                   }});
    };
    auto dbl = [&](std::string key, auto ref) {
      f.push_back({key, [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); },
                   [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_double(v, key); }});
    };
    auto flag = [&](std::string key, auto ref) {
      f.push_back({key, [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); },
                   [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_bool(v, key); }});
    };
    auto text = [&](std::string key, auto ref) {
      f.push_back({key, [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
                   [ref](RunConfig& c, const std::string& v) { ref(c) = v; }});
    };
    auto profile = [&](std::string key, auto ref) {
      f.push_back({key, [ref](const RunConfig& c) { return join_profile(ref(const_cast<RunConfig&>(c))); },
                   [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_profile(v, key); }});
    };

    sz("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
    text("out_dir", [](RunConfig& c) -> std::string& { return c.out_dir; });
    text("data.dir", [](RunConfig& c) -> std::string& { return c.data_dir; });
    text("checkpoint", [](RunConfig& c) -> std::string& { return c.checkpoint; });
    text("pretrained", [](RunConfig& c) -> std::string& { return c.pretrained; });

    sz("model.n_way", [](RunConfig& c) -> std::size_t& { return c.model.n_way; });
    sz("model.k_shot", [](RunConfig& c) -> std::size_t& { return c.model.k_shot; });
    f.push_back({"model.metric", [](const RunConfig& c) { return to_string(c.model.metric); },
                 [](RunConfig& c, const std::string& v) { c.model.metric = metric_from_string(v); }});
    flag("model.similarity_block", [](RunConfig& c) -> bool& { return c.model.use_similarity_block; });
    flag("model.determination_block", [](RunConfig& c) -> bool& { return c.model.use_determination_block; });
    flag("model.determination_vote", [](RunConfig& c) -> bool& { return c.model.determination_vote; });
    sz("model.dim", [](RunConfig& c) -> std::size_t& { return c.model.attention.model_dim; });
    sz("model.heads", [](RunConfig& c) -> std::size_t& { return c.model.attention.heads; });
    sz("model.ff_dim", [](RunConfig& c) -> std::size_t& { return c.model.attention.ff_dim; });
    dbl("model.pe_base", [](RunConfig& c) -> double& { return c.model.attention.pe_base; });
    flag("model.scaled_attention", [](RunConfig& c) -> bool& { return c.model.attention.scaled_attention; });
    flag("model.pe_every_module", [](RunConfig& c) -> bool& { return c.model.attention.pe_every_module; });

    sz("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size_train; });
    sz("train.batch_size_eval", [](RunConfig& c) -> std::size_t& { return c.train.batch_size_eval; });
    dbl("train.beta1", [](RunConfig& c) -> double& { return c.train.beta1; });
    dbl("train.beta2", [](RunConfig& c) -> double& { return c.train.beta2; });
    dbl("train.adam_eps", [](RunConfig& c) -> double& { return c.train.adam_eps; });
    dbl("train.lr_start", [](RunConfig& c) -> double& { return c.train.lr_start; });
    dbl("train.lr_end", [](RunConfig& c) -> double& { return c.train.lr_end; });
    sz("train.warmup_epochs", [](RunConfig& c) -> std::size_t& { return c.train.warmup_epochs; });
    sz("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs_total; });
    sz("train.max_steps", [](RunConfig& c) -> std::size_t& { return c.train.max_steps; });
    dbl("train.loss_weight_determination", [](RunConfig& c) -> double& { return c.train.loss_weight_determination; });
    dbl("train.loss_weight_classification", [](RunConfig& c) -> double& { return c.train.loss_weight_classification; });
    flag("train.freeze_feature_block", [](RunConfig& c) -> bool& { return c.train.freeze_feature_block; });
    sz("train.pretrain_epochs", [](RunConfig& c) -> std::size_t& { return c.train.pretrain_epochs; });

    profile("synth.non_drowsy", [](RunConfig& c) -> SpectralProfile& { return c.bench.non_drowsy; });
    profile("synth.drowsy", [](RunConfig& c) -> SpectralProfile& { return c.bench.drowsy; });
    profile("synth.non_driving", [](RunConfig& c) -> SpectralProfile& { return c.bench.non_driving; });
    sz("synth.channels", [](RunConfig& c) -> std::size_t& { return c.bench.channels; });
    dbl("synth.sample_rate", [](RunConfig& c) -> double& { return c.bench.sample_rate; });
    sz("synth.samples", [](RunConfig& c) -> std::size_t& { return c.bench.samples_per_channel; });
    sz("synth.train_driving_subjects", [](RunConfig& c) -> std::size_t& { return c.bench.train_driving_subjects; });
    sz("synth.train_non_driving_subjects", [](RunConfig& c) -> std::size_t& { return c.bench.train_non_driving_subjects; });
    sz("synth.eval_driving_subjects", [](RunConfig& c) -> std::size_t& { return c.bench.eval_driving_subjects; });
    sz("synth.eval_non_driving_subjects", [](RunConfig& c) -> std::size_t& { return c.bench.eval_non_driving_subjects; });
    sz("synth.epochs_per_class", [](RunConfig& c) -> std::size_t& { return c.bench.epochs_per_class; });
    sz("synth.non_driving_epochs", [](RunConfig& c) -> std::size_t& { return c.bench.non_driving_epochs; });
    dbl("synth.subject_band_jitter", [](RunConfig& c) -> double& { return c.bench.subject_band_jitter; });
    dbl("synth.non_driving_subject_jitter",
        [](RunConfig& c) -> double& { return c.bench.non_driving_subject_jitter; });
    dbl("synth.epoch_band_jitter", [](RunConfig& c) -> double& { return c.bench.epoch_band_jitter; });
    dbl("synth.non_driving_band_spread", [](RunConfig& c) -> double& { return c.bench.non_driving_band_spread; });

    f.push_back({"eval.shots",
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.eval_shots.size(); ++i) s += (i ? "," : "") + std::to_string(c.eval_shots[i]);
                   return s;
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.eval_shots.clear();
                   for (const auto& p : split(v, ',')) c.eval_shots.push_back(parse_uint(p, "eval.shots"));
                 }});
    sz("eval.trials", [](RunConfig& c) -> std::size_t& { return c.eval_trials; });

    sz("vigilance.subjects", [](RunConfig& c) -> std::size_t& { return c.vigilance.subjects; });
    sz("vigilance.epochs_per_subject", [](RunConfig& c) -> std::size_t& { return c.vigilance.epochs_per_subject; });
    sz("vigilance.folds", [](RunConfig& c) -> std::size_t& { return c.vigilance_folds; });
    dbl("vigilance.label_noise", [](RunConfig& c) -> double& { return c.vigilance.label_noise; });
    dbl("vigilance.sigmoid_gain", [](RunConfig& c) -> double& { return c.vigilance.sigmoid_gain; });
    return f;
  }();
  return table;
}

}  // namespace

void RunConfig::apply_seed() {
  model.seed = seed;
  train.seed = seed + 1;
  bench.seed = seed + 2;
  vigilance.seed = seed + 3;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (eval_shots.empty()) throw ConfigError("eval.shots is empty");
  for (auto k : eval_shots)
    if (k == 0 || k > kMaxShot) throw ConfigError("eval.shots entries must lie in [1, 20]");
  if (eval_trials == 0) throw ConfigError("eval.trials must be >= 1");
  if (vigilance_folds < 2) throw ConfigError("vigilance.folds must be >= 2");
  if (out_dir.empty()) throw ConfigError("out_dir is empty");
}

bool operator==(const RunConfig& a, const RunConfig& b) { return emit_config(a) == emit_config(b); }

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "config line " + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  cfg.apply_seed();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  const auto bytes = read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string emit_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::string model_echo(const ModelConfig& cfg) {
  RunConfig rc;
  rc.model = cfg;
  std::string out;
  for (const auto& f : fields())
    if (f.key.rfind("model.", 0) == 0) out += f.key + "=" + f.get(rc) + "\n";
  out += "model.seed=" + std::to_string(cfg.seed) + "\n";
  return out;
}

ModelConfig model_from_echo(const std::string& echo) {
  RunConfig rc;
  std::istringstream in(echo);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "model.seed") {
      rc.model.seed = parse_uint(value, key);
      continue;
    }
    if (key.rfind("model.", 0) != 0) continue;
    for (const auto& f : fields())
      if (f.key == key) f.set(rc, value);
  }
  return rc.model;
}

// ---- files -------------------------------------------------------------------

namespace {

void write_bytes_atomic(const fs::path& path, const char* data, std::size_t n) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(n));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
  write_bytes_atomic(path, contents.data(), contents.size());
}

void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& contents) {
  write_bytes_atomic(path, reinterpret_cast<const char*>(contents.data()), contents.size());
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void OutputLayout::create() const {
  fs::create_directories(checkpoints());
  fs::create_directories(reports());
  fs::create_directories(losscurves());
}

}  // namespace eegfest
