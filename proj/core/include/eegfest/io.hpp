#pragma once

// Binary epoch and checkpoint containers, CSV ingestion, the flat run
// configuration and atomic file output.
//
// EEGE epoch file (little-endian):
//   "EEGE" | u32 version=1 | u32 c | f32 sample_rate | u32 T | i8 label (-1 absent)
//   | f32 vigilance (NaN absent) | u32 subject | c·T f32 samples, channel-major
//
// EEGF checkpoint (little-endian):
//   "EEGF" | u32 version=1 | u32 count
//   | count × { u16 name_len | name | u8 rank | rank × u32 dim | f32 values }
//   | u32 echo_len | echo (UTF-8)

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegfest/dataset.hpp"
#include "eegfest/model.hpp"
#include "eegfest/training.hpp"

namespace eegfest {

inline constexpr std::uint32_t kFormatVersion = 1;

// ---- epochs ---------------------------------------------------------------

std::vector<std::uint8_t> encode_epoch(const EegEpoch& epoch);
EegEpoch decode_epoch(const std::vector<std::uint8_t>& bytes);
void write_epoch(const std::filesystem::path& path, const EegEpoch& epoch);
EegEpoch read_epoch(const std::filesystem::path& path);

// One epoch per file: header `subject,label,vigilance,ch0,...,chN-1`, one row
// per time sample. Subject, label and vigilance are taken from the first row;
// empty label / vigilance cells mean absent.
EegEpoch read_epoch_csv(const std::filesystem::path& path, double sample_rate);
void write_epoch_csv(const std::filesystem::path& path, const EegEpoch& epoch);

// Every *.eege and *.csv file below `dir` in sorted path order.
std::vector<EegEpoch> load_epoch_dir(const std::filesystem::path& dir, double csv_sample_rate);

// ---- checkpoints ------------------------------------------------------------

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::uint32_t version = kFormatVersion;
  std::vector<NamedTensor> tensors;
  // Free-form key=value lines; carries the model config, step count and seed.
  std::string config_echo;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// FormatError on bad magic or version, CorruptionError on truncation or
// trailing bytes.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Values are rounded to f32 on capture.
Checkpoint capture(const std::vector<NamedParam>& params, std::string config_echo = {});
// Copies checkpoint tensors into `params` by name. Throws DimensionError
// naming the tensor on a shape mismatch and FormatError for missing or extra
// names.
void restore(const Checkpoint& ckpt, const std::vector<NamedParam>& params);

// ---- run configuration -----------------------------------------------------

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  BenchmarkSpec bench;
  VigilanceSpec vigilance;
  std::size_t vigilance_folds = 5;
  std::vector<std::size_t> eval_shots{1, 5, 10, 20};
  std::size_t eval_trials = 5;
  std::string data_dir;     // empty: use the synthetic benchmark
  std::string checkpoint;   // model checkpoint read by eval
  std::string pretrained;   // feature-block checkpoint read by train
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  RunConfig() { apply_seed(); }

  // Seeds every stochastic component from `seed`.
  void apply_seed();
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&);
};

// Flat `key = value` lines, `#` comments. Unknown keys and malformed values
// throw ConfigError naming the line. Component seeds are derived from `seed`.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Every key, one per line, in a fixed order.
std::string emit_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

// ModelConfig subset as key=value lines, for checkpoint echoes.
std::string model_echo(const ModelConfig& cfg);
// Reads the ModelConfig subset back; unknown keys in the echo are ignored.
ModelConfig model_from_echo(const std::string& echo);

// ---- files -----------------------------------------------------------------

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

struct OutputLayout {
  std::filesystem::path root;
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path losscurves() const { return root / "losscurves"; }
  void create() const;
};

}  // namespace eegfest
