#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "imd/datasets.hpp"
#include "imd/diffusion.hpp"
#include "imd/eval.hpp"
#include "imd/pairing.hpp"

namespace imd {

/// Everything a training run depends on. Text form, one `key = value` per
/// line; `#` starts a comment; blank lines are ignored; keys are unique:
///
///   dataset          builtin name (two_moons, eight_gaussians, ...)
///   dataset_path     IMDT file; overrides `dataset` when non-empty
///   n, data_std, dim builtin dataset size, STD and image_blobs width
///   pairing          random | assignment | knn | scaled
///   k, scale, inner  KNN candidates, scaling factor, pairing under scaling
///   cost             l2 | sq_l2 (assignment)
///   schedule         ddpm_linear_beta | flow_linear; timesteps = T
///   hidden           comma list of hidden widths; time_embedding width
///   lr, beta1, beta2, eps                       Adam
///   batch, steps, eval_every, eval_samples, eval_reference,
///   projections, sampler_steps, checkpoint_every
///   seed, out
struct RunConfig {
  DatasetSpec dataset;
  std::string dataset_path;
  PairingConfig pairing;
  ScheduleKind schedule = ScheduleKind::ddpm_linear_beta;
  std::size_t timesteps = 1000;
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::size_t time_embedding = 32;
  AdamConfig optimizer;
  std::size_t batch = 256;
  std::int64_t steps = 20000;
  std::int64_t eval_every = 500;
  std::size_t eval_samples = 4096;
  std::size_t eval_reference = 4096;
  std::size_t projections = 128;
  std::size_t sampler_steps = 20;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::uint64_t seed = 0;
  std::string out = "runs";

  RunConfig() { dataset.n = 8192; }

  /// Throws ConfigError on any out-of-range field.
  void validate() const;

  /// Canonical text (every key, fixed order); parses back to an equal config.
  std::string to_text() const;
  nlohmann::json to_json() const;

  /// 16 hex digits of FNV-1a over the canonical text without seed and out.
  std::string content_hash() const;
  /// "s<seed>-<content_hash>".
  std::string run_id() const;

  ModelSpec model_spec(std::size_t data_dim) const;
};

/// Applies one key/value pair. Unknown keys and malformed values raise
/// ConfigError naming the key.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Parses the text grammar above on top of `base`.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Training data as configured: the IMDT file, or the builtin drawn from
/// stream 10 of the seed.
Tensor load_training_data(const RunConfig& config);

/// Fixed evaluation inputs derived from the seed alone, so every pairing
/// method is scored against the same reference, noise and directions.
struct EvalSet {
  Tensor reference;
  Tensor noise;
  Tensor directions;
};
EvalSet make_eval_set(const RunConfig& config, const Tensor& data);

/// Deterministic samples from `noise` in data units: DDIM for epsilon models,
/// Euler for velocity models; scaled pairing is undone by dividing by s.
Tensor generate(const TrainState& state, const Tensor& noise, std::size_t sampler_steps);

struct RunResult {
  std::string run_id;
  std::filesystem::path dir;
  MetricHistory sliced_wasserstein{"sliced_wasserstein"};
  MetricHistory frechet{"frechet"};
  MetricHistory loss{"loss"};
  TrainState state;
  double elapsed_seconds = 0.0;
  bool reused = false;
};

struct RunOptions {
  // Load a finished run with the same id and config instead of retraining.
  bool reuse = false;
  std::function<void(std::int64_t step, double sw, double loss)> on_eval;
};

/// Trains per `config` into <out>/<run_id>/:
///   config.txt            frozen canonical config (re-runnable)
///   config.resolved.json  the same as JSON plus run id and hash
///   metrics.jsonl         {"step","metric","value","run_id"} per evaluation
///   checkpoint[-<step>].imdt/.json   parameters and Adam moments (3 x P)
///                         with a sidecar holding step, hash and rng states
///   summary.json          final numbers and wall time
/// Streams per seed: 1 init, 2 pairing/timesteps, 5 batch indices, 10 data,
/// 11-13 evaluation. steps = 0 writes the initial checkpoint only.
RunResult run_training(const RunConfig& config, const RunOptions& options = {});

struct Checkpoint {
  TrainState state;
  RunConfig config;
  std::string run_id;
};

void save_checkpoint(const std::filesystem::path& stem, const TrainState& state, const RunConfig& config,
                     const Rng& batch_rng);
/// Accepts the .imdt path, the .json sidecar or the shared stem.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace imd
