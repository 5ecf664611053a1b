#include "imd/run.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "imd/error.hpp"
#include "imd/numerics.hpp"
#include "imd/tensor_io.hpp"

namespace imd {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  try {
    return std::stoull(value);
  } catch (const std::out_of_range&) {
    throw ConfigError("config key '" + key + "': value out of range");
  }
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
  const std::uint64_t v = parse_u64(key, value);
  if (v > static_cast<std::uint64_t>(INT64_MAX)) throw ConfigError("config key '" + key + "': value out of range");
  return static_cast<std::int64_t>(v);
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::istringstream in(value);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(parse_u64(key, trim(cell)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) out += (i ? "," : "") + std::to_string(widths[i]);
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json rng_json(const Rng& rng) {
  return {{"seed", rng.seed()}, {"stream", rng.stream()}, {"position", rng.position()}};
}

Rng rng_from_json(const nlohmann::json& j) {
  return Rng::restore(j.at("seed").get<std::uint64_t>(), j.at("stream").get<std::uint64_t>(),
                      j.at("position").get<std::uint64_t>());
}

// Training-set row indices for one batch, uniform with replacement.
Tensor draw_batch(const Tensor& data, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.below(data.rows());
  return gather_rows(data, idx);
}

}  // namespace

void RunConfig::validate() const {
  if (dataset_path.empty()) {
    const auto& names = builtin_datasets();
    if (std::ranges::find(names, dataset.name) == names.end()) {
      throw ConfigError("unknown dataset '" + dataset.name + "'");
    }
    if (dataset.n < 1) throw ConfigError("n must be >= 1");
    if (!(dataset.std > 0.0)) throw ConfigError("data_std must be > 0");
    if (dataset.dim < 1) throw ConfigError("dim must be >= 1");
  }
  pairing.validate();
  if (batch < 1) throw ConfigError("batch must be >= 1");
  const bool assigns = pairing.method == PairingMethod::assignment ||
                       (pairing.method == PairingMethod::scaled && pairing.inner == PairingMethod::assignment);
  if (assigns && batch < 2) throw ConfigError("batch must be >= 2 for assignment pairing");
  if (timesteps < 1) throw ConfigError("timesteps must be >= 1");
  if (hidden.empty() || std::ranges::find(hidden, std::size_t{0}) != hidden.end()) {
    throw ConfigError("hidden widths must be positive");
  }
  if (time_embedding == 0 || time_embedding % 2 != 0) throw ConfigError("time_embedding must be even and > 0");
  if (!(optimizer.lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(optimizer.eps > 0.0)) throw ConfigError("eps must be > 0");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (eval_samples < 2) throw ConfigError("eval_samples must be >= 2");
  if (eval_reference < 2) throw ConfigError("eval_reference must be >= 2");
  if (projections < 1) throw ConfigError("projections must be >= 1");
  if (sampler_steps < 1 || sampler_steps > timesteps) throw ConfigError("sampler_steps must be in [1, timesteps]");
  if (out.empty()) throw ConfigError("out must not be empty");
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  o << "dataset = " << dataset.name << '\n'
    << "dataset_path = " << dataset_path << '\n'
    << "n = " << dataset.n << '\n'
    << "data_std = " << format_double(dataset.std) << '\n'
    << "dim = " << dataset.dim << '\n'
    << "pairing = " << to_string(pairing.method) << '\n'
    << "k = " << pairing.k << '\n'
    << "scale = " << format_double(pairing.scale) << '\n'
    << "inner = " << to_string(pairing.inner) << '\n'
    << "cost = " << to_string(pairing.cost) << '\n'
    << "schedule = " << to_string(schedule) << '\n'
    << "timesteps = " << timesteps << '\n'
    << "hidden = " << join_widths(hidden) << '\n'
    << "time_embedding = " << time_embedding << '\n'
    << "lr = " << format_double(optimizer.lr) << '\n'
    << "beta1 = " << format_double(optimizer.beta1) << '\n'
    << "beta2 = " << format_double(optimizer.beta2) << '\n'
    << "eps = " << format_double(optimizer.eps) << '\n'
    << "batch = " << batch << '\n'
    << "steps = " << steps << '\n'
    << "eval_every = " << eval_every << '\n'
    << "eval_samples = " << eval_samples << '\n'
    << "eval_reference = " << eval_reference << '\n'
    << "projections = " << projections << '\n'
    << "sampler_steps = " << sampler_steps << '\n'
    << "checkpoint_every = " << checkpoint_every << '\n'
    << "seed = " << seed << '\n'
    << "out = " << out << '\n';
  return o.str();
}

nlohmann::json RunConfig::to_json() const {
  return {{"dataset", dataset.name},
          {"dataset_path", dataset_path},
          {"n", dataset.n},
          {"data_std", dataset.std},
          {"dim", dataset.dim},
          {"pairing", imd::to_json(pairing)},
          {"pairing_tag", pairing.tag()},
          {"schedule", to_string(schedule)},
          {"timesteps", timesteps},
          {"hidden", hidden},
          {"time_embedding", time_embedding},
          {"lr", optimizer.lr},
          {"beta1", optimizer.beta1},
          {"beta2", optimizer.beta2},
          {"eps", optimizer.eps},
          {"batch", batch},
          {"steps", steps},
          {"eval_every", eval_every},
          {"eval_samples", eval_samples},
          {"eval_reference", eval_reference},
          {"projections", projections},
          {"sampler_steps", sampler_steps},
          {"checkpoint_every", checkpoint_every},
          {"seed", seed},
          {"out", out}};
}

std::string RunConfig::content_hash() const {
  RunConfig c = *this;
  c.seed = 0;
  c.out = "-";
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(c.to_text())));
  return buf;
}

std::string RunConfig::run_id() const { return "s" + std::to_string(seed) + "-" + content_hash(); }

ModelSpec RunConfig::model_spec(std::size_t data_dim) const {
  ModelSpec spec;
  spec.data_dim = data_dim;
  spec.hidden = hidden;
  spec.time_embedding = time_embedding;
  spec.target = schedule == ScheduleKind::flow_linear ? PredictionTarget::velocity : PredictionTarget::epsilon;
  return spec;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "dataset") c.dataset.name = value;
  else if (key == "dataset_path") c.dataset_path = value;
  else if (key == "n") c.dataset.n = parse_u64(key, value);
  else if (key == "data_std") c.dataset.std = parse_double(key, value);
  else if (key == "dim") c.dataset.dim = parse_u64(key, value);
  else if (key == "pairing") c.pairing.method = parse_pairing_method(value);
  else if (key == "k") c.pairing.k = parse_u64(key, value);
  else if (key == "scale") c.pairing.scale = parse_double(key, value);
  else if (key == "inner") c.pairing.inner = parse_pairing_method(value);
  else if (key == "cost") c.pairing.cost = parse_cost_metric(value);
  else if (key == "schedule") c.schedule = parse_schedule_kind(value);
  else if (key == "timesteps") c.timesteps = parse_u64(key, value);
  else if (key == "hidden") c.hidden = parse_widths(key, value);
  else if (key == "time_embedding") c.time_embedding = parse_u64(key, value);
  else if (key == "lr") c.optimizer.lr = parse_double(key, value);
  else if (key == "beta1") c.optimizer.beta1 = parse_double(key, value);
  else if (key == "beta2") c.optimizer.beta2 = parse_double(key, value);
  else if (key == "eps") c.optimizer.eps = parse_double(key, value);
  else if (key == "batch") c.batch = parse_u64(key, value);
  else if (key == "steps") c.steps = parse_i64(key, value);
  else if (key == "eval_every") c.eval_every = parse_i64(key, value);
  else if (key == "eval_samples") c.eval_samples = parse_u64(key, value);
  else if (key == "eval_reference") c.eval_reference = parse_u64(key, value);
  else if (key == "projections") c.projections = parse_u64(key, value);
  else if (key == "sampler_steps") c.sampler_steps = parse_u64(key, value);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_i64(key, value);
  else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "out") c.out = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> seen;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (std::ranges::find(seen, key) != seen.end()) {
      throw ConfigError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    seen.push_back(key);
    set_config_value(base, key, trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), std::move(base));
}

Tensor load_training_data(const RunConfig& config) {
  if (!config.dataset_path.empty()) {
    Tensor data = read_imdt(config.dataset_path);
    if (data.rank() != 2) throw IoError("dataset file must hold a 2-D tensor: " + config.dataset_path);
    return data;
  }
  Rng rng(config.seed, 10);
  return make_dataset(config.dataset, rng);
}

EvalSet make_eval_set(const RunConfig& config, const Tensor& data) {
  EvalSet set;
  if (config.dataset_path.empty()) {
    DatasetSpec spec = config.dataset;
    spec.n = config.eval_reference;
    Rng rng(config.seed, 11);
    set.reference = make_dataset(spec, rng);
  } else {
    set.reference = data;
  }
  Rng noise_rng(config.seed, 12);
  set.noise = gaussian_sample(noise_rng, {config.eval_samples, data.cols()});
  Rng dir_rng(config.seed, 13);
  set.directions = random_directions(config.projections, data.cols(), dir_rng);
  return set;
}

Tensor generate(const TrainState& state, const Tensor& noise, std::size_t sampler_steps) {
  Tensor samples = state.model.spec().target == PredictionTarget::velocity
                       ? sample_flow_euler(state.model, sampler_steps, noise)
                       : sample_ddim(state.model, state.schedule, sampler_steps, noise).samples;
  if (state.pairing.method == PairingMethod::scaled) samples = scale_images(samples, 1.0 / state.pairing.scale);
  return samples;
}

void save_checkpoint(const fs::path& stem, const TrainState& state, const RunConfig& config, const Rng& batch_rng) {
  const std::size_t p = state.model.parameters().size();
  std::vector<double> packed;
  packed.reserve(3 * p);
  packed.insert(packed.end(), state.model.parameters().begin(), state.model.parameters().end());
  packed.insert(packed.end(), state.adam_m.begin(), state.adam_m.end());
  packed.insert(packed.end(), state.adam_v.begin(), state.adam_v.end());
  fs::path imdt = stem, json = stem;
  imdt += ".imdt";
  json += ".json";
  write_imdt(imdt, Tensor({3, p}, std::move(packed)));
  nlohmann::json side = {{"step", state.step},
                         {"run_id", config.run_id()},
                         {"config_hash", config.content_hash()},
                         {"data_dim", state.model.spec().data_dim},
                         {"rng", rng_json(state.rng)},
                         {"batch_rng", rng_json(batch_rng)},
                         {"config", config.to_text()}};
  write_text(json, side.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".imdt" || stem.extension() == ".json") stem.replace_extension();
  fs::path imdt = stem, json = stem;
  imdt += ".imdt";
  json += ".json";
  if (!fs::exists(imdt) || !fs::exists(json)) throw IoError("missing checkpoint " + stem.string() + ".{imdt,json}");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_text(json));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint sidecar " + json.string() + ": " + e.what());
  }
  Checkpoint ck;
  try {
    ck.config = parse_run_config(side.at("config").get<std::string>());
    ck.run_id = side.at("run_id").get<std::string>();
    const std::size_t d = side.at("data_dim").get<std::size_t>();
    const Tensor packed = read_imdt(imdt);
    DenoiserModel model(ck.config.model_spec(d));
    const std::size_t p = model.parameters().size();
    if (packed.shape() != Shape{3, p}) {
      throw IoError("checkpoint " + imdt.string() + " has shape " + shape_string(packed.shape()) +
                    ", expected (3, " + std::to_string(p) + ")");
    }
    std::ranges::copy(packed.row(0), model.parameters().begin());
    ck.state = TrainState::create(std::move(model), make_schedule(ck.config.schedule, ck.config.timesteps),
                                  ck.config.pairing, ck.config.optimizer, rng_from_json(side.at("rng")));
    std::ranges::copy(packed.row(1), ck.state.adam_m.begin());
    std::ranges::copy(packed.row(2), ck.state.adam_v.begin());
    ck.state.step = side.at("step").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint sidecar " + json.string() + ": " + e.what());
  }
  return ck;
}

namespace {

bool try_reuse(const RunConfig& config, const fs::path& dir, RunResult& result) {
  const fs::path summary_path = dir / "summary.json";
  if (!fs::exists(summary_path)) return false;
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(read_text(summary_path));
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (summary.value("config_hash", "") != config.content_hash() || !summary.value("complete", false)) return false;
  result.sliced_wasserstein = read_history_jsonl(dir / "metrics.jsonl", "sliced_wasserstein");
  result.frechet = read_history_jsonl(dir / "metrics.jsonl", "frechet");
  result.loss = read_history_jsonl(dir / "metrics.jsonl", "loss");
  result.state = load_checkpoint(dir / "checkpoint").state;
  result.elapsed_seconds = summary.value("elapsed_seconds", 0.0);
  result.reused = true;
  return true;
}

}  // namespace

RunResult run_training(const RunConfig& config, const RunOptions& options) {
  config.validate();
  RunResult result;
  result.run_id = config.run_id();
  result.dir = fs::path(config.out) / result.run_id;
  if (options.reuse && try_reuse(config, result.dir, result)) return result;

  std::error_code ec;
  fs::create_directories(result.dir, ec);
  if (ec) throw IoError("cannot create run directory " + result.dir.string() + ": " + ec.message());
  write_text(result.dir / "config.txt", config.to_text());
  nlohmann::json resolved = config.to_json();
  resolved["run_id"] = result.run_id;
  resolved["config_hash"] = config.content_hash();
  write_text(result.dir / "config.resolved.json", resolved.dump(2) + "\n");
  std::error_code rm;
  fs::remove(result.dir / "summary.json", rm);

  const auto t0 = std::chrono::steady_clock::now();
  const Tensor data = load_training_data(config);
  if (data.rows() < 1) throw ConfigError("dataset is empty");

  Rng init_rng(config.seed, 1);
  DenoiserModel model = DenoiserModel::initialize(config.model_spec(data.cols()), init_rng);
  TrainState& state = result.state;
  state = TrainState::create(std::move(model), make_schedule(config.schedule, config.timesteps), config.pairing,
                             config.optimizer, Rng(config.seed, 2));
  Rng batch_rng(config.seed, 5);

  if (config.steps == 0) {
    save_checkpoint(result.dir / "checkpoint", state, config, batch_rng);
    write_text(result.dir / "metrics.jsonl", "");
  } else {
    const EvalSet eval = make_eval_set(config, data);
    const fs::path metrics_path = result.dir / "metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + metrics_path.string());

    double loss_sum = 0.0;
    std::int64_t loss_count = 0;
    for (std::int64_t s = 1; s <= config.steps; ++s) {
      loss_sum += train_step(state, draw_batch(data, config.batch, batch_rng));
      ++loss_count;
      if (s % config.eval_every == 0 || s == config.steps) {
        const Tensor samples = generate(state, eval.noise, config.sampler_steps);
        if (!samples.all_finite()) throw NumericalError("non-finite samples at step " + std::to_string(s));
        const double sw = sliced_wasserstein_along(samples, eval.reference, eval.directions);
        const double fd = frechet_gaussian_distance(samples, eval.reference);
        const double mean_loss = loss_sum / static_cast<double>(loss_count);
        loss_sum = 0.0;
        loss_count = 0;
        MetricHistory row_sw("sliced_wasserstein"), row_fd("frechet"), row_loss("loss");
        row_sw.add(s, sw);
        row_fd.add(s, fd);
        row_loss.add(s, mean_loss);
        metrics << history_jsonl(row_sw, result.run_id) << history_jsonl(row_fd, result.run_id)
                << history_jsonl(row_loss, result.run_id);
        metrics.flush();
        if (!metrics) throw IoError("write failed for " + metrics_path.string());
        result.sliced_wasserstein.add(s, sw);
        result.frechet.add(s, fd);
        result.loss.add(s, mean_loss);
        if (options.on_eval) options.on_eval(s, sw, mean_loss);
      }
      if (config.checkpoint_every > 0 && s % config.checkpoint_every == 0 && s != config.steps) {
        save_checkpoint(result.dir / ("checkpoint-" + std::to_string(s)), state, config, batch_rng);
      }
    }
    save_checkpoint(result.dir / "checkpoint", state, config, batch_rng);
  }

  result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json summary = {{"run_id", result.run_id},
                            {"config_hash", config.content_hash()},
                            {"steps", state.step},
                            {"pairing", config.pairing.tag()},
                            {"elapsed_seconds", result.elapsed_seconds},
                            {"complete", true}};
  if (!result.sliced_wasserstein.empty()) {
    const auto& pts = result.sliced_wasserstein.points();
    const auto best = std::ranges::min_element(pts, {}, [](const auto& p) { return p.second; });
    summary["best_sliced_wasserstein"] = best->second;
    summary["best_step"] = best->first;
    summary["final_sliced_wasserstein"] = pts.back().second;
    summary["final_frechet"] = result.frechet.points().back().second;
    summary["final_loss"] = result.loss.points().back().second;
  }
  write_text(result.dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

}  // namespace imd
