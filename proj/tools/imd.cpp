// Command-line front end: dataset generation, training runs, diagnostics,
// k-sweeps, timing benchmarks and run reports.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 I/O error. IMD_OUTPUT_ROOT, when set, prefixes every relative output path.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imd/bench.hpp"
#include "imd/datasets.hpp"
#include "imd/diagnostics.hpp"
#include "imd/error.hpp"
#include "imd/eval.hpp"
#include "imd/numerics.hpp"
#include "imd/run.hpp"
#include "imd/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace imd;

namespace {

constexpr const char* kOutputRootEnv = "IMD_OUTPUT_ROOT";

fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  if (p.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) p = fs::path(root) / p;
  }
  return p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_doubles(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw ConfigError(flag + ": malformed number '" + cell + "'");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& flag, const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_doubles(flag, text)) {
    if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw ConfigError(flag + ": expected non-negative integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// Flags shared by every command.
struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "json";
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--config", c.config, "Run config file (key = value lines)");
  cmd->add_option("--seed", c.seed, "Seed for every random stream");
  if (!out_help.empty()) cmd->add_option("--out", c.out, out_help);
  cmd->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
}

// Writes <dir>/<stem>.<format> and echoes the JSON form on stdout.
void emit(const Common& c, const std::string& stem, const json& report, const std::string& csv) {
  const fs::path dir = resolve_out(c.out);
  const fs::path path = dir / (stem + (c.format == "csv" ? ".csv" : ".json"));
  write_file(path, c.format == "csv" ? csv : report.dump(2) + "\n");
  std::cout << report.dump() << "\n";
}

struct PairingFlags {
  std::string method = "random";
  std::size_t k = 8;
  double scale = 2.0;
  std::string inner = "random";
  std::string cost = "l2";

  void add(CLI::App* cmd) {
    cmd->add_option("--method", method, "random | assignment | knn | scaled");
    cmd->add_option("--k", k, "KNN candidates per image");
    cmd->add_option("--scale", scale, "Image scaling factor for scaled pairing");
    cmd->add_option("--inner", inner, "Pairing applied after scaling");
    cmd->add_option("--cost", cost, "Assignment cost: l2 | sq_l2");
  }

  PairingConfig config() const {
    PairingConfig p;
    p.method = parse_pairing_method(method);
    p.k = k;
    p.scale = scale;
    p.inner = parse_pairing_method(inner);
    p.cost = parse_cost_metric(cost);
    p.validate();
    return p;
  }
};

RunConfig load_config(const Common& c, const std::vector<std::string>& sets, bool seed_given, bool out_given) {
  RunConfig config = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed_given) config.seed = c.seed;
  if (out_given) config.out = c.out;
  config.out = resolve_out(config.out).string();
  config.validate();
  return config;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const Common& c, DatasetSpec spec, const std::string& path) {
  const auto& names = builtin_datasets();
  if (std::find(names.begin(), names.end(), spec.name) == names.end()) {
    throw ConfigError("unknown dataset '" + spec.name + "'");
  }
  Rng rng(c.seed, 10);  // the stream run_training uses for builtin data
  const Tensor data = make_dataset(spec, rng);
  const fs::path out = resolve_out(path);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_imdt(out, data);
  double mean = 0.0;
  for (double v : data.data()) mean += v;
  mean /= static_cast<double>(data.size());
  const json report = {{"op", "gen-data"}, {"dataset", spec.name}, {"path", out.string()},
                       {"shape", data.shape()}, {"seed", c.seed},   {"global_mean", mean}};
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::vector<std::string>& sets, bool seed_given, bool out_given, bool quiet) {
  const RunConfig config = load_config(c, sets, seed_given, out_given);
  RunOptions options;
  if (!quiet) {
    options.on_eval = [](std::int64_t step, double sw, double loss) {
      std::fprintf(stderr, "step %lld  sliced_wasserstein %.5f  loss %.5f\n", static_cast<long long>(step), sw, loss);
    };
  }
  const RunResult r = run_training(config, options);
  json report = {{"op", "train"}, {"run_id", r.run_id}, {"dir", r.dir.string()},
                 {"steps", r.state.step}, {"elapsed_seconds", r.elapsed_seconds}};
  if (!r.sliced_wasserstein.empty()) {
    report["best_sliced_wasserstein"] = r.sliced_wasserstein.best();
    report["final_sliced_wasserstein"] = r.sliced_wasserstein.points().back().second;
  }
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_miscibility(const Common& c, const PairingFlags& pf, std::size_t n_images, std::size_t m, std::size_t dim) {
  Rng rng(c.seed, 30);
  MiscibilityReport r = miscibility_score(pf.config(), n_images, m, dim, rng);
  json report = to_json(r);
  report["seed"] = c.seed;
  if (pf.method == "random") report["iid_expectation"] = iid_centroid_distance(m, dim);
  const std::string csv = "op,method,n_images,m,dim,seed,mean_centroid_distance,std_centroid_distance\n"
                          "miscibility," + r.method + "," + std::to_string(n_images) + "," + std::to_string(m) + "," +
                          std::to_string(dim) + "," + std::to_string(c.seed) + "," +
                          fmt(r.mean_centroid_distance) + "," + fmt(r.std_centroid_distance) + "\n";
  emit(c, "miscibility", report, csv);
  return 0;
}

int cmd_kl(const Common& c, const PairingFlags& pf, std::size_t samples, std::size_t dim, double data_std) {
  const PairingConfig config = pf.config();
  Rng rng(c.seed, 31);
  const MomentAccumulator acc = paired_noise_moments(config, samples, dim, data_std, rng);
  const double kl = kl_to_gaussian(acc);
  const json report = {{"op", "kl"},
                       {"config", {{"pairing", to_json(config)}, {"samples", samples}, {"dim", dim},
                                   {"data_std", data_std}}},
                       {"seed", c.seed},
                       {"method", config.tag()},
                       {"kl", kl}};
  const std::string csv = "op,method,samples,dim,seed,kl\nkl," + config.tag() + "," + std::to_string(samples) + "," +
                          std::to_string(dim) + "," + std::to_string(c.seed) + "," + fmt(kl) + "\n";
  emit(c, "kl", report, csv);
  return 0;
}

int cmd_perturb(const Common& c, const std::string& checkpoint, const std::string& weights, std::size_t n_pert,
                std::size_t samples, std::size_t sampler_steps, bool renormalize) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const std::size_t d = ck.state.model.spec().data_dim;
  if (n_pert < 1) throw ConfigError("--perturbations must be >= 1");
  if (samples < 2) throw ConfigError("--samples must be >= 2");
  if (sampler_steps < 1 || sampler_steps > ck.state.schedule.steps()) {
    throw ConfigError("--sampler-steps must be in [1, T]");
  }
  PerturbationSpec spec;
  spec.weights = parse_doubles("--weights", weights);
  spec.renormalize = renormalize;
  Rng rng(c.seed, 32);
  spec.base = gaussian_sample(rng, {samples, d});
  for (std::size_t p = 0; p < n_pert; ++p) spec.perturbations.push_back(gaussian_sample(rng, {samples, d}));
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const PerturbationReport r = perturbation_study(ck.state.model, ck.state.schedule, spec, sampler_steps);
  json report = to_json(r);
  report["config"] = {{"checkpoint", checkpoint}, {"run_id", ck.run_id}, {"samples", samples},
                      {"perturbations", n_pert}, {"sampler_steps", sampler_steps}};
  report["seed"] = c.seed;
  std::string csv = "weight,perturbation,deviation\n";
  for (const auto& row : r.rows) {
    csv += fmt(row.weight) + "," + std::to_string(row.perturbation) + "," + fmt(row.deviation) + "\n";
  }
  emit(c, "perturb", report, csv);
  return 0;
}

int cmd_project(const Common& c, const std::string& checkpoint, std::size_t trajectories, std::size_t sampler_steps) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (trajectories < 2) throw ConfigError("--trajectories must be >= 2");
  if (sampler_steps < 1 || sampler_steps > ck.state.schedule.steps()) {
    throw ConfigError("--sampler-steps must be in [1, T]");
  }
  Rng rng(c.seed, 33);
  const Tensor noise = gaussian_sample(rng, {trajectories, ck.state.model.spec().data_dim});
  const auto lines = project_x0_trajectories(ck.state.model, ck.state.schedule, noise, sampler_steps);
  const std::int64_t crossings = crossing_count(lines);
  json coords = json::array();
  std::string csv = "trajectory,step,x,y\n";
  for (std::size_t t = 0; t < lines.size(); ++t) {
    coords.push_back(lines[t]);
    for (std::size_t s = 0; s < lines[t].size(); ++s) {
      csv += std::to_string(t) + "," + std::to_string(s) + "," + fmt(lines[t][s][0]) + "," + fmt(lines[t][s][1]) + "\n";
    }
  }
  const json report = {{"op", "project"},
                       {"config", {{"checkpoint", checkpoint}, {"run_id", ck.run_id},
                                   {"trajectories", trajectories}, {"sampler_steps", sampler_steps}}},
                       {"seed", c.seed},
                       {"crossings", crossings},
                       {"coordinates", coords}};
  emit(c, "project", report, csv);
  return 0;
}

int cmd_sweep_k(const Common& c, const std::string& grid, std::size_t n, std::size_t dim, double data_std,
                const std::string& train_config, const std::vector<std::string>& sets) {
  const std::vector<std::size_t> ks = grid.empty() ? default_k_grid() : parse_sizes("--k-grid", grid);
  if (ks.empty()) throw ConfigError("--k-grid: empty grid");
  DatasetSpec spec;
  spec.name = "image_blobs";
  spec.n = n;
  spec.dim = dim;
  spec.std = data_std;
  Rng rng(c.seed, 34);
  const Tensor images = make_dataset(spec, rng);

  std::function<std::optional<std::int64_t>(std::size_t)> train;
  std::optional<double> threshold;
  if (!train_config.empty()) {
    Common tc = c;
    tc.config = train_config;
    RunConfig base = load_config(tc, sets, true, false);
    // Threshold: best sliced Wasserstein of the k = 1 run (plain random pairing).
    train = [base, &threshold](std::size_t k) -> std::optional<std::int64_t> {
      RunConfig rc = base;
      rc.pairing.method = k == 1 ? PairingMethod::random : PairingMethod::knn;
      rc.pairing.k = k;
      RunOptions opts;
      opts.reuse = true;
      const RunResult r = run_training(rc, opts);
      if (!threshold) threshold = r.sliced_wasserstein.best();
      return steps_to_threshold(r.sliced_wasserstein, *threshold);
    };
  }
  std::vector<SweepRow> rows;
  try {
    rows = sweep_k(images, ks, rng, train);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  json report = {{"op", "sweep_k"},
                 {"config", {{"n", n}, {"dim", dim}, {"data_std", data_std}, {"k_grid", ks}}},
                 {"seed", c.seed},
                 {"rows", json::array()}};
  std::string csv = "k,mean_distance,delta_percent,steps_to_threshold\n";
  for (const auto& r : rows) {
    report["rows"].push_back(to_json(r));
    csv += std::to_string(r.k) + "," + fmt(r.mean_distance) + "," + fmt(r.delta_percent) + "," +
           (r.steps_to_threshold ? std::to_string(*r.steps_to_threshold) : "") + "\n";
  }
  emit(c, "sweep_k", report, csv);
  return 0;
}

int cmd_bench(const Common& c, const std::string& methods_text, const std::string& grid, std::size_t dim,
              std::size_t repeats, std::size_t knn_k, unsigned threads) {
  std::vector<PairingMethod> methods;
  std::istringstream in(methods_text);
  for (std::string m; std::getline(in, m, ',');) methods.push_back(parse_pairing_method(m));
  const std::vector<std::size_t> sizes = parse_sizes("--grid", grid);
  if (repeats < 5) throw ConfigError("--repeats must be >= 5, got " + std::to_string(repeats));
  if (threads < 1) throw ConfigError("--threads must be >= 1");
  Rng rng(c.seed, 35);
  BenchOptions opts;
  opts.knn_k = knn_k;
  opts.threads = threads;
  std::vector<TimingRow> rows;
  try {
    rows = time_pairing(methods, sizes, dim, repeats, rng, opts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  json metadata = {{"d", dim},
                   {"repeats", repeats},
                   {"warmups", kWarmups},
                   {"knn_k", knn_k},
                   {"threads", threads},
                   {"seed", c.seed},
                   {"timer_resolution_ms", timer_resolution_ms()},
                   {"knn_includes_noise_sampling", true},
                   {"assignment_includes_cost_matrix", true}};
  json slopes = json::object();
  for (PairingMethod m : methods) {
    if (sizes.size() >= 2) slopes[to_string(m)] = loglog_slope(rows, to_string(m));
  }
  metadata["loglog_slopes"] = slopes;
  const fs::path dir = resolve_out(c.out);
  ensure_dir(dir);
  emit_timing_report(rows, dir / "timing", metadata);
  json report = {{"op", "bench"}, {"metadata", metadata}, {"rows", json::array()}};
  for (const auto& r : rows) report["rows"].push_back(to_json(r));
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_report(const Common& c, const std::vector<std::string>& runs, const std::string& vanilla,
               const std::string& metric) {
  if (runs.empty() && vanilla.empty()) throw ConfigError("report: pass --run DIR (and optionally --vanilla DIR)");
  json report = {{"op", "report"}, {"metric", metric}, {"runs", json::array()}};
  std::string csv = "run_id,steps,best_value,best_step,final_value,speedup_vs_vanilla\n";
  std::optional<MetricHistory> base;
  if (!vanilla.empty()) base = read_history_jsonl(fs::path(vanilla) / "metrics.jsonl", metric);
  if (base && base->empty()) throw IoError("report: no '" + metric + "' rows in " + vanilla);
  for (const auto& dir : runs) {
    const MetricHistory h = read_history_jsonl(fs::path(dir) / "metrics.jsonl", metric);
    if (h.empty()) throw IoError("report: no '" + metric + "' rows in " + dir);
    const auto& pts = h.points();
    const auto best = std::min_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.second < b.second; });
    const std::string run_id = fs::path(dir).filename().string();
    json row = {{"run_id", run_id},
                {"steps", pts.back().first},
                {"best_value", best->second},
                {"best_step", best->first},
                {"final_value", pts.back().second}};
    std::string speed;
    if (base) {
      const auto ratio = speedup_ratio(*base, h);
      row["speedup_vs_vanilla"] = ratio ? json(*ratio) : json();
      row["vanilla_threshold"] = base->best();
      if (ratio) speed = fmt(*ratio);
    }
    report["runs"].push_back(row);
    csv += run_id + "," + std::to_string(pts.back().first) + "," + fmt(best->second) + "," +
           std::to_string(best->first) + "," + fmt(pts.back().second) + "," + speed + "\n";
  }
  emit(c, "report", report, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Immiscible-diffusion desk toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "imd 1.0");

  // gen-data
  Common gen_c;
  DatasetSpec gen_spec;
  std::string gen_path;
  auto* gen = app.add_subcommand("gen-data", "Write a builtin dataset as an IMDT file");
  add_common(gen, gen_c, "");
  gen->add_option("--name", gen_spec.name, "two_moons | eight_gaussians | checkerboard | swiss_roll_2d | image_blobs")
      ->required();
  gen->add_option("--n", gen_spec.n, "Rows");
  gen->add_option("--std", gen_spec.std, "STD after standardisation");
  gen->add_option("--dim", gen_spec.dim, "Width for image_blobs");
  gen->add_option("--out", gen_path, "Output IMDT file")->required();

  // train
  Common train_c;
  std::vector<std::string> train_sets;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Run a configured training job");
  add_common(train, train_c, "Output root; the run lands in <out>/<run_id>");
  train->add_option("--set", train_sets, "Override a config key (key=value), repeatable");
  train->add_flag("--quiet", quiet, "No progress on stderr");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Diagnostics: miscibility, kl, perturb, project");
  diag->require_subcommand(1);

  Common mis_c;
  PairingFlags mis_p;
  std::size_t mis_images = 16, mis_m = 10000, mis_dim = 3072;
  auto* mis = diag->add_subcommand("miscibility", "Noise-cluster centroid distance");
  add_common(mis, mis_c, "Report directory");
  mis_p.add(mis);
  mis->add_option("--n-images", mis_images, "Fixed images");
  mis->add_option("--m", mis_m, "Noises accumulated per image");
  mis->add_option("--dim", mis_dim, "Image width");

  Common kl_c;
  PairingFlags kl_p;
  std::size_t kl_samples = 50000, kl_dim = 3072;
  double kl_std = 0.5;
  auto* kl = diag->add_subcommand("kl", "Moment-matched KL of paired noise to N(0, I)");
  add_common(kl, kl_c, "Report directory");
  kl_p.add(kl);
  kl->add_option("--samples", kl_samples, "Noise rows");
  kl->add_option("--dim", kl_dim, "Image width");
  kl->add_option("--data-std", kl_std, "Image STD");

  Common pert_c;
  std::string pert_ckpt, pert_weights = "0,0.1,0.2,0.3";
  std::size_t pert_n = 10, pert_samples = 512, pert_steps = 20;
  bool pert_renorm = false;
  auto* pert = diag->add_subcommand("perturb", "Sample deviation under N_orig + W N_pert");
  add_common(pert, pert_c, "Report directory");
  pert->add_option("--checkpoint", pert_ckpt, "Checkpoint (.imdt, .json or stem)")->required();
  pert->add_option("--weights", pert_weights, "Comma list of W, must include 0");
  pert->add_option("--perturbations", pert_n, "Independent perturbation draws");
  pert->add_option("--samples", pert_samples, "Noise rows per draw");
  pert->add_option("--sampler-steps", pert_steps, "Deterministic sampler steps");
  pert->add_flag("--renormalize", pert_renorm, "Divide the mixed noise by sqrt(1 + W^2)");

  Common proj_c;
  std::string proj_ckpt;
  std::size_t proj_traj = 128, proj_steps = 20;
  auto* proj = diag->add_subcommand("project", "PCA of predicted-x0 trajectories and crossing count");
  add_common(proj, proj_c, "Report directory");
  proj->add_option("--checkpoint", proj_ckpt, "Checkpoint (.imdt, .json or stem)")->required();
  proj->add_option("--trajectories", proj_traj, "Trajectories");
  proj->add_option("--sampler-steps", proj_steps, "DDIM steps");

  // sweep-k
  Common sweep_c;
  std::string sweep_grid, sweep_train;
  std::vector<std::string> sweep_sets;
  std::size_t sweep_n = 4096, sweep_dim = 3072;
  double sweep_std = 0.5;
  auto* sweep = app.add_subcommand("sweep-k", "Image-noise distance change vs k");
  add_common(sweep, sweep_c, "Report directory");
  sweep->add_option("--k-grid", sweep_grid, "Comma list, ascending, starting at 1 (default 1,2,...,128)");
  sweep->add_option("--n", sweep_n, "Images");
  sweep->add_option("--dim", sweep_dim, "Image width");
  sweep->add_option("--data-std", sweep_std, "Image STD");
  sweep->add_option("--train-config", sweep_train, "Also train per k and record steps to the k=1 best");
  sweep->add_option("--set", sweep_sets, "Override a training config key, repeatable");

  // bench
  Common bench_c;
  std::string bench_methods = "assignment,knn", bench_grid = "128,256,512,1024";
  std::size_t bench_dim = 3072, bench_repeats = 5, bench_k = 8;
  unsigned bench_threads = 1;
  auto* bench = app.add_subcommand("bench", "Pairing wall-clock timing");
  add_common(bench, bench_c, "Report directory (timing.csv, timing.json)");
  bench->add_option("--methods", bench_methods, "Comma list of pairing methods");
  bench->add_option("--grid", bench_grid, "Comma list of batch sizes");
  bench->add_option("--dim", bench_dim, "Point width");
  bench->add_option("--repeats", bench_repeats, "Timed repeats (>= 5)");
  bench->add_option("--knn-k", bench_k, "KNN candidates");
  bench->add_option("--threads", bench_threads, "KNN selection threads");

  // report
  Common rep_c;
  std::vector<std::string> rep_runs;
  std::string rep_vanilla, rep_metric = "sliced_wasserstein";
  auto* rep = app.add_subcommand("report", "Summarise run directories and speedups");
  add_common(rep, rep_c, "Report directory");
  rep->add_option("--run", rep_runs, "Run directory, repeatable");
  rep->add_option("--vanilla", rep_vanilla, "Baseline run directory for speedup ratios");
  rep->add_option("--metric", rep_metric, "Metric name in metrics.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gen_c, gen_spec, gen_path);
    if (*train) {
      return cmd_train(train_c, train_sets, train->count("--seed") > 0, train->count("--out") > 0, quiet);
    }
    if (*mis) return cmd_miscibility(mis_c, mis_p, mis_images, mis_m, mis_dim);
    if (*kl) return cmd_kl(kl_c, kl_p, kl_samples, kl_dim, kl_std);
    if (*pert) return cmd_perturb(pert_c, pert_ckpt, pert_weights, pert_n, pert_samples, pert_steps, pert_renorm);
    if (*proj) return cmd_project(proj_c, proj_ckpt, proj_traj, proj_steps);
    if (*sweep) return cmd_sweep_k(sweep_c, sweep_grid, sweep_n, sweep_dim, sweep_std, sweep_train, sweep_sets);
    if (*bench) return cmd_bench(bench_c, bench_methods, bench_grid, bench_dim, bench_repeats, bench_k, bench_threads);
    if (*rep) return cmd_report(rep_c, rep_runs, rep_vanilla, rep_metric);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
