// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every selected criterion was evaluated and passed,
// 1 when one failed, and 3 when a criterion could not be evaluated. With
// --report-only a failing criterion still exits 0, so measured shortfalls
// are reported without breaking the build.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imd/bench.hpp"
#include "imd/datasets.hpp"
#include "imd/diagnostics.hpp"
#include "imd/diffusion.hpp"
#include "imd/eval.hpp"
#include "imd/numerics.hpp"
#include "imd/pairing.hpp"
#include "imd/run.hpp"

using namespace imd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
  json data = json::object();
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

PairingConfig pairing(PairingMethod method, std::size_t k = 1) {
  PairingConfig c;
  c.method = method;
  c.k = k;
  return c;
}

// ---------------------------------------------------------------------------
// Shared toy training runs, cached by run id under the runs directory.

struct ToyRuns {
  fs::path root;
  std::map<std::string, RunResult> cache;

  RunConfig config(const std::string& name, std::uint64_t seed) const {
    RunConfig c;
    c.seed = seed;
    c.out = (root / "train").string();
    if (name == "assignment") {
      c.pairing.method = PairingMethod::assignment;
    } else if (name == "knn4") {
      c.pairing = pairing(PairingMethod::knn, 4);
    } else if (name == "scaled2") {
      // STD-0.5 data trained at STD 1.0, then divided back for evaluation.
      c.pairing.method = PairingMethod::scaled;
      c.pairing.scale = 2.0;
      c.pairing.inner = PairingMethod::random;
    } else if (name != "random") {
      throw std::logic_error("unknown toy run " + name);
    }
    return c;
  }

  const RunResult& get(const std::string& name, std::uint64_t seed) {
    const std::string key = name + "/" + std::to_string(seed);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    RunOptions opts;
    opts.reuse = true;
    const RunConfig c = config(name, seed);
    std::cerr << "  run " << key << " (" << c.run_id() << ")" << std::flush;
    RunResult r = run_training(c, opts);
    std::cerr << (r.reused ? " reused" : " trained") << " in " << fmt(r.elapsed_seconds) << " s\n";
    return cache.emplace(key, std::move(r)).first->second;
  }
};

// ---------------------------------------------------------------------------

Outcome assignment_optimality() {
  const auto t0 = Clock::now();
  Rng rng(0, 40);
  std::size_t checked = 0, mismatches = 0, ties = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(4);
    const Tensor a = gaussian_sample(rng, {n, d}), b = gaussian_sample(rng, {n, d});
    for (CostMetric metric : {CostMetric::l2, CostMetric::sq_l2}) {
      std::vector<double> cost(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double diff = a.data()[i * d + c] - b.data()[j * d + c];
            s += diff * diff;
          }
          cost[i * n + j] = metric == CostMetric::l2 ? std::sqrt(s) : s;
        }
      }
      const auto total = [&](const std::vector<std::size_t>& perm) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
        return s;
      };
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::vector<std::pair<double, std::vector<std::size_t>>> all;
      do {
        all.emplace_back(total(perm), perm);
      } while (std::next_permutation(perm.begin(), perm.end()));
      double best = all.front().first;
      for (const auto& p : all) best = std::min(best, p.first);
      const PairingResult got = pair_assignment(a, b, metric);
      const double got_total = total(got.permutation);
      if (got_total != best) {
        // Distinct permutations with equal exact cost (common for 1-D L2)
        // round to totals a few ulps apart; any of them is optimal.
        const double slack = 4.0 * static_cast<double>(n) * 2.220446049250313e-16 * best;
        bool tied = false;
        for (const auto& [value, p] : all) {
          if (p == got.permutation) continue;
          if (value == best && std::fabs(got_total - best) <= slack) tied = true;
        }
        if (tied) {
          ++ties;
        } else {
          ++mismatches;
        }
      }
      ++checked;
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && elapsed < 10.0;
  o.detail = std::to_string(checked - mismatches) + "/" + std::to_string(checked) + " solves optimal (" +
             std::to_string(ties) + " on exact ties within summation rounding), " + fmt(elapsed) + " s";
  o.data = {{"solves", checked}, {"mismatches", mismatches}, {"ties", ties}, {"seconds", elapsed}};
  return o;
}

Outcome knn_distance_reduction() {
  const auto t0 = Clock::now();
  DatasetSpec spec;
  spec.name = "image_blobs";
  spec.n = 4096;
  spec.dim = 3072;
  Rng rng(0, 34);
  const Tensor images = make_dataset(spec, rng);
  const auto rows = sweep_k(images, {1, 2, 4, 8, 16}, rng);
  bool monotone = true;
  json deltas = json::array();
  double delta8 = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].delta_percent > rows[i - 1].delta_percent) monotone = false;
    if (rows[i].k == 8) delta8 = rows[i].delta_percent;
    deltas.push_back({{"k", rows[i].k}, {"delta_percent", rows[i].delta_percent}});
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = monotone && delta8 <= -0.5 && delta8 >= -3.0 && elapsed < 60.0;
  o.detail = "delta(k=8) = " + fmt(delta8) + "% (need -3..-0.5), " + (monotone ? "non-increasing" : "NOT monotone") +
             ", " + fmt(elapsed) + " s";
  o.data = {{"rows", deltas}, {"seconds", elapsed}};
  return o;
}

Outcome miscibility_ordering() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<std::string, PairingConfig>> methods = {
      {"assignment", pairing(PairingMethod::assignment)},
      {"knn8", pairing(PairingMethod::knn, 8)},
      {"random", pairing(PairingMethod::random)}};
  std::map<std::string, std::vector<double>> scores;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& [name, config] : methods) {
      Rng rng(seed, 30);  // same images for every method at a seed
      scores[name].push_back(miscibility_score(config, 16, 10000, 3072, rng).mean_centroid_distance);
    }
  }
  const auto gap = [&](const std::string& hi, const std::string& lo) {
    const double se = std::sqrt(sample_variance(scores[hi]) / 5.0 + sample_variance(scores[lo]) / 5.0);
    return std::pair{mean(scores[hi]) - mean(scores[lo]), se};
  };
  const auto [g1, se1] = gap("assignment", "knn8");
  const auto [g2, se2] = gap("knn8", "random");
  const double ratio = mean(scores["assignment"]) / mean(scores["random"]);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = g1 > 3.0 * se1 && g2 > 3.0 * se2 && ratio >= 2.0 && elapsed < 600.0;
  o.detail = "assignment " + fmt(mean(scores["assignment"])) + ", knn8 " + fmt(mean(scores["knn8"])) + ", random " +
             fmt(mean(scores["random"])) + "; gaps " + fmt(g1 / se1, 3) + " and " + fmt(g2 / se2, 3) +
             " SE (need > 3), assignment/random " + fmt(ratio, 3) + " (need >= 2), " + fmt(elapsed) + " s";
  o.data = {{"scores", scores}, {"gap_se", {g1 / se1, g2 / se2}}, {"ratio", ratio}, {"seconds", elapsed}};
  return o;
}

Outcome knn_gaussianity() {
  const auto t0 = Clock::now();
  Rng a(0, 31), b(0, 31);
  const double iid = kl_to_gaussian(paired_noise_moments(pairing(PairingMethod::random), 50000, 3072, 0.5, a));
  const double knn = kl_to_gaussian(paired_noise_moments(pairing(PairingMethod::knn, 8), 50000, 3072, 0.5, b));
  const double relative = (knn - iid) / iid;
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = relative < 0.05 && elapsed < 300.0;
  o.detail = "KL knn8 " + fmt(knn) + " vs iid " + fmt(iid) + ", excess " + fmt(100.0 * relative, 3) +
             "% (need < 5%), " + fmt(elapsed) + " s";
  o.data = {{"kl_knn", knn}, {"kl_iid", iid}, {"relative_excess", relative}, {"seconds", elapsed}};
  return o;
}

Outcome timing_shape(const fs::path& root) {
  const auto t0 = Clock::now();
  Rng rng(0, 35);
  const auto rows = time_pairing({PairingMethod::assignment, PairingMethod::knn}, {128, 256, 512, 1024}, 3072, 5, rng);
  const double s_assign = loglog_slope(rows, "assignment"), s_knn = loglog_slope(rows, "knn");
  bool ratios_ok = true;
  std::string ratios;
  for (const auto& r : rows) {
    if (r.method != kRatioMethod) continue;
    if (r.n >= 256 && r.median_ms < 10.0) ratios_ok = false;
    ratios += (ratios.empty() ? "" : " ") + std::to_string(r.n) + ":" + fmt(r.median_ms, 3);
  }
  emit_timing_report(rows, root / "timing", {{"loglog_slopes", {{"assignment", s_assign}, {"knn", s_knn}}}});
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = ratios_ok && s_assign >= 1.8 && s_knn <= 1.3 && elapsed < 300.0;
  o.detail = "ratio assign/knn " + ratios + " (need >= 10 for n >= 256), slopes assignment " + fmt(s_assign, 3) +
             " (need >= 1.8) knn " + fmt(s_knn, 3) + " (need <= 1.3), " + fmt(elapsed) + " s";
  json timing = json::array();
  for (const auto& r : rows) timing.push_back(to_json(r));
  o.data = {{"rows", timing}, {"slope_assignment", s_assign}, {"slope_knn", s_knn}, {"seconds", elapsed}};
  return o;
}

// Speedups of each method over vanilla, one per seed; a method that never
// reaches the threshold scores 0.
std::vector<double> speedups(ToyRuns& runs, const std::string& method, std::size_t seeds, double& train_seconds) {
  std::vector<double> out;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const RunResult& vanilla = runs.get("random", seed);
    const RunResult& r = runs.get(method, seed);
    train_seconds += r.elapsed_seconds;
    out.push_back(speedup_ratio(vanilla.sliced_wasserstein, r.sliced_wasserstein).value_or(0.0));
  }
  return out;
}

std::string list(const std::vector<double>& v, int digits = 3) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt(x, digits);
  return s;
}

Outcome convergence_speedup(ToyRuns& runs) {
  double train_seconds = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) train_seconds += runs.get("random", seed).elapsed_seconds;
  const auto assign = speedups(runs, "assignment", 3, train_seconds);
  const auto knn = speedups(runs, "knn4", 3, train_seconds);
  const double m_assign = median(assign), m_knn = median(knn);
  Outcome o;
  o.pass = m_assign > 1.25 && m_knn > 1.15 && train_seconds < 1800.0;
  o.detail = "median speedup assignment " + fmt(m_assign, 3) + " [" + list(assign) + "] (need > 1.25), knn4 " +
             fmt(m_knn, 3) + " [" + list(knn) + "] (need > 1.15), training " + fmt(train_seconds) + " s";
  o.data = {{"assignment", assign}, {"knn4", knn}, {"training_seconds", train_seconds}};
  return o;
}

Outcome scaling_ablation(ToyRuns& runs) {
  double train_seconds = 0.0;
  std::vector<double> base_steps, scaled_steps;
  json rows = json::array();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RunResult& base = runs.get("random", seed);
    const RunResult& scaled = runs.get("scaled2", seed);
    train_seconds += base.elapsed_seconds + scaled.elapsed_seconds;
    const double threshold = base.sliced_wasserstein.best();
    const auto b = steps_to_threshold(base.sliced_wasserstein, threshold);
    const auto s = steps_to_threshold(scaled.sliced_wasserstein, threshold);
    base_steps.push_back(static_cast<double>(*b));
    // Never reaching the threshold counts as infinitely slow.
    scaled_steps.push_back(s ? static_cast<double>(*s) : INFINITY);
    rows.push_back({{"seed", seed}, {"threshold", threshold}, {"std05_steps", *b}, {"std10_steps", s ? json(*s) : json()},
                    {"std10_best", scaled.sliced_wasserstein.best()}});
  }
  const double mb = median(base_steps), ms = median(scaled_steps);
  Outcome o;
  o.pass = ms < mb && train_seconds < 1800.0;
  o.detail = "median steps to the STD-0.5 best: STD 1.0 " + fmt(ms, 6) + " [" + list(scaled_steps, 6) + "] vs STD 0.5 " +
             fmt(mb, 6) + " [" + list(base_steps, 6) + "], training " + fmt(train_seconds) + " s";
  o.data = {{"seeds", rows}, {"training_seconds", train_seconds}};
  return o;
}

Outcome perturbation_stability(ToyRuns& runs) {
  const RunResult& trained = runs.get("random", 0);
  const Checkpoint ck = load_checkpoint(trained.dir / "checkpoint");
  Rng rng(0, 32);
  PerturbationSpec spec;
  spec.weights = {0.0, 0.1, 0.2, 0.3};
  spec.base = gaussian_sample(rng, {512, 2});
  for (int p = 0; p < 10; ++p) spec.perturbations.push_back(gaussian_sample(rng, {512, 2}));
  const auto r = perturbation_study(ck.state.model, ck.state.schedule, spec, 20);
  bool zero = true;
  for (const auto& row : r.rows) {
    if (row.weight == 0.0 && row.deviation != 0.0) zero = false;
  }
  bool monotone = true;
  for (std::size_t w = 1; w < r.mean_deviation.size(); ++w) {
    if (r.mean_deviation[w] < r.mean_deviation[w - 1]) monotone = false;
  }
  const double at02 = r.mean_deviation[2] / r.reference_scale;
  Outcome o;
  o.pass = zero && monotone && at02 < 0.5;
  o.detail = std::string("W=0 ") + (zero ? "exactly 0" : "NONZERO") + ", mean deviation " + list(r.mean_deviation) +
             (monotone ? " non-decreasing" : " NOT monotone") + ", W=0.2 at " + fmt(100.0 * at02, 3) +
             "% of reference " + fmt(r.reference_scale, 3) + " (need < 50%)";
  o.data = to_json(r);
  return o;
}

Outcome trajectory_disentanglement(ToyRuns& runs) {
  std::vector<double> vanilla, assign;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed, 33);
    const Tensor noise = gaussian_sample(rng, {128, 2});
    for (const auto& [name, out] : {std::pair<std::string, std::vector<double>*>{"random", &vanilla},
                                    std::pair<std::string, std::vector<double>*>{"assignment", &assign}}) {
      const RunResult& r = runs.get(name, seed);
      const auto lines = project_x0_trajectories(r.state.model, r.state.schedule, noise, 20);
      out->push_back(static_cast<double>(crossing_count(lines)));
    }
  }
  const double mv = median(vanilla), ma = median(assign);
  Outcome o;
  o.pass = ma < mv;
  o.detail = "median crossings assignment " + fmt(ma, 6) + " [" + list(assign, 6) + "] vs vanilla " + fmt(mv, 6) + " [" +
             list(vanilla, 6) + "]";
  o.data = {{"assignment", assign}, {"vanilla", vanilla}};
  return o;
}

// Numerical core checks, then the unit binaries with their total wall time.
Outcome numerical_core(const std::vector<std::string>& unit_tests) {
  Rng rng(0, 41);
  // Gradient of <g, f(params)> against central differences, every parameter.
  ModelSpec spec;
  spec.hidden = {8, 8, 8};
  spec.time_embedding = 4;
  DenoiserModel m = DenoiserModel::initialize(spec, rng);
  for (double& p : m.parameters()) p += 0.1 * rng.normal();
  const Tensor x = gaussian_sample(rng, {5, 2}), g = gaussian_sample(rng, {5, 2});
  std::vector<double> t(5);
  for (double& v : t) v = rng.uniform();
  const auto analytic = m.backward(x, t, g);
  const auto objective = [&] {
    const Tensor out = m.forward(x, t);
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) s += out.data()[k] * g.data()[k];
    return s;
  };
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < m.parameters().size(); ++k) {
    const double saved = m.parameters()[k];
    m.parameters()[k] = saved + 1e-5;
    const double up = objective();
    m.parameters()[k] = saved - 1e-5;
    const double down = objective();
    m.parameters()[k] = saved;
    const double fd = (up - down) / 2e-5;
    num += (fd - analytic[k]) * (fd - analytic[k]);
    den += analytic[k] * analytic[k];
  }
  const double grad_err = std::sqrt(num / den);

  // predicted x0 inverts the forward process given the true noise.
  double inverse_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x0 = gaussian_sample(rng, {4, 3}), n = gaussian_sample(rng, {4, 3});
    const double alpha = 1e-3 + (1.0 - 1e-3) * rng.uniform();
    const Tensor back = predict_x0(forward_diffuse(x0, n, alpha), n, alpha);
    for (std::size_t k = 0; k < x0.size(); ++k) inverse_err = std::max(inverse_err, std::fabs(back.data()[k] - x0.data()[k]));
  }

  // DDIM with the exact noise as oracle reconstructs the data point.
  const auto schedule = make_ddpm_linear_schedule();
  const Tensor data = gaussian_sample(rng, {8, 2}), noise = gaussian_sample(rng, {8, 2});
  const Predictor oracle = [&](const Tensor&, std::span<const double>) { return noise; };
  double sampler_err = 0.0;
  for (std::size_t steps : {1u, 20u, 1000u}) {
    const Tensor out = sample_ddim(oracle, schedule, steps, forward_diffuse(data, noise, schedule.alpha.back())).samples;
    for (std::size_t k = 0; k < data.size(); ++k) sampler_err = std::max(sampler_err, std::fabs(out.data()[k] - data.data()[k]));
  }

  // Pairwise distances against the double loop, exactly for small widths.
  bool distances_ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(4);
    const Tensor a = gaussian_sample(rng, {7, d}), b = gaussian_sample(rng, {5, d});
    const Tensor sq = pairwise_sq_dist(a, b), l2 = l2_dist(a, b);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = a.data()[i * d + c] - b.data()[j * d + c];
          s += diff * diff;
        }
        if (sq.data()[i * 5 + j] != s || l2.data()[i * 5 + j] != std::sqrt(s)) distances_ok = false;
      }
    }
  }

  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  for (const auto& path : unit_tests) {
    const int status = std::system((path + " > /dev/null 2>&1").c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back(fs::path(path).filename().string());
  }
  const double suite = seconds_since(t0);

  Outcome o;
  o.pass = grad_err < 1e-4 && inverse_err <= 1e-12 && sampler_err <= 1e-8 && distances_ok && failed.empty() &&
           !unit_tests.empty() && suite < 120.0;
  std::string failures;
  for (const auto& f : failed) failures += " " + f;
  o.detail = "gradient rel err " + fmt(grad_err, 3) + ", x0 inverse " + fmt(inverse_err, 3) + ", sampler oracle " +
             fmt(sampler_err, 3) + ", distances " + (distances_ok ? "exact" : "MISMATCH") + ", " +
             std::to_string(unit_tests.size() - failed.size()) + "/" + std::to_string(unit_tests.size()) +
             " unit binaries pass" + (failed.empty() ? "" : " (failed:" + failures + ")") + " in " + fmt(suite) + " s";
  o.data = {{"gradient_rel_err", grad_err},   {"inverse_err", inverse_err}, {"sampler_err", sampler_err},
            {"distances_exact", distances_ok}, {"unit_failures", failed},   {"unit_seconds", suite}};
  return o;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, '|');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria");
  std::vector<int> only;
  std::string runs_dir = IMD_ACCEPTANCE_RUNS;
  bool report_only = false;
  app.add_option("--only", only, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--runs", runs_dir, "Cache directory for training runs and reports");
  app.add_flag("--report-only", report_only, "Exit 0 even when a criterion fails");
  CLI11_PARSE(app, argc, argv);
  if (only.empty()) {
    only.resize(10);
    std::iota(only.begin(), only.end(), 1);
  }

  ToyRuns runs{fs::path(runs_dir), {}};
  fs::create_directories(runs.root);
  const std::vector<std::string> unit_tests = split_list(IMD_UNIT_TESTS);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"assignment optimality", assignment_optimality}},
      {2, {"knn distance reduction", knn_distance_reduction}},
      {3, {"miscibility ordering", miscibility_ordering}},
      {4, {"knn gaussianity", knn_gaussianity}},
      {5, {"timing shape", [&] { return timing_shape(runs.root); }}},
      {6, {"convergence speedup", [&] { return convergence_speedup(runs); }}},
      {7, {"scaling ablation", [&] { return scaling_ablation(runs); }}},
      {8, {"perturbation stability", [&] { return perturbation_stability(runs); }}},
      {9, {"trajectory disentanglement", [&] { return trajectory_disentanglement(runs); }}},
      {10, {"numerical core", [&] { return numerical_core(unit_tests); }}}};

  bool all_pass = true, errored = false;
  for (int id : only) {
    const auto& [name, body] = criteria.at(id);
    std::cerr << "criterion " << id << ": " << name << "\n";
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
      errored = true;
    }
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << std::endl;
    std::ofstream(runs.root / ("criterion-" + std::to_string(id) + ".json"))
        << json{{"criterion", id}, {"name", name}, {"pass", o.pass}, {"detail", o.detail}, {"data", o.data}}.dump(2)
        << "\n";
  }
  if (errored) return 3;
  if (!all_pass && !report_only) return 1;
  return 0;
}
