#include "imd/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "imd/assignment.hpp"
#include "imd/error.hpp"
#include "imd/numerics.hpp"

namespace imd {

std::string to_string(PairingMethod method) {
  switch (method) {
    case PairingMethod::random: return "random";
    case PairingMethod::assignment: return "assignment";
    case PairingMethod::knn: return "knn";
    case PairingMethod::scaled: return "scaled";
  }
  return "unknown";
}

PairingMethod parse_pairing_method(const std::string& name) {
  if (name == "random") return PairingMethod::random;
  if (name == "assignment") return PairingMethod::assignment;
  if (name == "knn") return PairingMethod::knn;
  if (name == "scaled") return PairingMethod::scaled;
  throw ConfigError("unknown pairing method '" + name + "'");
}

std::string to_string(CostMetric metric) { return metric == CostMetric::l2 ? "l2" : "sq_l2"; }

CostMetric parse_cost_metric(const std::string& name) {
  if (name == "l2") return CostMetric::l2;
  if (name == "sq_l2") return CostMetric::sq_l2;
  throw ConfigError("unknown cost metric '" + name + "'");
}

double PairingResult::total_distance() const {
  return std::accumulate(pair_distance.begin(), pair_distance.end(), 0.0);
}

nlohmann::json to_json(const PairingResult& result) {
  nlohmann::json j{{"method", to_string(result.method)},
                   {"indices", result.permutation},
                   {"distances", result.pair_distance}};
  nlohmann::json aux = nlohmann::json::object();
  if (result.k) aux["k"] = *result.k;
  if (result.scale) aux["scale"] = *result.scale;
  j["aux"] = aux;
  return j;
}

void PairingConfig::validate() const {
  if (method == PairingMethod::knn && k < 1) throw ConfigError("pairing.k must be >= 1");
  if (method == PairingMethod::scaled) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("pairing.scale must be finite and > 0");
    if (inner == PairingMethod::scaled) throw ConfigError("pairing.inner cannot itself be scaled");
    if (inner == PairingMethod::knn && k < 1) throw ConfigError("pairing.k must be >= 1");
  }
}

std::string PairingConfig::tag() const {
  switch (method) {
    case PairingMethod::knn: return "knn(k=" + std::to_string(k) + ")";
    case PairingMethod::scaled: {
      PairingConfig in = *this;
      in.method = inner;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", scale);
      return "scaled(s=" + std::string(buf) + "," + in.tag() + ")";
    }
    default: return to_string(method);
  }
}

nlohmann::json to_json(const PairingConfig& c) {
  return {{"method", to_string(c.method)}, {"k", c.k},          {"scale", c.scale},
          {"inner", to_string(c.inner)},   {"cost", to_string(c.cost)}};
}

namespace {

void require_batch(const Tensor& images, const char* who) {
  if (images.empty() || images.rows() == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
}

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

std::vector<double> row_distances(const Tensor& images, const Tensor& aligned_noise) {
  std::vector<double> d(images.rows());
  for (std::size_t i = 0; i < images.rows(); ++i) d[i] = std::sqrt(sq_dist(images.row(i), aligned_noise.row(i)));
  return d;
}

}  // namespace

PairedNoise pair_random(const Tensor& images, Rng& rng) {
  require_batch(images, "pair_random");
  PairedNoise out{gaussian_sample(rng, images.shape()), {}};
  out.pairing.permutation = identity(images.rows());
  out.pairing.pair_distance = row_distances(images, out.noise);
  out.pairing.method = PairingMethod::random;
  return out;
}

PairingResult pair_assignment(const Tensor& images, const Tensor& noises, CostMetric cost) {
  require_batch(images, "pair_assignment");
  if (images.rows() != noises.rows()) {
    throw std::invalid_argument("pair_assignment: batch size mismatch (" + std::to_string(images.rows()) + " images vs " +
                                std::to_string(noises.rows()) + " noises)");
  }
  Tensor matrix = pairwise_sq_dist(images, noises);
  if (cost == CostMetric::l2) {
    for (double& v : matrix.data()) v = std::sqrt(v);
  }
  const std::size_t n = images.rows();
  AssignmentSolution solution = solve_assignment(matrix.data(), n);

  PairingResult out;
  out.method = PairingMethod::assignment;
  out.pair_distance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = matrix(i, solution.row_to_col[i]);
    out.pair_distance[i] = cost == CostMetric::l2 ? c : std::sqrt(c);
  }
  out.permutation = std::move(solution.row_to_col);
  return out;
}

PairedNoise knn_select_from(const Tensor& images, const Tensor& candidates, std::size_t k, unsigned threads) {
  require_batch(images, "knn_select");
  if (k == 0) throw std::invalid_argument("knn_select: k must be >= 1");
  const std::size_t n = images.rows();
  const std::size_t d = images.cols();
  if (candidates.rows() != n * k || candidates.cols() != d) {
    throw std::invalid_argument("knn_select: expected " + std::to_string(n * k) + " candidates of width " +
                                std::to_string(d));
  }
  PairedNoise out{Tensor(images.shape()), {}};
  out.pairing.permutation = identity(n);
  out.pairing.pair_distance.resize(n);
  out.pairing.method = PairingMethod::knn;
  out.pairing.k = k;

  auto select_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t best = 0;
      double best_sq = sq_dist(images.row(i), candidates.row(i * k));
      for (std::size_t j = 1; j < k; ++j) {
        const double s = sq_dist(images.row(i), candidates.row(i * k + j));
        if (s < best_sq) {
          best_sq = s;
          best = j;
        }
      }
      std::ranges::copy(candidates.row(i * k + best), out.noise.row(i).begin());
      out.pairing.pair_distance[i] = std::sqrt(best_sq);
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    select_range(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(select_range, b, std::min(n, b + chunk));
  }
  return out;
}

PairedNoise knn_select(const Tensor& images, std::size_t k, Rng& rng, unsigned threads) {
  require_batch(images, "knn_select");
  if (k == 0) throw std::invalid_argument("knn_select: k must be >= 1");
  const std::size_t n = images.rows();
  const std::size_t d = images.cols();
  if (threads > 1) return knn_select_from(images, gaussian_sample(rng, {n * k, d}), k, threads);

  // Sequential path draws one image's candidates at a time; same stream order
  // as pre-drawing everything, with k*d scratch instead of n*k*d.
  PairedNoise out{Tensor(images.shape()), {}};
  out.pairing.permutation = identity(n);
  out.pairing.pair_distance.resize(n);
  out.pairing.method = PairingMethod::knn;
  out.pairing.k = k;
  std::vector<double> scratch(k * d);
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_normal(scratch);
    const auto img = images.row(i);
    std::size_t best = 0;
    double best_sq = sq_dist(img, {scratch.data(), d});
    for (std::size_t j = 1; j < k; ++j) {
      const double s = sq_dist(img, {scratch.data() + j * d, d});
      if (s < best_sq) {
        best_sq = s;
        best = j;
      }
    }
    std::copy_n(scratch.data() + best * d, d, out.noise.row(i).begin());
    out.pairing.pair_distance[i] = std::sqrt(best_sq);
  }
  return out;
}

Tensor scale_images(const Tensor& images, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("scale_images: factor must be finite and > 0");
  Tensor out = images;
  for (double& v : out.data()) v *= s;
  return out;
}

Tensor apply_pairing(const Tensor& noises, const PairingResult& pairing) {
  return gather_rows(noises, pairing.permutation);
}

PairedNoise make_pairs(const Tensor& images, const PairingConfig& config, Rng& rng) {
  PairingMethod method = config.method == PairingMethod::scaled ? config.inner : config.method;
  PairedNoise out;
  switch (method) {
    case PairingMethod::random: out = pair_random(images, rng); break;
    case PairingMethod::knn: out = knn_select(images, config.k, rng); break;
    case PairingMethod::assignment: {
      Tensor noise = gaussian_sample(rng, images.shape());
      PairingResult pr = pair_assignment(images, noise, config.cost);
      out.noise = apply_pairing(noise, pr);
      out.pairing = std::move(pr);
      break;
    }
    case PairingMethod::scaled: throw std::logic_error("make_pairs: nested scaling");
  }
  if (config.method == PairingMethod::scaled) {
    out.pairing.method = PairingMethod::scaled;
    out.pairing.scale = config.scale;
  }
  return out;
}

}  // namespace imd
