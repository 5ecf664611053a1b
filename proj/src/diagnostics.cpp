#include "imd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "imd/datasets.hpp"
#include "imd/error.hpp"
#include "imd/numerics.hpp"

namespace imd {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

nlohmann::json to_json(const MiscibilityReport& r) {
  return {{"op", "miscibility"},
          {"method", r.method},
          {"n_images", r.n_images},
          {"points_per_cluster", r.points_per_cluster},
          {"dim", r.dim},
          {"mean_centroid_distance", r.mean_centroid_distance},
          {"std_centroid_distance", r.std_centroid_distance},
          {"config", r.config}};
}

MiscibilityReport miscibility_score(const Tensor& images, const NoiseSource& source, std::size_t m, Rng& rng,
                                    const std::string& method) {
  if (images.rank() != 2 || images.rows() < 2) throw std::invalid_argument("miscibility_score: need n_images >= 2");
  if (m < 100) throw std::invalid_argument("miscibility_score: need m >= 100 noises per image");
  const std::size_t n = images.rows(), d = images.cols();

  std::vector<double> sums(n * d, 0.0);
  for (std::size_t round = 0; round < m; ++round) {
    const Tensor noise = source(images, rng);
    if (noise.rank() != 2 || noise.rows() != n || noise.cols() != d) {
      throw std::invalid_argument("miscibility_score: noise source returned shape " + shape_string(noise.shape()));
    }
    const auto src = noise.data();
    for (std::size_t k = 0; k < sums.size(); ++k) sums[k] += src[k];
  }
  for (double& s : sums) s /= static_cast<double>(m);
  const Tensor centroids({n, d}, std::move(sums));
  const Tensor dist = l2_dist(centroids, centroids);

  std::vector<double> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) pairs.push_back(dist(a, b));
  }

  MiscibilityReport out;
  out.method = method;
  out.n_images = n;
  out.points_per_cluster = m;
  out.dim = d;
  out.mean_centroid_distance = mean_of(pairs);
  out.std_centroid_distance = sample_std(pairs);
  out.config = {{"method", method}, {"n_images", n}, {"m", m}, {"d", d}};
  return out;
}

MiscibilityReport miscibility_score(const Tensor& images, const PairingConfig& config, std::size_t m, Rng& rng) {
  config.validate();
  const Tensor prepared = config.method == PairingMethod::scaled ? scale_images(images, config.scale) : images;
  const NoiseSource source = [&config](const Tensor& x, Rng& r) { return make_pairs(x, config, r).noise; };
  MiscibilityReport out = miscibility_score(prepared, source, m, rng, config.tag());
  out.config["pairing"] = to_json(config);
  return out;
}

MiscibilityReport miscibility_score(const PairingConfig& config, std::size_t n_images, std::size_t m, std::size_t d,
                                    Rng& rng) {
  if (n_images < 2) throw std::invalid_argument("miscibility_score: need n_images >= 2");
  DatasetSpec spec;
  spec.name = "image_blobs";
  spec.n = n_images;
  spec.dim = d;
  const Tensor images = make_dataset(spec, rng);
  return miscibility_score(images, config, m, rng);
}

double iid_centroid_distance(std::size_t m, std::size_t d) {
  // c_a - c_b ~ N(0, (2/m) I_d) and E||Z_d|| = sqrt(2) G((d+1)/2) / G(d/2).
  const double dd = static_cast<double>(d);
  const double chi_mean = std::sqrt(2.0) * std::exp(std::lgamma((dd + 1.0) / 2.0) - std::lgamma(dd / 2.0));
  return std::sqrt(2.0 / static_cast<double>(m)) * chi_mean;
}

MomentAccumulator::MomentAccumulator(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {
  if (dim == 0) throw std::invalid_argument("MomentAccumulator: dimension must be >= 1");
}

void MomentAccumulator::add(std::span<const double> row) {
  if (row.size() != mean_.size()) throw std::invalid_argument("MomentAccumulator: row width mismatch");
  ++count_;
  const double inv = 1.0 / static_cast<double>(count_);
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double delta = row[j] - mean_[j];
    mean_[j] += delta * inv;
    m2_[j] += delta * (row[j] - mean_[j]);
  }
}

void MomentAccumulator::add(const Tensor& rows) {
  if (rows.rank() != 2) throw std::invalid_argument("MomentAccumulator: expected a matrix");
  for (std::size_t i = 0; i < rows.rows(); ++i) add(rows.row(i));
}

std::vector<double> MomentAccumulator::variance() const {
  std::vector<double> v(m2_.size(), 0.0);
  if (count_ == 0) return v;
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = m2_[j] / static_cast<double>(count_);
  return v;
}

double kl_to_gaussian(const MomentAccumulator& moments) {
  if (moments.count() < 1000) {
    throw std::invalid_argument("kl_to_gaussian: need at least 1000 samples, got " + std::to_string(moments.count()));
  }
  const auto var = moments.variance();
  double kl = 0.0;
  for (std::size_t j = 0; j < var.size(); ++j) {
    if (!(var[j] > 0.0)) throw NumericalError("kl_to_gaussian: zero variance in dimension " + std::to_string(j));
    const double mu = moments.mean()[j];
    kl += 0.5 * (var[j] + mu * mu - 1.0 - std::log(var[j]));
  }
  return kl;
}

double kl_to_gaussian(const Tensor& samples) {
  if (samples.rank() != 2) throw std::invalid_argument("kl_to_gaussian: expected a matrix");
  MomentAccumulator acc(samples.cols());
  acc.add(samples);
  return kl_to_gaussian(acc);
}

MomentAccumulator paired_noise_moments(const PairingConfig& config, std::size_t samples, std::size_t d,
                                       double data_std, Rng& rng, std::size_t chunk) {
  config.validate();
  if (samples < 2 || d == 0 || chunk < 2) throw std::invalid_argument("paired_noise_moments: need samples, chunk >= 2");
  MomentAccumulator acc(d);
  DatasetSpec spec;
  spec.name = "image_blobs";
  spec.dim = d;
  spec.std = data_std;
  for (std::size_t done = 0; done < samples;) {
    spec.n = std::min(chunk, samples - done);
    if (samples - done - spec.n == 1) --spec.n;  // datasets need two rows
    Tensor images = make_dataset(spec, rng);
    if (config.method == PairingMethod::scaled) images = scale_images(images, config.scale);
    acc.add(make_pairs(images, config, rng).noise);
    done += spec.n;
  }
  return acc;
}

void PerturbationSpec::validate() const {
  if (base.rank() != 2) throw std::invalid_argument("perturbation_study: base noise must be a matrix");
  if (perturbations.empty()) throw std::invalid_argument("perturbation_study: no perturbations");
  for (const auto& p : perturbations) {
    if (p.shape() != base.shape()) throw std::invalid_argument("perturbation_study: perturbation shape mismatch");
  }
  if (std::ranges::find(weights, 0.0) == weights.end()) {
    throw std::invalid_argument("perturbation_study: weights must include 0");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("perturbation_study: weights must be >= 0");
  }
}

nlohmann::json to_json(const PerturbationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"weight", row.weight}, {"perturbation", row.perturbation}, {"deviation", row.deviation}});
  }
  return {{"op", "perturb"},
          {"renormalize", r.renormalize},
          {"weights", r.weights},
          {"mean_deviation", r.mean_deviation},
          {"reference_scale", r.reference_scale},
          {"rows", rows}};
}

PerturbationReport perturbation_study(const DenoiserModel& model, const NoiseSchedule& schedule,
                                      const PerturbationSpec& spec, std::size_t sampler_steps) {
  spec.validate();
  auto sample = [&](const Tensor& noise) {
    Tensor out = model.spec().target == PredictionTarget::epsilon
                     ? sample_ddim(model, schedule, sampler_steps, noise).samples
                     : sample_flow_euler(model, sampler_steps, noise);
    if (!out.all_finite()) throw NumericalError("perturbation_study: model produced non-finite samples");
    return out;
  };

  const Tensor reference = sample(spec.base);
  const std::size_t n = reference.rows();
  PerturbationReport report;
  report.weights = spec.weights;
  report.renormalize = spec.renormalize;

  if (n >= 2) {
    const Tensor dist = l2_dist(reference, reference);
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) s += dist(a, b);
    }
    report.reference_scale = s / static_cast<double>(n * (n - 1) / 2);
  }

  for (double w : spec.weights) {
    double total = 0.0;
    for (std::size_t p = 0; p < spec.perturbations.size(); ++p) {
      double deviation = 0.0;
      if (w != 0.0) {
        Tensor noise = spec.base;
        const auto pert = spec.perturbations[p].data();
        auto dst = noise.data();
        const double norm = spec.renormalize ? 1.0 / std::sqrt(1.0 + w * w) : 1.0;
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = norm * (dst[k] + w * pert[k]);
        const Tensor out = sample(noise);
        for (std::size_t i = 0; i < n; ++i) deviation += std::sqrt(sq_dist(out.row(i), reference.row(i)));
        deviation /= static_cast<double>(n);
      }
      report.rows.push_back({w, p, deviation});
      total += deviation;
    }
    report.mean_deviation.push_back(total / static_cast<double>(spec.perturbations.size()));
  }
  return report;
}

nlohmann::json to_json(const SweepRow& row) {
  nlohmann::json j = {{"op", "sweep_k"},
                      {"k", row.k},
                      {"mean_distance", row.mean_distance},
                      {"delta_percent", row.delta_percent}};
  j["steps_to_threshold"] = row.steps_to_threshold ? nlohmann::json(*row.steps_to_threshold) : nlohmann::json();
  return j;
}

std::vector<std::size_t> default_k_grid() { return {1, 2, 4, 8, 16, 32, 64, 128}; }

std::vector<SweepRow> sweep_k(const Tensor& images, const std::vector<std::size_t>& k_values, Rng& rng,
                              const std::function<std::optional<std::int64_t>(std::size_t)>& train) {
  if (k_values.empty()) throw std::invalid_argument("sweep_k: empty k list");
  if (!std::ranges::is_sorted(k_values) || k_values.front() != 1) {
    throw std::invalid_argument("sweep_k: k values must be sorted ascending and start at 1");
  }
  std::vector<SweepRow> rows;
  for (std::size_t k : k_values) {
    const PairedNoise paired = knn_select(images, k, rng);
    SweepRow row;
    row.k = k;
    row.mean_distance = mean_of(paired.pairing.pair_distance);
    if (train) row.steps_to_threshold = train(k);
    rows.push_back(row);
  }
  const double base = rows.front().mean_distance;
  for (auto& row : rows) row.delta_percent = 100.0 * (row.mean_distance - base) / base;
  return rows;
}

std::vector<Polyline> trajectory_projection(const std::vector<Tensor>& steps) {
  if (steps.empty()) throw std::invalid_argument("trajectory_projection: no steps");
  const std::size_t n = steps.front().rows(), d = steps.front().cols();
  if (steps.front().rank() != 2 || n < 2) throw std::invalid_argument("trajectory_projection: need >= 2 trajectories");
  for (const auto& s : steps) {
    if (s.rank() != 2 || s.rows() != n || s.cols() != d) {
      throw std::invalid_argument("trajectory_projection: inconsistent step shape " + shape_string(s.shape()));
    }
  }

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto total = static_cast<Eigen::Index>(n * steps.size());
  RowMatrix pooled(total, static_cast<Eigen::Index>(d));
  for (std::size_t s = 0; s < steps.size(); ++s) {
    pooled.middleRows(static_cast<Eigen::Index>(s * n), static_cast<Eigen::Index>(n)) =
        Eigen::Map<const RowMatrix>(steps[s].data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  }
  pooled.rowwise() -= pooled.colwise().mean();

  // Principal axes from the smaller of the covariance and Gram matrices.
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), 2);
  const bool gram = total < static_cast<Eigen::Index>(d);
  const Eigen::MatrixXd small = gram ? Eigen::MatrixXd(pooled * pooled.transpose())
                                     : Eigen::MatrixXd(pooled.transpose() * pooled);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(small);
  if (eig.info() != Eigen::Success) throw NumericalError("trajectory_projection: eigendecomposition failed");
  const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double floor = std::max(top, 1.0) * 1e-12 * static_cast<double>(small.rows());
  for (Eigen::Index c = 0; c < 2 && c < small.rows(); ++c) {
    const Eigen::Index src = small.rows() - 1 - c;
    const double lambda = eig.eigenvalues()(src);
    if (!(lambda > floor)) break;
    Eigen::VectorXd axis = gram ? Eigen::VectorXd(pooled.transpose() * eig.eigenvectors().col(src) / std::sqrt(lambda))
                                : Eigen::VectorXd(eig.eigenvectors().col(src));
    Eigen::Index lead = 0;
    axis.cwiseAbs().maxCoeff(&lead);
    if (axis(lead) < 0) axis = -axis;
    axes.col(c) = axis;
  }

  const Eigen::MatrixXd coords = pooled * axes;
  std::vector<Polyline> out(n, Polyline(steps.size()));
  for (std::size_t s = 0; s < steps.size(); ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(s * n + i);
      out[i][s] = {coords(r, 0), coords(r, 1)};
    }
  }
  return out;
}

std::vector<Polyline> project_x0_trajectories(const DenoiserModel& model, const NoiseSchedule& schedule,
                                              const Tensor& noise, std::size_t sampler_steps) {
  if (model.spec().target != PredictionTarget::epsilon) {
    throw ConfigError("trajectory projection needs an epsilon-prediction model");
  }
  const DdimResult run = sample_ddim(model, schedule, sampler_steps, noise);
  for (const Tensor& x0 : run.x0_trajectory) {
    if (!x0.all_finite()) throw NumericalError("project_x0_trajectories: non-finite predicted x0");
  }
  return trajectory_projection(run.x0_trajectory);
}

namespace {

// Error-free transformations for the exact orientation fallback.
void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double bv = s - a;
  e = (a - (s - bv)) + (b - bv);
}

void two_product(double a, double b, double& p, double& e) {
  p = a * b;
  e = std::fma(a, b, -p);
}

// Adds `b` to a non-overlapping expansion kept in increasing magnitude.
void grow_expansion(std::vector<double>& e, double b) {
  double q = b;
  std::size_t out = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    double s, h;
    two_sum(q, e[i], s, h);
    q = s;
    if (h != 0.0) e[out++] = h;
  }
  e.resize(out);
  if (q != 0.0) e.push_back(q);
}

}  // namespace

int orientation(const Point2& a, const Point2& b, const Point2& c) {
  const double left = (a[0] - c[0]) * (b[1] - c[1]);
  const double right = (a[1] - c[1]) * (b[0] - c[0]);
  const double det = left - right;
  // Static filter: with |left| + |right| as the magnitude, the rounded
  // determinant has the exact sign once it clears this bound.
  constexpr double eps = std::numeric_limits<double>::epsilon() / 2;
  const double bound = (3.0 + 16.0 * eps) * eps * (std::fabs(left) + std::fabs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;

  // det = ax*by - ax*cy - cx*by - ay*bx + ay*cx + cy*bx, summed exactly.
  const double terms[6][2] = {{a[0], b[1]},  {-a[0], c[1]}, {-c[0], b[1]},
                              {-a[1], b[0]}, {a[1], c[0]},  {c[1], b[0]}};
  std::vector<double> e;
  e.reserve(16);
  for (const auto& t : terms) {
    double p, err;
    two_product(t[0], t[1], p, err);
    grow_expansion(e, err);
    grow_expansion(e, p);
  }
  if (e.empty()) return 0;
  return e.back() > 0.0 ? 1 : -1;
}

std::int64_t crossing_count(const std::vector<Polyline>& trajectories) {
  if (trajectories.empty()) return 0;
  const std::size_t len = trajectories.front().size();
  for (const auto& t : trajectories) {
    if (t.size() != len) throw std::invalid_argument("crossing_count: polylines must have equal step counts");
  }
  if (len < 2) return 0;

  struct Segment {
    Point2 p, q;
    double xmin, xmax, ymin, ymax;
  };
  std::vector<std::vector<Segment>> segs(trajectories.size());
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    for (std::size_t s = 0; s + 1 < len; ++s) {
      const Point2 &p = trajectories[t][s], &q = trajectories[t][s + 1];
      segs[t].push_back({p, q, std::min(p[0], q[0]), std::max(p[0], q[0]), std::min(p[1], q[1]),
                         std::max(p[1], q[1])});
    }
  }

  std::int64_t count = 0;
  for (std::size_t a = 0; a < segs.size(); ++a) {
    for (std::size_t b = a + 1; b < segs.size(); ++b) {
      for (const auto& u : segs[a]) {
        for (const auto& v : segs[b]) {
          if (u.xmax < v.xmin || v.xmax < u.xmin || u.ymax < v.ymin || v.ymax < u.ymin) continue;
          const int o1 = orientation(u.p, u.q, v.p), o2 = orientation(u.p, u.q, v.q);
          if (o1 * o2 >= 0) continue;
          const int o3 = orientation(v.p, v.q, u.p), o4 = orientation(v.p, v.q, u.q);
          if (o3 * o4 < 0) ++count;
        }
      }
    }
  }
  return count;
}

}  // namespace imd
