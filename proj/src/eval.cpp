#include "imd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "imd/error.hpp"
#include "imd/numerics.hpp"

namespace imd {

GaussianMoments fit_gaussian(const Tensor& samples, bool diagonal) {
  const std::size_t m = samples.rows(), d = samples.cols();
  if (m < 2) throw std::invalid_argument("fit_gaussian: need at least 2 samples");
  GaussianMoments g{std::vector<double>(d, 0.0), {}, diagonal};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) g.mean[j] += samples(i, j);
  for (double& v : g.mean) v /= static_cast<double>(m);

  const double denom = static_cast<double>(m - 1);
  if (diagonal) {
    g.cov.assign(d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double e = samples(i, j) - g.mean[j];
        g.cov[j] += e * e;
      }
    for (double& v : g.cov) v /= denom;
  } else {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(samples.data().data(), m,
                                                                                                d);
    Eigen::RowVectorXd mu = Eigen::Map<const Eigen::RowVectorXd>(g.mean.data(), d);
    Eigen::MatrixXd centered = x.rowwise() - mu;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    g.cov.resize(d * d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) g.cov[i * d + j] = cov(i, j);
  }
  return g;
}

double frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
  const std::size_t d = a.mean.size();
  if (b.mean.size() != d) throw std::invalid_argument("frechet_distance: dimension mismatch");
  double mean_term = 0.0;
  for (std::size_t j = 0; j < d; ++j) mean_term += (a.mean[j] - b.mean[j]) * (a.mean[j] - b.mean[j]);

  if (a.diagonal && b.diagonal) {
    double cov_term = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (a.cov[j] < 0 || b.cov[j] < 0) throw NumericalError("frechet_distance: negative variance");
      cov_term += a.cov[j] + b.cov[j] - 2.0 * std::sqrt(a.cov[j] * b.cov[j]);
    }
    return mean_term + cov_term;
  }
  auto dense = [d](const GaussianMoments& g) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      if (g.diagonal) {
        m(i, i) = g.cov[i];
      } else {
        for (std::size_t j = 0; j < d; ++j) m(i, j) = g.cov[i * d + j];
      }
    }
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  const Eigen::MatrixXd sa = dense(a), sb = dense(b);

  auto clamp_sqrt = [](double lambda, const char* what) {
    if (lambda < -1e-10) {
      std::ostringstream msg;
      msg << "frechet_distance: " << what << " has eigenvalue " << lambda << " (not PSD)";
      throw NumericalError(msg.str());
    }
    return std::sqrt(std::max(lambda, 0.0));
  };

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(sa);
  Eigen::VectorXd root_vals(d);
  for (std::size_t i = 0; i < d; ++i) root_vals(i) = clamp_sqrt(eig_a.eigenvalues()(i), "covariance A");
  const Eigen::MatrixXd root_a = eig_a.eigenvectors() * root_vals.asDiagonal() * eig_a.eigenvectors().transpose();
  Eigen::MatrixXd product = root_a * sb * root_a;
  product = 0.5 * (product + product.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_p(product, Eigen::EigenvaluesOnly);
  double trace_root = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace_root += clamp_sqrt(eig_p.eigenvalues()(i), "covariance product");
  return mean_term + sa.trace() + sb.trace() - 2.0 * trace_root;
}

double frechet_gaussian_distance(const Tensor& a, const Tensor& b, CovarianceMode mode) {
  if (a.cols() != b.cols()) throw std::invalid_argument("frechet_gaussian_distance: dimension mismatch");
  const std::size_t d = a.cols();
  const bool diagonal = mode == CovarianceMode::diagonal || (mode == CovarianceMode::automatic && d > 8);
  const std::size_t need = diagonal ? 2 : d + 1;
  if (a.rows() < need || b.rows() < need) {
    throw std::invalid_argument("frechet_gaussian_distance: need at least " + std::to_string(need) + " samples");
  }
  return frechet_distance(fit_gaussian(a, diagonal), fit_gaussian(b, diagonal));
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty sample");
  std::ranges::sort(a);
  std::ranges::sort(b);
  double s = 0.0;
  if (a.size() == b.size()) {
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
  }
  // Both quantile functions are steps; integrate their squared gap exactly
  // over the merged breakpoints i/m and j/n.
  const double m = static_cast<double>(a.size()), n = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double u = 0.0;
  while (i < a.size() && j < b.size()) {
    const double next_a = static_cast<double>(i + 1) / m, next_b = static_cast<double>(j + 1) / n;
    const double next = std::min(next_a, next_b);
    const double e = a[i] - b[j];
    s += (next - u) * e * e;
    u = next;
    if (next_a <= next) ++i;
    if (next_b <= next) ++j;
  }
  return std::sqrt(s);
}

double sliced_wasserstein_along(const Tensor& a, const Tensor& b, const Tensor& directions) {
  if (a.empty() || b.empty()) throw std::invalid_argument("sliced_wasserstein: empty sample set");
  if (a.cols() != b.cols() || directions.cols() != a.cols()) {
    throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
  }
  if (directions.rows() < 1) throw std::invalid_argument("sliced_wasserstein: need at least one projection");
  auto project = [](const Tensor& x, std::span<const double> dir) {
    std::vector<double> p(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < dir.size(); ++k) s += x(i, k) * dir[k];
      p[i] = s;
    }
    return p;
  };
  double total = 0.0;
  for (std::size_t p = 0; p < directions.rows(); ++p) {
    total += wasserstein_1d(project(a, directions.row(p)), project(b, directions.row(p)));
  }
  return total / static_cast<double>(directions.rows());
}

Tensor random_directions(std::size_t count, std::size_t dim, Rng& rng) {
  Tensor dirs = gaussian_sample(rng, {count, dim});
  for (std::size_t p = 0; p < count; ++p) {
    auto r = dirs.row(p);
    double norm = 0.0;
    for (double v : r) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : r) v /= norm;
  }
  return dirs;
}

double sliced_wasserstein(const Tensor& a, const Tensor& b, std::size_t n_projections, Rng& rng) {
  if (n_projections < 1) throw std::invalid_argument("sliced_wasserstein: n_projections must be >= 1");
  if (a.empty() || b.empty()) throw std::invalid_argument("sliced_wasserstein: empty sample set");
  if (a.cols() != b.cols()) throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
  return sliced_wasserstein_along(a, b, random_directions(n_projections, a.cols(), rng));
}

void MetricHistory::add(std::int64_t step, double value) {
  if (!points_.empty() && step <= points_.back().first) {
    throw std::invalid_argument("MetricHistory: steps must be strictly increasing");
  }
  if (!std::isfinite(value)) throw std::invalid_argument("MetricHistory: non-finite value");
  points_.emplace_back(step, value);
}

double MetricHistory::best() const {
  if (points_.empty()) throw std::invalid_argument("MetricHistory: empty history");
  double best = points_.front().second;
  for (const auto& [step, v] : points_) best = std::min(best, v);
  return best;
}

std::optional<std::int64_t> steps_to_threshold(const MetricHistory& history, double threshold) {
  for (const auto& [step, v] : history.points()) {
    if (v <= threshold) return step;
  }
  return std::nullopt;
}

std::optional<double> speedup_ratio(const MetricHistory& vanilla, const MetricHistory& immiscible) {
  if (vanilla.metric() != immiscible.metric()) {
    throw std::invalid_argument("speedup_ratio: metric mismatch ('" + vanilla.metric() + "' vs '" +
                                immiscible.metric() + "')");
  }
  if (vanilla.empty() || immiscible.empty()) throw std::invalid_argument("speedup_ratio: empty history");
  const double threshold = vanilla.best();
  const auto v = steps_to_threshold(vanilla, threshold);
  const auto m = steps_to_threshold(immiscible, threshold);
  if (!m) return std::nullopt;
  return static_cast<double>(*v) / static_cast<double>(*m);
}

std::string history_jsonl(const MetricHistory& history, const std::string& run_id) {
  std::string out;
  for (const auto& [step, v] : history.points()) {
    out += nlohmann::json{{"step", step}, {"metric", history.metric()}, {"value", v}, {"run_id", run_id}}.dump();
    out += '\n';
  }
  return out;
}

void append_history_jsonl(const std::filesystem::path& path, const MetricHistory& history, const std::string& run_id) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path.string());
  out << history_jsonl(history, run_id);
}

MetricHistory read_history_jsonl(const std::filesystem::path& path, const std::string& metric) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  MetricHistory h(metric);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed metrics line in " + path.string() + ": " + e.what());
    }
    if (j.value("metric", "") == metric) h.add(j.at("step").get<std::int64_t>(), j.at("value").get<double>());
  }
  return h;
}

}  // namespace imd
