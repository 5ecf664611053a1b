#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "imd/rng.hpp"
#include "imd/tensor.hpp"

namespace imd {

enum class CovarianceMode { automatic, full, diagonal };

/// Mean and covariance of a Gaussian fit; `cov` is d x d row-major, or the d
/// diagonal entries when `diagonal` is set.
struct GaussianMoments {
  std::vector<double> mean;
  std::vector<double> cov;
  bool diagonal = false;
};

/// Sample mean and unbiased covariance of the rows of `samples`.
GaussianMoments fit_gaussian(const Tensor& samples, bool diagonal);

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The trace of the
/// square root is taken from the eigenvalues of the symmetrised product
/// S_a^(1/2) S_b S_a^(1/2); eigenvalues in (-1e-10, 0) are clamped to zero and
/// anything more negative raises NumericalError.
double frechet_distance(const GaussianMoments& a, const GaussianMoments& b);

/// Fréchet distance between Gaussian fits of two sample sets. `automatic`
/// uses the full covariance for d <= 8 and the diagonal otherwise.
double frechet_gaussian_distance(const Tensor& a, const Tensor& b, CovarianceMode mode = CovarianceMode::automatic);

/// 1-D 2-Wasserstein distance between two empirical distributions. Equal
/// sizes pair sorted values; otherwise the squared gap between the two step
/// quantile functions is integrated exactly.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

/// Mean over the rows of `directions` (unit vectors) of the 1-D W2 distance
/// between the projected samples.
double sliced_wasserstein_along(const Tensor& a, const Tensor& b, const Tensor& directions);

/// Unit directions drawn as normalised Gaussian vectors.
Tensor random_directions(std::size_t count, std::size_t dim, Rng& rng);

double sliced_wasserstein(const Tensor& a, const Tensor& b, std::size_t n_projections, Rng& rng);

/// (step, value) pairs with strictly increasing steps and finite values.
class MetricHistory {
 public:
  explicit MetricHistory(std::string metric = "") : metric_(std::move(metric)) {}

  const std::string& metric() const { return metric_; }
  const std::vector<std::pair<std::int64_t, double>>& points() const { return points_; }
  bool empty() const { return points_.empty(); }

  void add(std::int64_t step, double value);
  double best() const;

 private:
  std::string metric_;
  std::vector<std::pair<std::int64_t, double>> points_;
};

/// First logged step whose value is <= threshold.
std::optional<std::int64_t> steps_to_threshold(const MetricHistory& history, double threshold);

/// steps_to_threshold(vanilla, best vanilla value) divided by the same for
/// the immiscible run; empty if the immiscible run never gets there.
std::optional<double> speedup_ratio(const MetricHistory& vanilla, const MetricHistory& immiscible);

/// JSON lines: {"step": int, "metric": str, "value": float, "run_id": str}.
std::string history_jsonl(const MetricHistory& history, const std::string& run_id);
void append_history_jsonl(const std::filesystem::path& path, const MetricHistory& history, const std::string& run_id);
MetricHistory read_history_jsonl(const std::filesystem::path& path, const std::string& metric);

}  // namespace imd
