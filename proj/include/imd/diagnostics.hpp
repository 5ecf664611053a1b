#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "imd/diffusion.hpp"
#include "imd/pairing.hpp"
#include "imd/rng.hpp"
#include "imd/tensor.hpp"

namespace imd {

struct MiscibilityReport {
  std::string method;
  std::size_t n_images = 0;
  std::size_t points_per_cluster = 0;
  std::size_t dim = 0;
  double mean_centroid_distance = 0.0;
  double std_centroid_distance = 0.0;  // sample STD over image pairs
  nlohmann::json config;
};

nlohmann::json to_json(const MiscibilityReport& report);

/// Returns one noise row per image row for a single pairing round.
using NoiseSource = std::function<Tensor(const Tensor& images, Rng& rng)>;

/// Runs `source` m times over the fixed images, averages each image's noises
/// into a centroid and reports mean and STD of the pairwise centroid
/// distances. Requires at least 2 images and m >= 100.
MiscibilityReport miscibility_score(const Tensor& images, const NoiseSource& source, std::size_t m, Rng& rng,
                                    const std::string& method = "custom");

/// Same statistic for a pairing config; scaled pairing multiplies the images
/// before pairing.
MiscibilityReport miscibility_score(const Tensor& images, const PairingConfig& config, std::size_t m, Rng& rng);

/// Draws n_images standardized image_blobs rows of width d, then scores them.
MiscibilityReport miscibility_score(const PairingConfig& config, std::size_t n_images, std::size_t m, std::size_t d,
                                    Rng& rng);

/// E||c_a - c_b|| for centroids of m i.i.d. N(0, I_d) draws.
double iid_centroid_distance(std::size_t m, std::size_t d);

/// Streaming per-dimension mean and maximum-likelihood variance (Welford).
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::size_t dim);

  void add(std::span<const double> row);
  void add(const Tensor& rows);

  std::size_t dim() const { return mean_.size(); }
  std::size_t count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  std::vector<double> variance() const;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_, m2_;
};

/// sum_j 0.5 (s_j^2 + mu_j^2 - 1 - ln s_j^2) for the fitted diagonal Gaussian.
/// Needs at least 1000 samples; a zero variance raises NumericalError.
double kl_to_gaussian(const MomentAccumulator& moments);
double kl_to_gaussian(const Tensor& samples);

/// Moments of the noise `config` pairs with `samples` standardized
/// image_blobs rows of width d (STD `data_std`). Rows are drawn and paired in
/// batches of `chunk`, so memory stays O(chunk d).
MomentAccumulator paired_noise_moments(const PairingConfig& config, std::size_t samples, std::size_t d,
                                       double data_std, Rng& rng, std::size_t chunk = 1024);

struct PerturbationSpec {
  Tensor base;                      // N_orig, one noise per row
  std::vector<Tensor> perturbations;
  std::vector<double> weights;      // must contain 0; all >= 0
  // Divide the perturbed noise by sqrt(1 + W^2) so it stays unit-variance.
  // Off by default: the plain sum is the studied quantity.
  bool renormalize = false;

  void validate() const;
};

struct PerturbationRow {
  double weight = 0.0;
  std::size_t perturbation = 0;
  double deviation = 0.0;  // mean row-wise L2 distance to the W=0 samples
};

struct PerturbationReport {
  std::vector<PerturbationRow> rows;
  std::vector<double> weights;
  std::vector<double> mean_deviation;  // per weight, over perturbations
  double reference_scale = 0.0;        // mean pairwise distance of the W=0 samples
  bool renormalize = false;
};

nlohmann::json to_json(const PerturbationReport& report);

/// Samples from base + W * perturbation for every (W, perturbation) with the
/// deterministic sampler matching the model target (DDIM or flow Euler).
PerturbationReport perturbation_study(const DenoiserModel& model, const NoiseSchedule& schedule,
                                      const PerturbationSpec& spec, std::size_t sampler_steps);

struct SweepRow {
  std::size_t k = 1;
  double mean_distance = 0.0;
  double delta_percent = 0.0;  // change of mean_distance vs k=1
  std::optional<std::int64_t> steps_to_threshold;
};

nlohmann::json to_json(const SweepRow& row);

/// Default k grid: 1, 2, 4, ..., 128.
std::vector<std::size_t> default_k_grid();

/// Mean image-noise distance of knn_select(k) for each k, relative to k=1.
/// `train`, when set, is called per k and its result stored in the row.
std::vector<SweepRow> sweep_k(const Tensor& images, const std::vector<std::size_t>& k_values, Rng& rng,
                              const std::function<std::optional<std::int64_t>(std::size_t)>& train = {});

using Point2 = std::array<double, 2>;
using Polyline = std::vector<Point2>;

/// PCA of all predicted-x0 points pooled over steps. `steps[s]` holds one row
/// per trajectory; the result is indexed [trajectory][step]. Component signs
/// make the largest-magnitude loading positive; missing components are 0.
std::vector<Polyline> trajectory_projection(const std::vector<Tensor>& steps);

/// DDIM from `noise` (one trajectory per row), recording predicted x0 at each
/// visited step, then trajectory_projection. Needs an epsilon model.
std::vector<Polyline> project_x0_trajectories(const DenoiserModel& model, const NoiseSchedule& schedule,
                                              const Tensor& noise, std::size_t sampler_steps);

/// Sign of the orientation determinant of (a, b, c), evaluated exactly.
int orientation(const Point2& a, const Point2& b, const Point2& c);

/// Proper crossings between segments of distinct polylines. Touching,
/// collinear overlap and zero-length segments do not count.
std::int64_t crossing_count(const std::vector<Polyline>& trajectories);

}  // namespace imd
