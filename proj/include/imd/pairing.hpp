#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "imd/rng.hpp"
#include "imd/tensor.hpp"

namespace imd {

enum class PairingMethod { random, assignment, knn, scaled };
enum class CostMetric { l2, sq_l2 };

std::string to_string(PairingMethod method);
PairingMethod parse_pairing_method(const std::string& name);
std::string to_string(CostMetric metric);
CostMetric parse_cost_metric(const std::string& name);

/// Image i is trained against noise `permutation[i]`.
struct PairingResult {
  std::vector<std::size_t> permutation;
  std::vector<double> pair_distance;  // L2, data-space units
  PairingMethod method = PairingMethod::random;
  std::optional<std::size_t> k;
  std::optional<double> scale;

  double total_distance() const;
};

nlohmann::json to_json(const PairingResult& result);

/// Noise batch aligned row-for-row with the images plus the pairing record.
struct PairedNoise {
  Tensor noise;
  PairingResult pairing;
};

/// Full pairing configuration. `inner` is only consulted for `scaled`.
struct PairingConfig {
  PairingMethod method = PairingMethod::random;
  std::size_t k = 1;
  double scale = 1.0;
  PairingMethod inner = PairingMethod::random;
  CostMetric cost = CostMetric::l2;

  void validate() const;
  std::string tag() const;
};

nlohmann::json to_json(const PairingConfig& config);

/// One fresh N(0, I) noise per image, identity permutation.
PairedNoise pair_random(const Tensor& images, Rng& rng);

/// Optimal bijection between images and noises under `cost`.
PairingResult pair_assignment(const Tensor& images, const Tensor& noises, CostMetric cost = CostMetric::l2);

/// For every image, in batch order, draws k Gaussian candidates and keeps the
/// L2-closest (lowest candidate index on ties). Consumes exactly n*k*d
/// normals: candidate j of image i is the (i*k + j)-th row drawn.
/// `threads` > 1 pre-draws every candidate and selects in parallel; the
/// result is identical to the sequential path.
PairedNoise knn_select(const Tensor& images, std::size_t k, Rng& rng, unsigned threads = 1);

/// Selection half of knn_select over explicit candidates: row i*k + j of
/// `candidates` is candidate j for image i.
PairedNoise knn_select_from(const Tensor& images, const Tensor& candidates, std::size_t k, unsigned threads = 1);

/// Multiplies every element by s > 0.
Tensor scale_images(const Tensor& images, double s);

/// Noise rows reordered so row i is `noises[permutation[i]]`.
Tensor apply_pairing(const Tensor& noises, const PairingResult& pairing);

/// Runs the configured pairing on a batch. For `scaled`, `images` is expected
/// to be already scaled (see scale_images) and the inner method is applied.
PairedNoise make_pairs(const Tensor& images, const PairingConfig& config, Rng& rng);

}  // namespace imd
