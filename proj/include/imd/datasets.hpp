#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "imd/rng.hpp"
#include "imd/tensor.hpp"

namespace imd {

struct DatasetSpec {
  std::string name = "eight_gaussians";
  std::size_t n = 8192;
  double std = 0.5;        // target pixel STD after standardisation
  std::size_t dim = 3072;  // image_blobs only
};

const std::vector<std::string>& builtin_datasets();

/// Builtin dataset, centred per dimension and rescaled so the STD over all
/// elements equals spec.std. Deterministic given the rng state.
Tensor make_dataset(const DatasetSpec& spec, Rng& rng);

/// Centre each column and scale globally to the requested STD.
void standardize(Tensor& data, double target_std);

/// Raster images of 1-3 soft Gaussian blobs over a flat background, shape
/// n x (channels*height*width). Not standardised.
Tensor image_blobs(std::size_t n, std::size_t channels, std::size_t height, std::size_t width, Rng& rng);

/// Picks a raster layout for a flat width: 3 x s x s, 1 x s x s or 1 x 1 x d.
struct RasterLayout {
  std::size_t channels, height, width;
};
RasterLayout raster_layout(std::size_t dim);

}  // namespace imd
