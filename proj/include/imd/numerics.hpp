#pragma once

#include "imd/rng.hpp"
#include "imd/tensor.hpp"

namespace imd {

/// I.i.d. standard normal tensor drawn in row-major order from `rng`.
Tensor gaussian_sample(Rng& rng, const Shape& shape);

/// m x n matrix of squared Euclidean distances between the rows of `a`
/// (m x d) and `b` (n x d). Computed from coordinate differences, so entries
/// are never negative and vanish only for identical rows.
Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b);

/// Element-wise square root of pairwise_sq_dist.
Tensor l2_dist(const Tensor& a, const Tensor& b);

/// Squared distance between two equal-length vectors.
double sq_dist(std::span<const double> a, std::span<const double> b);

}  // namespace imd
