#include "imd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imd {

Tensor gaussian_sample(Rng& rng, const Shape& shape) {
  Tensor out(shape);
  rng.fill_normal(out.data());
  return out;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  const std::size_t d = a.size();
  // Eight lane-wise partial sums vectorise without reassociating any single
  // accumulator; rows shorter than eight sum left to right.
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  const double* pa = a.data();
  const double* pb = b.data();
  std::size_t k = 0;
  for (; k + kLanes <= d; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double e = pa[k + l] - pb[k + l];
      acc[l] += e * e;
    }
  }
  for (; k < d; ++k) {
    const double e = pa[k] - pb[k];
    acc[0] += e * e;
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("pairwise_sq_dist: empty input");
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("pairwise_sq_dist: trailing dimension mismatch (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
  }
  const std::size_t m = a.rows();
  const std::size_t n = b.rows();
  Tensor out = Tensor::matrix(m, n);
  // Blocks of rows of `a` share each row of `b` while it is hot in cache.
  constexpr std::size_t kBlock = 8;
  for (std::size_t i0 = 0; i0 < m; i0 += kBlock) {
    const std::size_t i1 = std::min(m, i0 + kBlock);
    for (std::size_t j = 0; j < n; ++j) {
      const auto bj = b.row(j);
      for (std::size_t i = i0; i < i1; ++i) out(i, j) = sq_dist(a.row(i), bj);
    }
  }
  return out;
}

Tensor l2_dist(const Tensor& a, const Tensor& b) {
  Tensor out = pairwise_sq_dist(a, b);
  for (double& v : out.data()) v = std::sqrt(v);
  return out;
}

}  // namespace imd
