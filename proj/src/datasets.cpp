#include "imd/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "imd/error.hpp"

namespace imd {
namespace {

constexpr double kPi = std::numbers::pi;

Tensor two_moons(std::size_t n, Rng& rng) {
  Tensor x = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = kPi * rng.uniform();
    if (i % 2 == 0) {
      x(i, 0) = std::cos(t);
      x(i, 1) = std::sin(t);
    } else {
      x(i, 0) = 1.0 - std::cos(t);
      x(i, 1) = 0.5 - std::sin(t);
    }
    x(i, 0) += 0.05 * rng.normal();
    x(i, 1) += 0.05 * rng.normal();
  }
  return x;
}

Tensor eight_gaussians(std::size_t n, Rng& rng) {
  Tensor x = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = kPi / 4.0 * static_cast<double>(rng.below(8));
    x(i, 0) = std::cos(angle) + 0.1 * rng.normal();
    x(i, 1) = std::sin(angle) + 0.1 * rng.normal();
  }
  return x;
}

Tensor checkerboard(std::size_t n, Rng& rng) {
  Tensor x = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 4.0 * rng.uniform() - 2.0;
    const double b = rng.uniform() - 2.0 * static_cast<double>(rng.below(2));
    x(i, 0) = a;
    x(i, 1) = b + static_cast<double>(static_cast<long>(std::floor(a)) & 1);
  }
  return x;
}

Tensor swiss_roll_2d(std::size_t n, Rng& rng) {
  Tensor x = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 1.5 * kPi * (1.0 + 2.0 * rng.uniform());
    x(i, 0) = t * std::cos(t) + 0.3 * rng.normal();
    x(i, 1) = t * std::sin(t) + 0.3 * rng.normal();
  }
  return x;
}

}  // namespace

const std::vector<std::string>& builtin_datasets() {
  static const std::vector<std::string> names = {"two_moons", "eight_gaussians", "checkerboard", "swiss_roll_2d",
                                                 "image_blobs"};
  return names;
}

RasterLayout raster_layout(std::size_t dim) {
  if (dim == 0) throw ConfigError("raster width must be >= 1");
  for (std::size_t c : {3u, 1u}) {
    if (dim % c) continue;
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim / c))));
    if (side * side * c == dim) return {c, side, side};
  }
  return {1, 1, dim};
}

Tensor image_blobs(std::size_t n, std::size_t channels, std::size_t height, std::size_t width, Rng& rng) {
  const std::size_t plane = height * width;
  Tensor x = Tensor::matrix(n, channels * plane);
  const double extent = static_cast<double>(std::max(height, width));
  std::vector<double> amp(channels);
  for (std::size_t i = 0; i < n; ++i) {
    auto img = x.row(i);
    for (std::size_t c = 0; c < channels; ++c) {
      const double bg = 0.3 * rng.normal();
      std::fill_n(img.begin() + c * plane, plane, bg);
    }
    const std::size_t blobs = 1 + rng.below(3);
    for (std::size_t b = 0; b < blobs; ++b) {
      const double cy = rng.uniform() * static_cast<double>(height);
      const double cx = rng.uniform() * static_cast<double>(width);
      const double sigma = extent * (0.06 + 0.14 * rng.uniform());
      for (double& a : amp) a = rng.normal();
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t xx = 0; xx < width; ++xx) {
          const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(xx) + 0.5 - cx;
          const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
          for (std::size_t c = 0; c < channels; ++c) img[c * plane + y * width + xx] += amp[c] * w;
        }
      }
    }
  }
  return x;
}

void standardize(Tensor& data, double target_std) {
  if (!(target_std > 0.0)) throw ConfigError("dataset std must be > 0");
  const std::size_t n = data.rows(), d = data.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += data(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      data(i, j) -= mean[j];
      ss += data(i, j) * data(i, j);
    }
  const double current = std::sqrt(ss / static_cast<double>(n * d));
  if (current == 0.0) return;
  const double f = target_std / current;
  for (double& v : data.data()) v *= f;
}

Tensor make_dataset(const DatasetSpec& spec, Rng& rng) {
  if (spec.n < 2) throw ConfigError("dataset size must be >= 2");
  Tensor x;
  if (spec.name == "two_moons") {
    x = two_moons(spec.n, rng);
  } else if (spec.name == "eight_gaussians") {
    x = eight_gaussians(spec.n, rng);
  } else if (spec.name == "checkerboard") {
    x = checkerboard(spec.n, rng);
  } else if (spec.name == "swiss_roll_2d") {
    x = swiss_roll_2d(spec.n, rng);
  } else if (spec.name == "image_blobs") {
    const auto layout = raster_layout(spec.dim);
    x = image_blobs(spec.n, layout.channels, layout.height, layout.width, rng);
  } else {
    throw ConfigError("unknown dataset '" + spec.name + "'");
  }
  standardize(x, spec.std);
  return x;
}

}  // namespace imd
