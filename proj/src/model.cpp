#include "imd/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "imd/error.hpp"

namespace imd {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::string to_string(PredictionTarget target) {
  return target == PredictionTarget::epsilon ? "epsilon" : "velocity";
}

PredictionTarget parse_prediction_target(const std::string& name) {
  if (name == "epsilon") return PredictionTarget::epsilon;
  if (name == "velocity") return PredictionTarget::velocity;
  throw ConfigError("unknown prediction target '" + name + "'");
}

std::size_t ModelSpec::parameter_count() const {
  std::size_t count = 0, in = input_width();
  for (std::size_t h : hidden) {
    count += h * in + h;
    in = h;
  }
  return count + data_dim * in + data_dim;
}

void ModelSpec::validate() const {
  if (data_dim == 0) throw ConfigError("model data width must be >= 1");
  if (time_embedding == 0 || time_embedding % 2 != 0) throw ConfigError("time embedding width must be even and >= 2");
  if (std::ranges::any_of(hidden, [](std::size_t h) { return h == 0; })) throw ConfigError("hidden widths must be >= 1");
}

void time_embedding(double t, std::span<double> out) {
  const std::size_t half = out.size() / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    const double arg = 1000.0 * t * freq;
    out[k] = std::sin(arg);
    out[half + k] = std::cos(arg);
  }
}

DenoiserModel::DenoiserModel(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t in = spec_.input_width(), offset = 0;
  auto add = [&](std::size_t out) {
    layers_.push_back({in, out, offset});
    offset += in * out + out;
    in = out;
  };
  for (std::size_t h : spec_.hidden) add(h);
  add(spec_.data_dim);
  params_.assign(offset, 0.0);
}

DenoiserModel DenoiserModel::initialize(ModelSpec spec, Rng& rng) {
  DenoiserModel m(std::move(spec));
  for (std::size_t l = 0; l < m.layers_.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(m.layers_[l].in));
    for (double& w : m.weights(l)) w = scale * rng.normal();
  }
  return m;
}

std::span<double> DenoiserModel::weights(std::size_t layer) {
  const auto& L = layers_.at(layer);
  return {params_.data() + L.offset, L.in * L.out};
}

std::span<double> DenoiserModel::bias(std::size_t layer) {
  const auto& L = layers_.at(layer);
  return {params_.data() + L.offset + L.in * L.out, L.out};
}

DenoiserModel::Pass DenoiserModel::forward_cached(const Tensor& x_t, std::span<const double> time_inputs) const {
  if (layers_.empty()) throw std::logic_error("model has no layers");
  const std::size_t n = x_t.rows();
  if (x_t.cols() != spec_.data_dim) {
    throw std::invalid_argument("model_forward: input width " + std::to_string(x_t.cols()) + " but model expects " +
                                std::to_string(spec_.data_dim));
  }
  if (time_inputs.size() != n) throw std::invalid_argument("model_forward: one time value per row required");

  Pass pass;
  const std::size_t d = spec_.data_dim, in0 = spec_.input_width();
  std::vector<double> input(n * in0);
  for (std::size_t i = 0; i < n; ++i) {
    std::ranges::copy(x_t.row(i), input.begin() + i * in0);
    time_embedding(time_inputs[i], {input.data() + i * in0 + d, spec_.time_embedding});
  }
  pass.inputs.push_back(std::move(input));

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    // Operands are copied into Eigen-owned (aligned) storage: vectorised
    // kernels peel unaligned heads, so results on heap-allocated buffers would
    // otherwise depend on where malloc put them.
    const RowMatrix h = ConstMatrixMap(pass.inputs.back().data(), n, L.in);
    const RowMatrix w = ConstMatrixMap(params_.data() + L.offset, L.out, L.in);
    const Eigen::RowVectorXd b = ConstVectorMap(params_.data() + L.offset + L.in * L.out, L.out);
    RowMatrix zm(n, L.out);
    zm.noalias() = h * w.transpose();
    zm.rowwise() += b;
    std::vector<double> z(zm.data(), zm.data() + zm.size());
    if (l + 1 == layers_.size()) {
      if (!std::ranges::all_of(z, [](double v) { return std::isfinite(v); })) {
        throw NumericalError("model_forward: non-finite output");
      }
      pass.output = Tensor({n, L.out}, std::move(z));
    } else {
      std::vector<double> a(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) a[k] = z[k] * sigmoid(z[k]);
      pass.preactivations.push_back(std::move(z));
      pass.inputs.push_back(std::move(a));
    }
  }
  if (x_t.shape().size() > 2) pass.output = pass.output.reshaped(x_t.shape());
  return pass;
}

Tensor DenoiserModel::forward(const Tensor& x_t, std::span<const double> time_inputs) const {
  return forward_cached(x_t, time_inputs).output;
}

std::vector<double> DenoiserModel::backward(const Pass& pass, const Tensor& grad_out) const {
  const std::size_t n = pass.output.rows();
  if (grad_out.rows() != n || grad_out.cols() != spec_.data_dim) {
    throw std::invalid_argument("model_backward: grad_out shape " + shape_string(grad_out.shape()) +
                                " does not match output " + shape_string(pass.output.shape()));
  }
  std::vector<double> grads(params_.size(), 0.0);
  RowMatrix g = ConstMatrixMap(grad_out.data().data(), n, spec_.data_dim);  // aligned copy
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& L = layers_[l];
    const RowMatrix h = ConstMatrixMap(pass.inputs[l].data(), n, L.in);
    const RowMatrix gw = g.transpose() * h;
    const Eigen::RowVectorXd gb = g.colwise().sum();
    std::copy(gw.data(), gw.data() + gw.size(), grads.begin() + static_cast<std::ptrdiff_t>(L.offset));
    std::copy(gb.data(), gb.data() + gb.size(), grads.begin() + static_cast<std::ptrdiff_t>(L.offset + L.in * L.out));
    if (l == 0) break;
    const RowMatrix w = ConstMatrixMap(params_.data() + L.offset, L.out, L.in);
    RowMatrix upstream = g * w;
    const auto& z = pass.preactivations[l - 1];
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double s = sigmoid(z[k]);
      upstream.data()[k] *= s * (1.0 + z[k] * (1.0 - s));
    }
    g = std::move(upstream);
  }
  return grads;
}

std::vector<double> DenoiserModel::backward(const Tensor& x_t, std::span<const double> time_inputs,
                                            const Tensor& grad_out) const {
  return backward(forward_cached(x_t, time_inputs), grad_out);
}

}  // namespace imd
