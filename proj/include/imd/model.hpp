#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "imd/rng.hpp"
#include "imd/tensor.hpp"

namespace imd {

enum class PredictionTarget { epsilon, velocity };

std::string to_string(PredictionTarget target);
PredictionTarget parse_prediction_target(const std::string& name);

struct ModelSpec {
  std::size_t data_dim = 2;
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::size_t time_embedding = 32;  // even; sin/cos pairs
  PredictionTarget target = PredictionTarget::epsilon;

  std::size_t input_width() const { return data_dim + time_embedding; }
  std::size_t parameter_count() const;
  void validate() const;
};

/// Sinusoidal features of t in [0, 1]: sin and cos of 1000 t f_k with
/// f_k = 10000^(-k / half), k = 0..half-1.
void time_embedding(double t, std::span<double> out);

/// Time-conditioned MLP with SiLU hidden activations.
///
/// Parameters live in one flat buffer, layer by layer: the weight matrix
/// (out x in, row-major) followed by the bias. The network input is the data
/// row with the time embedding appended; the output has the data width.
class DenoiserModel {
 public:
  DenoiserModel() = default;
  explicit DenoiserModel(ModelSpec spec);  // all parameters zero

  /// Weights ~ N(0, 1/fan_in), biases zero.
  static DenoiserModel initialize(ModelSpec spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return layers_.size(); }

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  std::span<double> weights(std::size_t layer);
  std::span<double> bias(std::size_t layer);
  std::size_t fan_in(std::size_t layer) const { return layers_[layer].in; }
  std::size_t fan_out(std::size_t layer) const { return layers_[layer].out; }

  Tensor forward(const Tensor& x_t, std::span<const double> time_inputs) const;

  /// Reverse-mode gradient of <grad_out, forward(x_t, t)> with respect to the
  /// parameters, in the same flat layout as parameters().
  std::vector<double> backward(const Tensor& x_t, std::span<const double> time_inputs, const Tensor& grad_out) const;

  struct Pass;
  /// Forward pass retaining activations; `output` is the model output.
  Pass forward_cached(const Tensor& x_t, std::span<const double> time_inputs) const;
  std::vector<double> backward(const Pass& pass, const Tensor& grad_out) const;

 private:
  struct Layer {
    std::size_t in, out, offset;
  };

  ModelSpec spec_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

struct DenoiserModel::Pass {
  std::vector<std::vector<double>> inputs;          // input to each layer, n x in
  std::vector<std::vector<double>> preactivations;  // hidden layers only, n x out
  Tensor output;
};

}  // namespace imd
