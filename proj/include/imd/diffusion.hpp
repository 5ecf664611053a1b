#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imd/model.hpp"
#include "imd/pairing.hpp"
#include "imd/rng.hpp"
#include "imd/tensor.hpp"

namespace imd {

enum class ScheduleKind { ddpm_linear_beta, flow_linear };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

/// Cumulative signal level per step: alpha[0] = 1, strictly decreasing,
/// alpha[T] in (0, 0.01].
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::ddpm_linear_beta;
  std::vector<double> alpha;

  std::size_t steps() const { return alpha.size() - 1; }
  void validate() const;
};

/// DDPM linear betas from 1e-4 to 0.02 at T = 1000, stretched by 1000/T for
/// other lengths so the total noise injected stays comparable.
NoiseSchedule make_ddpm_linear_schedule(std::size_t steps = 1000);

/// Signal level of the straight interpolation x_t = (1-t) x + t n, expressed
/// as the variance-normalised fraction (1-t)^2 / ((1-t)^2 + t^2) on a grid
/// t_i = 0.999 i / T.
NoiseSchedule make_flow_linear_schedule(std::size_t steps = 1000);

NoiseSchedule make_schedule(ScheduleKind kind, std::size_t steps);

/// sqrt(alpha) x + sqrt(1 - alpha) n.
Tensor forward_diffuse(const Tensor& x, const Tensor& n, double alpha);

struct FlowPoint {
  Tensor x_t;
  Tensor velocity;
};

/// x_t = (1 - t) x + t n and its velocity target n - x.
FlowPoint flow_interpolate(const Tensor& x, const Tensor& n, double t);

/// Clean-data estimate from a noisy feature and predicted noise:
/// x_tau / sqrt(alpha) - sqrt(1 - alpha) / sqrt(alpha) * n_pred.
Tensor predict_x0(const Tensor& x_tau, const Tensor& n_pred, double alpha);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Model, optimizer moments and the stream that drives pairing and timestep
/// draws. Single-owner: train_step mutates it in place.
struct TrainState {
  DenoiserModel model;
  NoiseSchedule schedule;
  PairingConfig pairing;
  AdamConfig optimizer;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step = 0;
  Rng rng{0};

  static TrainState create(DenoiserModel model, NoiseSchedule schedule, PairingConfig pairing, AdamConfig optimizer,
                           Rng rng);
};

/// Everything the loss needs for one batch.
struct TrainBatch {
  Tensor x_t;
  std::vector<double> time_inputs;
  Tensor target;
  PairingResult pairing;
};

/// Pairs the batch (scaling it first for `scaled`), then for each example
/// draws a timestep and builds the noisy input and regression target.
/// Epsilon models: t uniform on {1..T}, target = paired noise, time input
/// t / T. Velocity models: t uniform on [0, 1), target = n - x. Draw order
/// on state.rng: all pairing noise first, then one timestep per example.
TrainBatch build_train_batch(TrainState& state, const Tensor& data_batch);

/// Mean of squared element differences.
double mse_loss(const Tensor& prediction, const Tensor& target);

/// One Adam update on the batch MSE. Returns the loss before the update.
/// Throws NumericalError if the loss is not finite.
double train_step(TrainState& state, const Tensor& data_batch);

/// Maps (x, time inputs) to the network's prediction for a batch.
using Predictor = std::function<Tensor(const Tensor& x, std::span<const double> time_inputs)>;

Predictor as_predictor(const DenoiserModel& model);

struct DdimResult {
  Tensor samples;
  std::vector<Tensor> x0_trajectory;   // one entry per visited step, noisiest first
  std::vector<std::size_t> timesteps;  // schedule index of each visited step
};

/// Deterministic DDIM: schedule indices round(T i / n_steps) for
/// i = n_steps..0, no noise injected. Records the predicted x0 at every
/// visited step, evaluated at that step's own alpha.
DdimResult sample_ddim(const Predictor& eps, const NoiseSchedule& schedule, std::size_t n_steps,
                       const Tensor& initial_noise);
DdimResult sample_ddim(const DenoiserModel& model, const NoiseSchedule& schedule, std::size_t n_steps,
                       const Tensor& initial_noise);

/// Euler integration of the velocity field from t = 1 to t = 0:
/// x <- x - v(x, t) / n_steps at t = 1 - i / n_steps.
Tensor sample_flow_euler(const Predictor& velocity, std::size_t n_steps, const Tensor& initial_noise);
Tensor sample_flow_euler(const DenoiserModel& model, std::size_t n_steps, const Tensor& initial_noise);

}  // namespace imd
