#include "imd/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "imd/error.hpp"
#include "imd/numerics.hpp"

namespace imd {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::ddpm_linear_beta ? "ddpm_linear_beta" : "flow_linear";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "ddpm_linear_beta") return ScheduleKind::ddpm_linear_beta;
  if (name == "flow_linear") return ScheduleKind::flow_linear;
  throw ConfigError("unknown schedule kind '" + name + "'");
}

void NoiseSchedule::validate() const {
  if (alpha.size() < 2) throw ConfigError("schedule needs at least one step");
  if (alpha.front() != 1.0) throw ConfigError("schedule must start at alpha = 1");
  for (std::size_t t = 1; t < alpha.size(); ++t) {
    if (!(alpha[t] < alpha[t - 1]) || !(alpha[t] > 0.0)) {
      throw ConfigError("schedule alpha must be positive and strictly decreasing (step " + std::to_string(t) + ")");
    }
  }
  if (alpha.back() > 0.01) throw ConfigError("schedule ends at alpha_T = " + std::to_string(alpha.back()) + " > 0.01");
}

NoiseSchedule make_ddpm_linear_schedule(std::size_t steps) {
  if (steps < 1) throw ConfigError("schedule length must be >= 1");
  NoiseSchedule s{ScheduleKind::ddpm_linear_beta, std::vector<double>(steps + 1)};
  const double stretch = 1000.0 / static_cast<double>(steps);
  const double lo = 1e-4 * stretch, hi = 0.02 * stretch;
  if (hi >= 1.0) throw ConfigError("schedule too short for linear betas: T = " + std::to_string(steps));
  s.alpha[0] = 1.0;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    const double beta = lo + (hi - lo) * frac;
    s.alpha[t] = s.alpha[t - 1] * (1.0 - beta);
  }
  s.validate();
  return s;
}

NoiseSchedule make_flow_linear_schedule(std::size_t steps) {
  if (steps < 1) throw ConfigError("schedule length must be >= 1");
  NoiseSchedule s{ScheduleKind::flow_linear, std::vector<double>(steps + 1)};
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = 0.999 * static_cast<double>(i) / static_cast<double>(steps);
    s.alpha[i] = (1 - t) * (1 - t) / ((1 - t) * (1 - t) + t * t);
  }
  s.validate();
  return s;
}

NoiseSchedule make_schedule(ScheduleKind kind, std::size_t steps) {
  return kind == ScheduleKind::ddpm_linear_beta ? make_ddpm_linear_schedule(steps) : make_flow_linear_schedule(steps);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

}  // namespace

Tensor forward_diffuse(const Tensor& x, const Tensor& n, double alpha) {
  require_same_shape(x, n, "forward_diffuse");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("forward_diffuse: alpha must lie in [0, 1]");
  const double a = std::sqrt(alpha), b = std::sqrt(1.0 - alpha);
  Tensor out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) out.data()[k] = a * x.data()[k] + b * n.data()[k];
  return out;
}

FlowPoint flow_interpolate(const Tensor& x, const Tensor& n, double t) {
  require_same_shape(x, n, "flow_interpolate");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("flow_interpolate: t must lie in [0, 1]");
  FlowPoint p{Tensor(x.shape()), Tensor(x.shape())};
  for (std::size_t k = 0; k < x.size(); ++k) {
    p.x_t.data()[k] = (1.0 - t) * x.data()[k] + t * n.data()[k];
    p.velocity.data()[k] = n.data()[k] - x.data()[k];
  }
  return p;
}

Tensor predict_x0(const Tensor& x_tau, const Tensor& n_pred, double alpha) {
  require_same_shape(x_tau, n_pred, "predict_x0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("predict_x0: alpha must lie in (0, 1]");
  const double sa = std::sqrt(alpha), sb = std::sqrt(1.0 - alpha);
  Tensor out(x_tau.shape());
  for (std::size_t k = 0; k < x_tau.size(); ++k) out.data()[k] = x_tau.data()[k] / sa - sb / sa * n_pred.data()[k];
  return out;
}

TrainState TrainState::create(DenoiserModel model, NoiseSchedule schedule, PairingConfig pairing, AdamConfig optimizer,
                              Rng rng) {
  pairing.validate();
  schedule.validate();
  TrainState s;
  s.adam_m.assign(model.parameters().size(), 0.0);
  s.adam_v.assign(model.parameters().size(), 0.0);
  s.model = std::move(model);
  s.schedule = std::move(schedule);
  s.pairing = pairing;
  s.optimizer = optimizer;
  s.rng = rng;
  return s;
}

TrainBatch build_train_batch(TrainState& state, const Tensor& data_batch) {
  if (data_batch.rows() == 0) throw std::invalid_argument("train_step: empty batch");
  const Tensor x = state.pairing.method == PairingMethod::scaled ? scale_images(data_batch, state.pairing.scale)
                                                                   : data_batch;
  PairedNoise paired = make_pairs(x, state.pairing, state.rng);

  const std::size_t n = x.rows(), d = x.cols();
  TrainBatch batch{Tensor(x.shape()), std::vector<double>(n), Tensor(x.shape()), std::move(paired.pairing)};
  const bool eps = state.model.spec().target == PredictionTarget::epsilon;
  const std::size_t T = state.schedule.steps();
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    const auto ni = paired.noise.row(i);
    auto xt = batch.x_t.row(i);
    auto target = batch.target.row(i);
    if (eps) {
      const std::size_t t = 1 + static_cast<std::size_t>(state.rng.below(T));
      const double a = std::sqrt(state.schedule.alpha[t]), b = std::sqrt(1.0 - state.schedule.alpha[t]);
      for (std::size_t k = 0; k < d; ++k) {
        xt[k] = a * xi[k] + b * ni[k];
        target[k] = ni[k];
      }
      batch.time_inputs[i] = static_cast<double>(t) / static_cast<double>(T);
    } else {
      const double t = state.rng.uniform();
      for (std::size_t k = 0; k < d; ++k) {
        xt[k] = (1.0 - t) * xi[k] + t * ni[k];
        target[k] = ni[k] - xi[k];
      }
      batch.time_inputs[i] = t;
    }
  }
  return batch;
}

double mse_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse_loss");
  double s = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double e = prediction.data()[k] - target.data()[k];
    s += e * e;
  }
  return s / static_cast<double>(target.size());
}

double train_step(TrainState& state, const Tensor& data_batch) {
  TrainBatch batch = build_train_batch(state, data_batch);
  auto abort = [&](double loss) {
    double max_abs = 0.0;
    for (double p : state.model.parameters()) max_abs = std::max(max_abs, std::fabs(p));
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.step << " (loss=" << loss << ", max |param|=" << max_abs
        << ", pairing=" << state.pairing.tag() << ")";
    throw NumericalError(msg.str());
  };
  DenoiserModel::Pass pass;
  try {
    pass = state.model.forward_cached(batch.x_t, batch.time_inputs);
  } catch (const NumericalError&) {
    abort(std::numeric_limits<double>::quiet_NaN());
  }
  const double loss = mse_loss(pass.output, batch.target);
  if (!std::isfinite(loss)) abort(loss);

  Tensor grad_out = pass.output;
  const double scale = 2.0 / static_cast<double>(grad_out.size());
  for (std::size_t k = 0; k < grad_out.size(); ++k) {
    grad_out.data()[k] = scale * (pass.output.data()[k] - batch.target.data()[k]);
  }
  const std::vector<double> grads = state.model.backward(pass, grad_out);

  const auto& opt = state.optimizer;
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  auto params = state.model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.adam_m[k] = opt.beta1 * state.adam_m[k] + (1.0 - opt.beta1) * grads[k];
    state.adam_v[k] = opt.beta2 * state.adam_v[k] + (1.0 - opt.beta2) * grads[k] * grads[k];
    params[k] -= opt.lr * (state.adam_m[k] / c1) / (std::sqrt(state.adam_v[k] / c2) + opt.eps);
  }
  return loss;
}

Predictor as_predictor(const DenoiserModel& model) {
  return [&model](const Tensor& x, std::span<const double> t) { return model.forward(x, t); };
}

DdimResult sample_ddim(const Predictor& eps, const NoiseSchedule& schedule, std::size_t n_steps,
                       const Tensor& initial_noise) {
  const std::size_t T = schedule.steps();
  if (n_steps < 1) throw std::invalid_argument("sample_ddim: n_steps must be >= 1");
  if (n_steps > T) throw std::invalid_argument("sample_ddim: n_steps exceeds schedule length");

  std::vector<std::size_t> seq(n_steps + 1);
  for (std::size_t i = 0; i <= n_steps; ++i) {
    seq[n_steps - i] = static_cast<std::size_t>(std::llround(static_cast<double>(T) * i / n_steps));
  }

  DdimResult out;
  Tensor x = initial_noise;
  std::vector<double> times(x.rows());
  for (std::size_t s = 0; s < n_steps; ++s) {
    const std::size_t t = seq[s], t_next = seq[s + 1];
    std::ranges::fill(times, static_cast<double>(t) / static_cast<double>(T));
    const Tensor n_pred = eps(x, times);
    Tensor x0 = predict_x0(x, n_pred, schedule.alpha[t]);
    const double a = std::sqrt(schedule.alpha[t_next]), b = std::sqrt(1.0 - schedule.alpha[t_next]);
    for (std::size_t k = 0; k < x.size(); ++k) x.data()[k] = a * x0.data()[k] + b * n_pred.data()[k];
    out.timesteps.push_back(t);
    out.x0_trajectory.push_back(std::move(x0));
  }
  out.samples = std::move(x);
  return out;
}

DdimResult sample_ddim(const DenoiserModel& model, const NoiseSchedule& schedule, std::size_t n_steps,
                       const Tensor& initial_noise) {
  if (model.spec().target != PredictionTarget::epsilon) {
    throw std::invalid_argument("sample_ddim: model must predict epsilon");
  }
  return sample_ddim(as_predictor(model), schedule, n_steps, initial_noise);
}

Tensor sample_flow_euler(const Predictor& velocity, std::size_t n_steps, const Tensor& initial_noise) {
  if (n_steps < 1) throw std::invalid_argument("sample_flow_euler: n_steps must be >= 1");
  Tensor x = initial_noise;
  std::vector<double> times(x.rows());
  const double h = 1.0 / static_cast<double>(n_steps);
  for (std::size_t i = 0; i < n_steps; ++i) {
    std::ranges::fill(times, 1.0 - static_cast<double>(i) * h);
    const Tensor v = velocity(x, times);
    for (std::size_t k = 0; k < x.size(); ++k) x.data()[k] -= h * v.data()[k];
  }
  return x;
}

Tensor sample_flow_euler(const DenoiserModel& model, std::size_t n_steps, const Tensor& initial_noise) {
  if (model.spec().target != PredictionTarget::velocity) {
    throw std::invalid_argument("sample_flow_euler: model must predict velocity");
  }
  return sample_flow_euler(as_predictor(model), n_steps, initial_noise);
}

}  // namespace imd
