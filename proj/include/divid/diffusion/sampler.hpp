#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/core/tensor.hpp"
#include "divid/diffusion/predictor.hpp"
#include "divid/diffusion/schedule.hpp"

namespace divid::diffusion {

// DDIM sampling settings. An empty `timestep_subsequence` means "uniform spacing over
// [1, depth]" where depth defaults to the schedule length.
struct SamplerConfig {
  int ddim_steps = 20;
  double eta = 0.0;
  std::vector<int> timestep_subsequence;
  int depth = 0;
  std::uint64_t seed = 0;

  std::vector<int> timesteps(const NoiseSchedule& schedule) const {
    if (eta < 0.0) throw UsageError("eta must be non-negative");
    if (!timestep_subsequence.empty()) {
      for (std::size_t i = 0; i < timestep_subsequence.size(); ++i) {
        schedule.check_timestep(timestep_subsequence[i]);
        if (i > 0 && timestep_subsequence[i] <= timestep_subsequence[i - 1]) {
          throw UsageError("timestep subsequence must be strictly ascending");
        }
      }
      return timestep_subsequence;
    }
    const int top = depth > 0 ? depth : schedule.total_steps();
    if (top > schedule.total_steps()) throw UsageError("inversion depth exceeds schedule length");
    if (ddim_steps > top) {
      throw UsageError("ddim_steps " + std::to_string(ddim_steps) + " exceeds diffusion steps " + std::to_string(top));
    }
    return select_ddim_timesteps(top, ddim_steps);
  }
};

template <typename T>
struct BasicLatentState {
  BasicTensor<T> values;
  int t = 0;
};

using LatentState = BasicLatentState<float>;

// ---- coefficient-level updates (no schedule lookups) ----

template <typename T>
BasicTensor<T> forward_mix(const BasicTensor<T>& x0, const BasicTensor<T>& eps, double alpha_bar) {
  require_same_shape(x0, eps, "forward_diffuse");
  return axpby(static_cast<T>(std::sqrt(alpha_bar)), x0, static_cast<T>(std::sqrt(1.0 - alpha_bar)), eps);
}

template <typename T>
BasicTensor<T> x0_from_eps(const BasicTensor<T>& x_t, const BasicTensor<T>& eps_pred, double alpha_bar) {
  require_same_shape(x_t, eps_pred, "predict_x0");
  if (!(alpha_bar > 0.0)) throw NumericError("predict_x0: alpha_bar is zero, division by zero");
  const double inv = 1.0 / std::sqrt(alpha_bar);
  const double c = std::sqrt(1.0 - alpha_bar);
  BasicTensor<T> out(x_t.shape());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    out[i] = static_cast<T>((static_cast<double>(x_t[i]) - c * static_cast<double>(eps_pred[i])) * inv);
  }
  return out;
}

inline double sigma_from_alpha_bars(double alpha_bar_t, double alpha_bar_prev, double eta) {
  if (eta < 0.0) throw UsageError("eta must be non-negative");
  if (eta == 0.0) return 0.0;
  if (alpha_bar_t == 1.0) throw NumericError("ddim_sigma: alpha_bar_t == 1 makes the variance ratio undefined");
  const double ratio = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar_t);
  const double inner = 1.0 - alpha_bar_t / alpha_bar_prev;
  return eta * std::sqrt(std::max(ratio, 0.0)) * std::sqrt(std::max(inner, 0.0));
}

// x_{t-1} = (x_t - (1 - alpha) / sqrt(1 - alpha_bar) * eps_pred) / sqrt(alpha) + sigma * noise
template <typename T>
BasicTensor<T> ddpm_update(const BasicTensor<T>& x_t, const BasicTensor<T>& eps_pred, double alpha, double alpha_bar,
                           double sigma, const BasicTensor<T>* noise) {
  require_same_shape(x_t, eps_pred, "ddpm_reverse_step");
  if (sigma != 0.0 && noise == nullptr) throw UsageError("ddpm_reverse_step: sigma > 0 needs a noise array");
  if (noise) require_same_shape(x_t, *noise, "ddpm_reverse_step noise");
  const double inv = 1.0 / std::sqrt(alpha);
  // alpha == 1 leaves the eps term multiplied by zero; avoid 0/0 when alpha_bar is also 1.
  const double k = alpha == 1.0 ? 0.0 : (1.0 - alpha) / std::sqrt(1.0 - alpha_bar);
  BasicTensor<T> out(x_t.shape());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    double v = inv * (static_cast<double>(x_t[i]) - k * static_cast<double>(eps_pred[i]));
    if (noise) v += sigma * static_cast<double>((*noise)[i]);
    out[i] = static_cast<T>(v);
  }
  return out;
}

// x_prev = sqrt(ab_prev) * x0_hat + sqrt(1 - ab_prev - sigma^2) * eps_pred + sigma * noise
template <typename T>
BasicTensor<T> ddim_update(const BasicTensor<T>& x_t, const BasicTensor<T>& eps_pred, double alpha_bar_t,
                           double alpha_bar_prev, double sigma, const BasicTensor<T>* noise) {
  const double radicand = 1.0 - alpha_bar_prev - sigma * sigma;
  if (radicand < -1e-12) {
    throw NumericError("ddim_step: sigma too large, 1 - alpha_bar_prev - sigma^2 = " + std::to_string(radicand));
  }
  if (sigma != 0.0 && noise == nullptr) throw UsageError("ddim_step: sigma > 0 needs a noise array");
  if (noise) require_same_shape(x_t, *noise, "ddim_step noise");
  const BasicTensor<T> x0 = x0_from_eps(x_t, eps_pred, alpha_bar_t);
  const double a = std::sqrt(alpha_bar_prev);
  const double b = std::sqrt(std::max(radicand, 0.0));
  BasicTensor<T> out(x_t.shape());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    double v = a * static_cast<double>(x0[i]) + b * static_cast<double>(eps_pred[i]);
    if (noise) v += sigma * static_cast<double>((*noise)[i]);
    out[i] = static_cast<T>(v);
  }
  return out;
}

// ---- schedule-level operations ----

namespace detail {
// The predictor is never queried at t = 0: the clean state is evaluated at t = 1.
template <typename T>
BasicTensor<T> eval_eps(const BasicNoisePredictor<T>& predictor, const BasicTensor<T>& x, int t,
                        const NoiseSchedule& schedule) {
  BasicTensor<T> eps = predictor.predict(x, TimeIndex{std::max(t, 1), schedule.total_steps()});
  require_same_shape(eps, x, "predictor output");
  return eps;
}
}  // namespace detail

template <typename T>
BasicLatentState<T> forward_diffuse(const BasicTensor<T>& x0, int t, const BasicTensor<T>& eps,
                                    const NoiseSchedule& schedule) {
  schedule.check_timestep(t);
  return {forward_mix(x0, eps, schedule.alpha_bar(t)), t};
}

template <typename T>
BasicLatentState<T> predict_x0(const BasicLatentState<T>& x_t, const BasicNoisePredictor<T>& predictor,
                               const NoiseSchedule& schedule) {
  schedule.check_timestep(x_t.t);
  const auto eps = detail::eval_eps(predictor, x_t.values, x_t.t, schedule);
  return {x0_from_eps(x_t.values, eps, schedule.alpha_bar(x_t.t)), 0};
}

inline double ddim_sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta) {
  schedule.check_timestep(t);
  schedule.check_timestep(t_prev, true);
  if (t_prev >= t) throw UsageError("ddim_sigma: t_prev must be below t");
  return sigma_from_alpha_bars(schedule.alpha_bar(t), schedule.alpha_bar(t_prev), eta);
}

template <typename T>
BasicLatentState<T> ddpm_reverse_step(const BasicLatentState<T>& x_t, const BasicNoisePredictor<T>& predictor,
                                      const NoiseSchedule& schedule, const BasicTensor<T>& eps) {
  if (x_t.t < 1) throw UsageError("ddpm_reverse_step: t must be at least 1");
  schedule.check_timestep(x_t.t);
  const double sigma = ddim_sigma(schedule, x_t.t, x_t.t - 1, 1.0);
  const auto pred = detail::eval_eps(predictor, x_t.values, x_t.t, schedule);
  return {ddpm_update(x_t.values, pred, schedule.alpha(x_t.t), schedule.alpha_bar(x_t.t), sigma, &eps), x_t.t - 1};
}

// `eps` may be null when sigma == 0.
template <typename T>
BasicLatentState<T> ddim_step(const BasicLatentState<T>& x_t, int t_prev, const BasicNoisePredictor<T>& predictor,
                              const NoiseSchedule& schedule, double sigma, const BasicTensor<T>* eps) {
  schedule.check_timestep(x_t.t);
  schedule.check_timestep(t_prev, true);
  if (t_prev >= x_t.t) throw UsageError("ddim_step: t_prev must be below the current timestep");
  const auto pred = detail::eval_eps(predictor, x_t.values, x_t.t, schedule);
  return {ddim_update(x_t.values, pred, schedule.alpha_bar(x_t.t), schedule.alpha_bar(t_prev), sigma, eps), t_prev};
}

// Deterministic DDIM inversion: the sigma = 0 update run towards higher noise, with the noise
// prediction taken at the current state.
template <typename T>
BasicLatentState<T> invert(const BasicTensor<T>& x0, const BasicNoisePredictor<T>& predictor,
                           const NoiseSchedule& schedule, const SamplerConfig& config) {
  if (config.eta != 0.0) throw UsageError("invert: inversion is only defined for eta = 0");
  const std::vector<int> steps = config.timesteps(schedule);
  BasicLatentState<T> state{x0, 0};
  for (int t_next : steps) {
    const auto eps = detail::eval_eps(predictor, state.values, state.t, schedule);
    state.values = ddim_update(state.values, eps, schedule.alpha_bar(state.t), schedule.alpha_bar(t_next), 0.0,
                               static_cast<const BasicTensor<T>*>(nullptr));
    state.t = t_next;
  }
  return state;
}

// Reverse DDIM pass from x_T down to t = 0 over the configured subsequence. With eta > 0 the step
// noise is drawn from a generator seeded by config.seed.
template <typename T>
BasicTensor<T> reconstruct(const BasicLatentState<T>& x_T, const BasicNoisePredictor<T>& predictor,
                           const NoiseSchedule& schedule, const SamplerConfig& config) {
  const std::vector<int> steps = config.timesteps(schedule);
  if (steps.empty()) throw UsageError("reconstruct: empty timestep subsequence");
  if (x_T.t != steps.back()) {
    throw UsageError("reconstruct: state is at t = " + std::to_string(x_T.t) + " but the subsequence ends at " +
                     std::to_string(steps.back()));
  }
  Rng rng = make_rng(config.seed, 0x5eed);
  BasicLatentState<T> state = x_T;
  for (std::size_t i = steps.size(); i-- > 0;) {
    const int t_prev = i == 0 ? 0 : steps[i - 1];
    const double sigma = ddim_sigma(schedule, state.t, t_prev, config.eta);
    if (sigma > 0.0) {
      const BasicTensor<T> noise = gaussian_tensor<T>(state.values.shape(), rng);
      state = ddim_step(state, t_prev, predictor, schedule, sigma, &noise);
    } else {
      state = ddim_step(state, t_prev, predictor, schedule, 0.0, static_cast<const BasicTensor<T>*>(nullptr));
    }
  }
  return std::move(state.values);
}

// Draw x_T ~ N(0, I) from `seed` and run the reverse pass.
template <typename T>
BasicTensor<T> sample(const Shape& shape, const BasicNoisePredictor<T>& predictor, const NoiseSchedule& schedule,
                      const SamplerConfig& config, std::uint64_t seed) {
  const std::vector<int> steps = config.timesteps(schedule);
  Rng rng = make_rng(seed, 0x7a);
  BasicLatentState<T> x_T{gaussian_tensor<T>(shape, rng), steps.back()};
  return reconstruct(x_T, predictor, schedule, config);
}

}  // namespace divid::diffusion
