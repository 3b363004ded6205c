#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "divid/core/error.hpp"

namespace divid::diffusion {

// beta/alpha/alpha_bar tables for t = 1..T, stored in double so the running product stays stable.
// Index 0 of the accessors denotes the clean state (alpha_bar(0) == 1).
class NoiseSchedule {
 public:
  static NoiseSchedule from_betas(std::vector<double> betas) {
    if (betas.empty()) throw UsageError("noise schedule needs at least one step");
    NoiseSchedule s;
    s.alpha_bars_.reserve(betas.size());
    double running = 1.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
      const double b = betas[i];
      if (!(b > 0.0 && b < 1.0)) {
        throw UsageError("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) + " outside (0, 1)");
      }
      s.alphas_.push_back(1.0 - b);
      running *= 1.0 - b;
      s.alpha_bars_.push_back(running);
    }
    s.betas_ = std::move(betas);
    return s;
  }

  int total_steps() const noexcept { return static_cast<int>(betas_.size()); }

  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

  double beta(int t) const { return betas_.at(index(t)); }
  double alpha(int t) const { return alphas_.at(index(t)); }
  double alpha_bar(int t) const {
    if (t == 0) return 1.0;
    return alpha_bars_.at(index(t));
  }

  void check_timestep(int t, bool allow_zero = false) const {
    if (t < (allow_zero ? 0 : 1) || t > total_steps()) {
      throw UsageError("timestep " + std::to_string(t) + " outside [" + (allow_zero ? "0" : "1") + ", " +
                       std::to_string(total_steps()) + "]");
    }
  }

 private:
  std::size_t index(int t) const {
    check_timestep(t);
    return static_cast<std::size_t>(t - 1);
  }

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

// Linearly spaced betas from beta_start to beta_end.
inline NoiseSchedule build_schedule(int total_steps, double beta_start, double beta_end) {
  if (total_steps < 1) throw UsageError("total_steps must be positive, got " + std::to_string(total_steps));
  if (!(beta_start > 0.0 && beta_start < 1.0) || !(beta_end > 0.0 && beta_end < 1.0)) {
    throw UsageError("betas must lie in (0, 1)");
  }
  if (beta_start > beta_end) throw UsageError("beta_start must not exceed beta_end");
  std::vector<double> betas(static_cast<std::size_t>(total_steps));
  for (int i = 0; i < total_steps; ++i) {
    const double frac = total_steps == 1 ? 0.0 : static_cast<double>(i) / (total_steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;
inline constexpr double kMaxBeta = 0.999;

// The 1000-step linear schedule rescaled to `total_steps`, so alpha_bar as a function of t/T is
// roughly independent of T. Betas are capped at kMaxBeta for very short schedules.
inline NoiseSchedule default_schedule(int total_steps) {
  if (total_steps < 1) throw UsageError("total_steps must be positive, got " + std::to_string(total_steps));
  const double scale = 1000.0 / total_steps;
  return build_schedule(total_steps, std::min(kDefaultBetaStart * scale, kMaxBeta),
                        std::min(kDefaultBetaEnd * scale, kMaxBeta));
}

// `ddim_steps` uniformly spaced timesteps ending at `total_steps`. The spacing is
// floor(total_steps / ddim_steps).
inline std::vector<int> select_ddim_timesteps(int total_steps, int ddim_steps) {
  if (total_steps < 1) throw UsageError("total_steps must be positive");
  if (ddim_steps < 1 || ddim_steps > total_steps) {
    throw UsageError("ddim_steps " + std::to_string(ddim_steps) + " outside [1, " + std::to_string(total_steps) +
                     "]");
  }
  const int stride = total_steps / ddim_steps;
  std::vector<int> out(static_cast<std::size_t>(ddim_steps));
  for (int i = 0; i < ddim_steps; ++i) out[static_cast<std::size_t>(i)] = total_steps - (ddim_steps - 1 - i) * stride;
  return out;
}

}  // namespace divid::diffusion
