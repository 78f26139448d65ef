#pragma once

#include "hoimotion/common.hpp"

#include <vector>

namespace hoimo::diffusion {

// Cosine-schedule DDPM bookkeeping with x0 parameterization. Steps are
// indexed t = 0..T-1; alpha_bar(-1) is defined as 1 so the t = 0 posterior
// collapses onto the clean estimate with zero variance.
struct DiffusionSchedule {
  int T = 0;
  std::vector<double> betas;       // in (0, 1)
  std::vector<double> alphas;      // 1 - beta
  std::vector<double> alpha_bars;  // strictly decreasing, alpha_bar(0) ~ 1

  double alpha_bar_prev(int t) const { return t == 0 ? 1.0 : alpha_bars[static_cast<std::size_t>(t - 1)]; }

  // Posterior q(x_{t-1} | x_t, x0) = N(c1 * x0 + c2 * x_t, sigma_t^2 I).
  double c1(int t) const;
  double c2(int t) const;
  double posterior_var(int t) const;  // zero at t = 0
};

DiffusionSchedule make_cosine_schedule(int T);

Mat forward_diffuse(const Mat& x0, int t, const Mat& noise, const DiffusionSchedule& s);
Mat posterior_mean(const Mat& x0_hat, const Mat& x_t, int t, const DiffusionSchedule& s);
// Inverts posterior_mean for the clean estimate: x0 = (mu - c2 x_t) / c1.
Mat clean_from_mean(const Mat& mu, const Mat& x_t, int t, const DiffusionSchedule& s);

}  // namespace hoimo::diffusion
