#include "hoimotion/diffusion.hpp"

#include <cmath>

namespace hoimo::diffusion {

namespace {

void check_t(int t, const DiffusionSchedule& s) {
  if (t < 0 || t >= s.T) throw InvalidInput("diffusion step out of range");
}

}  // namespace

double DiffusionSchedule::c1(int t) const {
  check_t(t, *this);
  const double ab = alpha_bars[static_cast<std::size_t>(t)];
  return std::sqrt(alpha_bar_prev(t)) * betas[static_cast<std::size_t>(t)] / (1.0 - ab);
}

double DiffusionSchedule::c2(int t) const {
  check_t(t, *this);
  const double ab = alpha_bars[static_cast<std::size_t>(t)];
  return std::sqrt(alphas[static_cast<std::size_t>(t)]) * (1.0 - alpha_bar_prev(t)) / (1.0 - ab);
}

double DiffusionSchedule::posterior_var(int t) const {
  check_t(t, *this);
  if (t == 0) return 0.0;
  const double ab = alpha_bars[static_cast<std::size_t>(t)];
  return (1.0 - alpha_bar_prev(t)) / (1.0 - ab) * betas[static_cast<std::size_t>(t)];
}

DiffusionSchedule make_cosine_schedule(int T) {
  if (T < 1) throw InvalidInput("schedule needs at least one step");
  const double s = 0.008;
  auto f = [&](double u) {
    const double v = std::cos((u / T + s) / (1.0 + s) * M_PI / 2.0);
    return v * v;
  };
  DiffusionSchedule out;
  out.T = T;
  out.betas.resize(static_cast<std::size_t>(T));
  out.alphas.resize(static_cast<std::size_t>(T));
  out.alpha_bars.resize(static_cast<std::size_t>(T));
  const double f0 = f(0.0);
  double prev_bar = 1.0;
  for (int t = 0; t < T; ++t) {
    const double bar = f(static_cast<double>(t + 1)) / f0;
    double beta = 1.0 - bar / prev_bar;
    beta = std::min(beta, 0.999);
    out.betas[static_cast<std::size_t>(t)] = beta;
    out.alphas[static_cast<std::size_t>(t)] = 1.0 - beta;
    const double realized = prev_bar * (1.0 - beta);
    out.alpha_bars[static_cast<std::size_t>(t)] = realized;
    prev_bar = realized;
  }
  return out;
}

Mat forward_diffuse(const Mat& x0, int t, const Mat& noise, const DiffusionSchedule& s) {
  check_t(t, s);
  if (x0.rows() != noise.rows() || x0.cols() != noise.cols())
    throw InvalidInput("x0 and noise shapes differ");
  const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

Mat posterior_mean(const Mat& x0_hat, const Mat& x_t, int t, const DiffusionSchedule& s) {
  check_t(t, s);
  return s.c1(t) * x0_hat + s.c2(t) * x_t;
}

Mat clean_from_mean(const Mat& mu, const Mat& x_t, int t, const DiffusionSchedule& s) {
  check_t(t, s);
  const double c1 = s.c1(t);
  if (std::abs(c1) < 1e-300) throw NumericError("posterior mean not invertible at this step");
  return (mu - s.c2(t) * x_t) / c1;
}

}  // namespace hoimo::diffusion
