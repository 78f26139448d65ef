#include "doctest.h"

#include "hoimotion/diffusion.hpp"
#include "hoimotion/rng.hpp"

#include <cmath>

using namespace hoimo;
using namespace hoimo::diffusion;

TEST_CASE("cosine schedule bookkeeping") {
  DiffusionSchedule s = make_cosine_schedule(300);
  REQUIRE(s.T == 300);
  CHECK(s.alpha_bars.front() > 0.99);
  for (int t = 0; t < 300; ++t) {
    CHECK(s.betas[t] > 0.0);
    CHECK(s.betas[t] <= 0.999);
    if (t > 0) CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);
  }
  CHECK(s.alpha_bars.back() < 1e-3);
  CHECK_THROWS_AS(make_cosine_schedule(0), InvalidInput);
}

TEST_CASE("forward diffusion limits") {
  // Hand-built schedule exposing the exact endpoint cases.
  DiffusionSchedule s;
  s.T = 2;
  s.betas = {0.0, 0.5};
  s.alphas = {1.0, 0.5};
  s.alpha_bars = {1.0, 1e-12};

  Rng rng(300);
  Mat x0 = rng.normal_mat(4, 5);
  Mat noise = rng.normal_mat(4, 5);

  Mat same = forward_diffuse(x0, 0, noise, s);  // alpha_bar = 1
  CHECK((same - x0).cwiseAbs().maxCoeff() == 0.0);

  Mat noisy = forward_diffuse(x0, 1, noise, s);  // alpha_bar ~ 0
  CHECK((noisy - noise).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("forward diffusion preserves unit variance") {
  DiffusionSchedule s = make_cosine_schedule(100);
  Rng rng(301);
  for (int t : {3, 50, 97}) {
    double sq = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      Mat x0(1, 1), noise(1, 1);
      x0(0, 0) = rng.normal();
      noise(0, 0) = rng.normal();
      sq += forward_diffuse(x0, t, noise, s)(0, 0) * forward_diffuse(x0, t, noise, s)(0, 0);
    }
    CHECK(std::abs(sq / draws - 1.0) < 0.05);
  }
}

TEST_CASE("posterior coefficients and variance") {
  DiffusionSchedule s = make_cosine_schedule(50);
  CHECK(s.posterior_var(0) == 0.0);
  for (int t = 1; t < 50; ++t) {
    CHECK(s.posterior_var(t) > 0.0);
    CHECK(s.c1(t) > 0.0);
    CHECK(s.c2(t) > 0.0);
  }
  // Expected posterior coefficients at a hand-checked step.
  const int t = 10;
  const double ab = s.alpha_bars[t], abp = s.alpha_bars[t - 1], beta = s.betas[t];
  CHECK(s.c1(t) == doctest::Approx(std::sqrt(abp) * beta / (1.0 - ab)).epsilon(1e-12));
  CHECK(s.c2(t) ==
        doctest::Approx(std::sqrt(1.0 - beta) * (1.0 - abp) / (1.0 - ab)).epsilon(1e-12));
  CHECK(s.posterior_var(t) == doctest::Approx((1.0 - abp) / (1.0 - ab) * beta).epsilon(1e-12));
}

TEST_CASE("posterior mean round-trips the clean estimate") {
  DiffusionSchedule s = make_cosine_schedule(40);
  Rng rng(302);
  Mat x0 = rng.normal_mat(3, 4);
  Mat xt = rng.normal_mat(3, 4);
  for (int t : {1, 20, 39}) {
    Mat mu = posterior_mean(x0, xt, t, s);
    Mat back = clean_from_mean(mu, xt, t, s);
    CHECK((back - x0).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("step indices are validated") {
  DiffusionSchedule s = make_cosine_schedule(10);
  Mat x = Mat::Zero(1, 1);
  CHECK_THROWS_AS(forward_diffuse(x, 10, x, s), InvalidInput);
  CHECK_THROWS_AS(forward_diffuse(x, -1, x, s), InvalidInput);
}
