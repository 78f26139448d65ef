#include "hoimotion/lbfgs.hpp"

#include <cmath>
#include <deque>

namespace hoimo::opt {

namespace {

double dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative along p
};

// Strong-Wolfe line search (bracket, then bisection zoom). Returns the
// accepted step length, or 0 when the budget runs out; on success fills
// f_out/g_out with the objective and gradient at x + alpha * p.
double wolfe_line_search(const Objective& objective, const Mat& x, const Mat& p,
                         double f0, double slope0, const LbfgsOptions& opts,
                         double& f_out, Mat& g_out, int& evals) {
  int budget = opts.max_line_search;
  Mat g(x.rows(), x.cols());
  auto eval = [&](double alpha, LinePoint& pt) {
    pt.alpha = alpha;
    pt.f = objective(x + alpha * p, g);
    pt.slope = dot(g, p);
    ++evals;
    --budget;
  };

  auto zoom = [&](LinePoint lo, LinePoint hi) -> double {
    while (budget > 0) {
      LinePoint mid;
      eval(0.5 * (lo.alpha + hi.alpha), mid);
      if (!std::isfinite(mid.f) || mid.f > f0 + opts.wolfe_c1 * mid.alpha * slope0 ||
          mid.f >= lo.f) {
        hi = mid;
      } else {
        if (std::abs(mid.slope) <= -opts.wolfe_c2 * slope0) {
          f_out = mid.f;
          g_out = g;
          return mid.alpha;
        }
        if (mid.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = mid;
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16) break;
    }
    return 0.0;
  };

  LinePoint prev{0.0, f0, slope0};
  double alpha = 1.0;
  bool first = true;
  while (budget > 0) {
    LinePoint cur;
    eval(alpha, cur);
    if (!std::isfinite(cur.f)) {  // stepped too far into bad territory
      LinePoint hi = cur;
      return zoom(prev, hi);
    }
    if (cur.f > f0 + opts.wolfe_c1 * alpha * slope0 || (!first && cur.f >= prev.f)) {
      return zoom(prev, cur);
    }
    if (std::abs(cur.slope) <= -opts.wolfe_c2 * slope0) {
      f_out = cur.f;
      g_out = g;
      return alpha;
    }
    if (cur.slope >= 0.0) {
      return zoom(cur, prev);
    }
    prev = cur;
    alpha *= 2.0;
    first = false;
  }
  return 0.0;
}

}  // namespace

LbfgsResult minimize(const Objective& objective, Mat x0, const LbfgsOptions& opts) {
  LbfgsResult res;
  res.x = std::move(x0);
  Mat g(res.x.rows(), res.x.cols());
  res.loss = objective(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(res.loss)) return res;

  struct Pair {
    Mat s, y;
    double rho;
  };
  std::deque<Pair> pairs;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const double gnorm = std::sqrt(dot(g, g));
    if (gnorm < opts.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Mat q = g;
    std::vector<double> alpha_cache(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      alpha_cache[i] = pairs[i].rho * dot(pairs[i].s, q);
      q -= alpha_cache[i] * pairs[i].y;
    }
    double gamma = 1.0;
    if (!pairs.empty()) {
      const Pair& last = pairs.back();
      gamma = dot(last.s, last.y) / dot(last.y, last.y);
    }
    // Track p = -r, so r's update r += s * (alpha - beta_r) with
    // beta_r = rho * y.r becomes p -= s * (alpha + beta) with beta = rho * y.p.
    Mat direction = -(gamma * q);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double beta = pairs[i].rho * dot(pairs[i].y, direction);
      direction -= (alpha_cache[i] + beta) * pairs[i].s;
    }

    double slope0 = dot(g, direction);
    if (slope0 >= 0.0) {  // curvature model broke; fall back to steepest descent
      direction = -g;
      slope0 = dot(g, direction);
    }

    double f_new = 0.0;
    Mat g_new(res.x.rows(), res.x.cols());
    const double alpha = wolfe_line_search(objective, res.x, direction, res.loss, slope0,
                                           opts, f_new, g_new, res.evaluations);
    if (alpha <= 0.0) break;  // exhausted the line-search budget

    Mat s = alpha * direction;
    Mat y = g_new - g;
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
      pairs.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(pairs.size()) > opts.history) pairs.pop_front();
      res.x += alpha * direction;
    } else {
      res.x += alpha * direction;  // keep the step, skip the degenerate pair
    }
    res.loss = f_new;
    g = g_new;
    ++res.iterations;
  }
  return res;
}

}  // namespace hoimo::opt
