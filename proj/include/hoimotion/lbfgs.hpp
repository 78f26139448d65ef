#pragma once

#include <functional>

#include "hoimotion/common.hpp"

namespace hoimo::opt {

// Objective contract: return f(x) and fill `grad` (same shape as x).
using Objective = std::function<double(const Mat& x, Mat& grad)>;

struct LbfgsOptions {
  int max_iters = 5;
  int history = 10;        // stored curvature pairs
  double wolfe_c1 = 1e-4;  // sufficient-decrease constant
  double wolfe_c2 = 0.9;   // curvature constant (strong form)
  int max_line_search = 25;
  double grad_tol = 1e-10; // stop when the gradient norm falls below this
};

struct LbfgsResult {
  Mat x;
  double loss = 0.0;
  int iterations = 0;       // accepted L-BFGS steps
  int evaluations = 0;      // objective calls
  bool converged = false;   // hit grad_tol
};

// Limited-memory BFGS with a strong-Wolfe line search. Every accepted step
// satisfies both Wolfe conditions, so the objective is non-increasing across
// iterations. Matrix-shaped iterates are treated as flat vectors.
LbfgsResult minimize(const Objective& objective, Mat x0, const LbfgsOptions& opts = {});

}  // namespace hoimo::opt
