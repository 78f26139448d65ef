#pragma once

#include "hoimotion/common.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <vector>

namespace hoimo::nn {

// Reverse-mode autodiff over Eigen double matrices. Graphs are built
// dynamically; creation order is a valid topological order, so backward
// walks reachable nodes by descending id.
struct Node {
  Mat value;
  Mat grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  std::uint64_t id = 0;

  void ensure_grad() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Mat value, bool requires_grad = false);
  static Var scalar(double v, bool requires_grad = false);
  static Var constant(Mat value) { return Var(std::move(value), false); }

  bool defined() const { return static_cast<bool>(node_); }
  const Mat& value() const { return node_->value; }
  Mat& grad() { node_->ensure_grad(); return node_->grad; }
  const Mat& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;
  void set_value(const Mat& v) { node_->value = v; }
  void zero_grad() { if (node_) node_->grad.setZero(); }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a 1x1 root.
void backward(const Var& root);

// ---- elementwise / arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
// a (L x d) plus row vector b (1 x d), broadcast over rows
Var add_rowvec(const Var& a, const Var& b);
// a (L x d) times row vector b (1 x d), broadcast over rows
Var mul_rowvec(const Var& a, const Var& b);
// a (L x d) plus column vector b (L x 1), broadcast over columns
Var add_colvec(const Var& a, const Var& b);
// a (L x d) times column vector b (L x 1), broadcast over columns
Var mul_colvec(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);  // ties route gradient to a

// ---- nonlinearities ----
Var relu(const Var& a);
Var gelu(const Var& a);
Var tanh_op(const Var& a);
Var sigmoid(const Var& a);
Var exp_op(const Var& a);
Var log_op(const Var& a);
Var sqrt_op(const Var& a);
Var square(const Var& a);
Var abs_op(const Var& a);
Var sin_op(const Var& a);
Var cos_op(const Var& a);

// ---- shape ----
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n);
Var gather_cols(const Var& a, const std::vector<int>& idx);
Var gather_rows(const Var& a, const std::vector<int>& idx);

// ---- reductions ----
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var sum_rows(const Var& a);   // L x d -> 1 x d
Var mean_rows(const Var& a);  // L x d -> 1 x d
Var sum_cols(const Var& a);   // L x d -> L x 1

// softmax over each row
Var softmax_rows(const Var& a);
// per-row layer norm, unit gain (affine handled by callers)
Var layer_norm_rows(const Var& a, double eps = 1e-5);

}  // namespace hoimo::nn
