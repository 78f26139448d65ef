#include "hoimotion/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace hoimo::nn {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

std::shared_ptr<Node> make_node(Mat value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

bool any_grad(const std::initializer_list<Var>& vars) {
  for (const auto& v : vars)
    if (v.requires_grad()) return true;
  return false;
}

}  // namespace

Var::Var(Mat value, bool requires_grad) : node_(make_node(std::move(value), requires_grad)) {}

Var Var::scalar(double v, bool requires_grad) {
  Mat m(1, 1);
  m(0, 0) = v;
  return Var(m, requires_grad);
}

double Var::item() const {
  if (node_->value.size() != 1) throw InvalidInput("item() on non-scalar");
  return node_->value(0, 0);
}

namespace {

// Builds an op node from parents; `fn` receives the output node and must
// scatter output.grad into the parents.
Var make_op(Mat value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  Var out(std::move(value), rg);
  if (rg) {
    auto n = out.node();
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(fn);
  }
  return out;
}

void accum(const std::shared_ptr<Node>& p, const Mat& g) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  p->grad += g;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput(std::string(op) + ": shape mismatch");
}

}  // namespace

void backward(const Var& root) {
  if (root.value().size() != 1) throw InvalidInput("backward: root must be scalar");
  if (!root.requires_grad()) return;
  root.node()->ensure_grad();
  root.node()->grad(0, 0) = 1.0;

  // Collect reachable subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  // Creation ids increase from leaves to root; run in descending order.
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
  for (Node* n : order) {
    if (n->backward) {
      n->ensure_grad();
      n->backward(*n);
    }
  }
}

// ---- elementwise / arithmetic ----

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value() + b.value(), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad);
    accum(bn, o.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value() - b.value(), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad);
    accum(bn, -o.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad.cwiseProduct(bn->value));
    accum(bn, o.grad.cwiseProduct(an->value));
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value().cwiseQuotient(b.value()), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad.cwiseQuotient(bn->value));
    accum(bn, -(o.grad.cwiseProduct(an->value).cwiseQuotient(bn->value.cwiseProduct(bn->value))));
  });
}

Var neg(const Var& a) {
  auto an = a.node();
  return make_op(-a.value(), {a}, [an](Node& o) { accum(an, -o.grad); });
}

Var add_scalar(const Var& a, double s) {
  auto an = a.node();
  return make_op(a.value().array() + s, {a}, [an](Node& o) { accum(an, o.grad); });
}

Var mul_scalar(const Var& a, double s) {
  auto an = a.node();
  return make_op(a.value() * s, {a}, [an, s](Node& o) { accum(an, s * o.grad); });
}

Var add_rowvec(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw InvalidInput("add_rowvec: bad shape");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value().rowwise() + b.value().row(0), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad);
    accum(bn, o.grad.colwise().sum());
  });
}

Var mul_rowvec(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw InvalidInput("mul_rowvec: bad shape");
  auto an = a.node(); auto bn = b.node();
  Mat v = a.value().array().rowwise() * b.value().row(0).array();
  return make_op(std::move(v), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad.array().rowwise() * bn->value.row(0).array());
    accum(bn, (o.grad.array() * an->value.array()).colwise().sum());
  });
}

Var add_colvec(const Var& a, const Var& b) {
  if (b.cols() != 1 || b.rows() != a.rows()) throw InvalidInput("add_colvec: bad shape");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value().colwise() + b.value().col(0), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad);
    accum(bn, o.grad.rowwise().sum());
  });
}

Var mul_colvec(const Var& a, const Var& b) {
  if (b.cols() != 1 || b.rows() != a.rows()) throw InvalidInput("mul_colvec: bad shape");
  auto an = a.node(); auto bn = b.node();
  Mat v = a.value().array().colwise() * b.value().col(0).array();
  return make_op(std::move(v), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad.array().colwise() * bn->value.col(0).array());
    accum(bn, (o.grad.array() * an->value.array()).rowwise().sum());
  });
}

Var minimum(const Var& a, const Var& b) {
  check_same_shape(a, b, "minimum");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value().cwiseMin(b.value()), {a, b}, [an, bn](Node& o) {
    Mat take_a = (an->value.array() <= bn->value.array()).cast<double>();
    accum(an, o.grad.cwiseProduct(take_a));
    accum(bn, o.grad.cwiseProduct(Mat(1.0 - take_a.array())));
  });
}

// ---- nonlinearities ----

Var relu(const Var& a) {
  auto an = a.node();
  return make_op(a.value().cwiseMax(0.0), {a}, [an](Node& o) {
    accum(an, o.grad.cwiseProduct(Mat((an->value.array() > 0.0).cast<double>())));
  });
}

Var gelu(const Var& a) {
  auto an = a.node();
  Mat x = a.value();
  Mat cdf = x.unaryExpr([](double v) { return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))); });
  Mat y = x.cwiseProduct(cdf);
  return make_op(std::move(y), {a}, [an, cdf](Node& o) {
    const double inv_sqrt2pi = 0.3989422804014327;
    Mat pdf = (inv_sqrt2pi * (-0.5 * an->value.array().square()).exp()).matrix();
    accum(an, o.grad.cwiseProduct(Mat(cdf.array() + an->value.array() * pdf.array())));
  });
}

Var tanh_op(const Var& a) {
  auto an = a.node();
  Mat t = a.value().array().tanh().matrix();
  Mat tcopy = t;
  return make_op(std::move(t), {a}, [an, tcopy](Node& o) {
    accum(an, o.grad.cwiseProduct(Mat(1.0 - tcopy.array().square())));
  });
}

Var sigmoid(const Var& a) {
  auto an = a.node();
  Mat s = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Mat scopy = s;
  return make_op(std::move(s), {a}, [an, scopy](Node& o) {
    accum(an, o.grad.cwiseProduct(Mat(scopy.array() * (1.0 - scopy.array()))));
  });
}

Var exp_op(const Var& a) {
  auto an = a.node();
  Mat e = a.value().array().exp().matrix();
  Mat ecopy = e;
  return make_op(std::move(e), {a}, [an, ecopy](Node& o) {
    accum(an, o.grad.cwiseProduct(ecopy));
  });
}

Var log_op(const Var& a) {
  auto an = a.node();
  return make_op(a.value().array().log().matrix(), {a}, [an](Node& o) {
    accum(an, o.grad.cwiseQuotient(an->value));
  });
}

Var sqrt_op(const Var& a) {
  auto an = a.node();
  Mat s = a.value().array().sqrt().matrix();
  Mat scopy = s;
  return make_op(std::move(s), {a}, [an, scopy](Node& o) {
    accum(an, o.grad.cwiseQuotient(Mat(2.0 * scopy.array())));
  });
}

Var square(const Var& a) {
  auto an = a.node();
  return make_op(a.value().array().square().matrix(), {a}, [an](Node& o) {
    accum(an, o.grad.cwiseProduct(Mat(2.0 * an->value.array())));
  });
}

Var abs_op(const Var& a) {
  auto an = a.node();
  return make_op(a.value().cwiseAbs(), {a}, [an](Node& o) {
    accum(an, o.grad.cwiseProduct(Mat(an->value.array().sign())));
  });
}

Var sin_op(const Var& a) {
  auto an = a.node();
  return make_op(a.value().array().sin().matrix(), {a}, [an](Node& o) {
    accum(an, o.grad.cwiseProduct(Mat(an->value.array().cos())));
  });
}

Var cos_op(const Var& a) {
  auto an = a.node();
  return make_op(a.value().array().cos().matrix(), {a}, [an](Node& o) {
    accum(an, o.grad.cwiseProduct(Mat(-an->value.array().sin())));
  });
}

// ---- shape ----

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dims");
  auto an = a.node(); auto bn = b.node();
  return make_op(a.value() * b.value(), {a, b}, [an, bn](Node& o) {
    accum(an, o.grad * bn->value.transpose());
    accum(bn, an->value.transpose() * o.grad);
  });
}

Var transpose(const Var& a) {
  auto an = a.node();
  return make_op(a.value().transpose(), {a}, [an](Node& o) {
    accum(an, o.grad.transpose());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("concat_cols: empty");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw InvalidInput("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op(std::move(v), parts, [nodes, offsets](Node& o) {
    for (size_t i = 0; i < nodes.size(); ++i)
      accum(nodes[i], o.grad.middleCols(offsets[i], nodes[i]->value.cols()));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("concat_rows: empty");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw InvalidInput("concat_rows: col mismatch");
    rows += p.rows();
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op(std::move(v), parts, [nodes, offsets](Node& o) {
    for (size_t i = 0; i < nodes.size(); ++i)
      accum(nodes[i], o.grad.middleRows(offsets[i], nodes[i]->value.rows()));
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || start + n > a.cols()) throw InvalidInput("slice_cols: out of range");
  auto an = a.node();
  return make_op(a.value().middleCols(start, n), {a}, [an, start, n](Node& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    an->grad.middleCols(start, n) += o.grad;
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || start + n > a.rows()) throw InvalidInput("slice_rows: out of range");
  auto an = a.node();
  return make_op(a.value().middleRows(start, n), {a}, [an, start, n](Node& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    an->grad.middleRows(start, n) += o.grad;
  });
}

Var gather_cols(const Var& a, const std::vector<int>& idx) {
  Mat v(a.rows(), static_cast<Eigen::Index>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.cols()) throw InvalidInput("gather_cols: index");
    v.col(static_cast<Eigen::Index>(i)) = a.value().col(idx[i]);
  }
  auto an = a.node();
  return make_op(std::move(v), {a}, [an, idx](Node& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      an->grad.col(idx[i]) += o.grad.col(static_cast<Eigen::Index>(i));
  });
}

Var gather_rows(const Var& a, const std::vector<int>& idx) {
  Mat v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows()) throw InvalidInput("gather_rows: index");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  }
  auto an = a.node();
  return make_op(std::move(v), {a}, [an, idx](Node& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      an->grad.row(idx[i]) += o.grad.row(static_cast<Eigen::Index>(i));
  });
}

// ---- reductions ----

Var sum_all(const Var& a) {
  auto an = a.node();
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return make_op(std::move(v), {a}, [an](Node& o) {
    accum(an, Mat::Constant(an->value.rows(), an->value.cols(), o.grad(0, 0)));
  });
}

Var mean_all(const Var& a) {
  auto an = a.node();
  Mat v(1, 1);
  v(0, 0) = a.value().mean();
  double inv = 1.0 / static_cast<double>(a.value().size());
  return make_op(std::move(v), {a}, [an, inv](Node& o) {
    accum(an, Mat::Constant(an->value.rows(), an->value.cols(), o.grad(0, 0) * inv));
  });
}

Var sum_rows(const Var& a) {
  auto an = a.node();
  return make_op(a.value().colwise().sum(), {a}, [an](Node& o) {
    accum(an, Mat(o.grad.row(0).replicate(an->value.rows(), 1)));
  });
}

Var mean_rows(const Var& a) {
  auto an = a.node();
  double inv = 1.0 / static_cast<double>(a.rows());
  return make_op(a.value().colwise().mean(), {a}, [an, inv](Node& o) {
    accum(an, Mat(inv * o.grad.row(0).replicate(an->value.rows(), 1)));
  });
}

Var sum_cols(const Var& a) {
  auto an = a.node();
  return make_op(a.value().rowwise().sum(), {a}, [an](Node& o) {
    accum(an, Mat(o.grad.col(0).replicate(1, an->value.cols())));
  });
}

Var softmax_rows(const Var& a) {
  auto an = a.node();
  Mat s(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Eigen::RowVectorXd row = a.value().row(i);
    double mx = row.maxCoeff();
    Eigen::RowVectorXd e = (row.array() - mx).exp();
    s.row(i) = e / e.sum();
  }
  Mat scopy = s;
  return make_op(std::move(s), {a}, [an, scopy](Node& o) {
    Mat da(scopy.rows(), scopy.cols());
    for (Eigen::Index i = 0; i < scopy.rows(); ++i) {
      double dot = o.grad.row(i).dot(scopy.row(i));
      da.row(i) = (o.grad.row(i).array() - dot) * scopy.row(i).array();
    }
    accum(an, da);
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  auto an = a.node();
  Eigen::Index rows = a.rows(), cols = a.cols();
  Mat y(rows, cols);
  Vec inv_std(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double mu = a.value().row(i).mean();
    double var = (a.value().row(i).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    y.row(i) = (a.value().row(i).array() - mu) * is;
  }
  Mat ycopy = y;
  return make_op(std::move(y), {a}, [an, ycopy, inv_std, cols](Node& o) {
    Mat da(ycopy.rows(), ycopy.cols());
    double n = static_cast<double>(cols);
    for (Eigen::Index i = 0; i < ycopy.rows(); ++i) {
      double gmean = o.grad.row(i).mean();
      double gy = o.grad.row(i).dot(ycopy.row(i)) / n;
      da.row(i) = inv_std(i) * (o.grad.row(i).array() - gmean - ycopy.row(i).array() * gy);
    }
    accum(an, da);
  });
}

}  // namespace hoimo::nn
