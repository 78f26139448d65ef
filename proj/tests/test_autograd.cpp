#include "doctest.h"

#include "grad_check.hpp"
#include "hoimotion/nn/autograd.hpp"
#include "hoimotion/rng.hpp"

#include <cmath>

using namespace hoimo;
using namespace hoimo::nn;
using hoimo::testing::check_grads;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  return rng.normal_mat(r, c) * scale;
}

}  // namespace

TEST_CASE("forward values match eigen") {
  Rng rng(7);
  Mat a = random_mat(rng, 3, 4), b = random_mat(rng, 3, 4), w = random_mat(rng, 4, 2);
  Var va(a), vb(b), vw(w);
  CHECK((add(va, vb).value() - (a + b)).norm() == doctest::Approx(0.0));
  CHECK((mul(va, vb).value() - a.cwiseProduct(b)).norm() == doctest::Approx(0.0));
  CHECK((matmul(va, vw).value() - a * w).norm() == doctest::Approx(0.0));
  CHECK((transpose(va).value() - a.transpose()).norm() == doctest::Approx(0.0));
  CHECK(sum_all(va).item() == doctest::Approx(a.sum()));
  CHECK(mean_all(va).item() == doctest::Approx(a.mean()));
}

TEST_CASE("softmax rows are distributions") {
  Rng rng(11);
  Var x(random_mat(rng, 5, 7, 3.0));
  Mat s = softmax_rows(x).value();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.row(i).minCoeff() > 0.0);
  }
}

TEST_CASE("layer norm rows standardize") {
  Rng rng(13);
  Var x(random_mat(rng, 4, 9, 2.0));
  Mat y = layer_norm_rows(x).value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    CHECK(std::abs(y.row(i).mean()) < 1e-12);
    const double var = (y.row(i).array() - y.row(i).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps in the denominator
  }
}

TEST_CASE("elementwise op gradients") {
  Rng rng(17);
  Var a(random_mat(rng, 3, 4), true);
  Var b(random_mat(rng, 3, 4).array().abs().matrix() + Mat::Constant(3, 4, 0.5), true);

  check_grads({a, b}, [&] { return sum_all(add(a, b)); });
  check_grads({a, b}, [&] { return sum_all(sub(a, b)); });
  check_grads({a, b}, [&] { return sum_all(mul(a, b)); });
  check_grads({a, b}, [&] { return sum_all(div(a, b)); });
  check_grads({a}, [&] { return sum_all(neg(a)); });
  check_grads({a}, [&] { return sum_all(mul_scalar(add_scalar(a, 1.5), -2.25)); });
  check_grads({a}, [&] { return mean_all(square(a)); });
  check_grads({a}, [&] { return sum_all(tanh_op(a)); });
  check_grads({a}, [&] { return sum_all(sigmoid(a)); });
  check_grads({a}, [&] { return sum_all(exp_op(a)); });
  check_grads({b}, [&] { return sum_all(log_op(b)); });
  check_grads({b}, [&] { return sum_all(sqrt_op(b)); });
  check_grads({a}, [&] { return sum_all(sin_op(a)); });
  check_grads({a}, [&] { return sum_all(cos_op(a)); });
  check_grads({a}, [&] { return sum_all(gelu(a)); });
}

TEST_CASE("kinked op gradients away from the kink") {
  Rng rng(19);
  Mat av = random_mat(rng, 3, 4);
  for (Eigen::Index i = 0; i < av.size(); ++i)
    if (std::abs(av(i)) < 0.1) av(i) = 0.5;  // keep clear of 0
  Var a(av, true);
  Var b(av.array().reverse().matrix() + Mat::Constant(3, 4, 0.01), true);
  check_grads({a}, [&] { return sum_all(relu(a)); });
  check_grads({a}, [&] { return sum_all(abs_op(a)); });
  check_grads({a, b}, [&] { return sum_all(minimum(a, b)); });
}

TEST_CASE("broadcast op gradients") {
  Rng rng(23);
  Var x(random_mat(rng, 4, 5), true);
  Var row(random_mat(rng, 1, 5), true);
  Var col(random_mat(rng, 4, 1), true);
  check_grads({x, row}, [&] { return sum_all(add_rowvec(x, row)); });
  check_grads({x, row}, [&] { return sum_all(mul_rowvec(x, row)); });
  check_grads({x, col}, [&] { return sum_all(add_colvec(x, col)); });
  check_grads({x, col}, [&] { return sum_all(mul_colvec(x, col)); });
}

TEST_CASE("shape op gradients") {
  Rng rng(29);
  Var a(random_mat(rng, 4, 6), true);
  Var b(random_mat(rng, 6, 3), true);
  check_grads({a, b}, [&] { return sum_all(matmul(a, b)); });
  check_grads({a}, [&] { return sum_all(transpose(a)); });
  check_grads({a}, [&] { return sum_all(slice_cols(a, 1, 3)); });
  check_grads({a}, [&] { return sum_all(slice_rows(a, 2, 2)); });
  check_grads({a}, [&] { return sum_all(gather_cols(a, {5, 0, 0, 2})); });
  check_grads({a}, [&] { return sum_all(gather_rows(a, {3, 3, 1})); });
  check_grads({a, b}, [&] {
    return sum_all(concat_cols({a, matmul(a, b)}));
  });
  check_grads({a}, [&] { return sum_all(concat_rows({a, a})); });
  check_grads({a}, [&] { return sum_all(sum_rows(a)); });
  check_grads({a}, [&] { return sum_all(mean_rows(a)); });
  check_grads({a}, [&] { return sum_all(sum_cols(a)); });
}

TEST_CASE("softmax and layer norm gradients") {
  Rng rng(31);
  Var a(random_mat(rng, 3, 5), true);
  Var w(random_mat(rng, 5, 1), true);
  check_grads({a, w}, [&] { return sum_all(matmul(softmax_rows(a), w)); });
  check_grads({a, w}, [&] { return sum_all(matmul(layer_norm_rows(a), w)); }, 1e-5);
}

TEST_CASE("diamond graph accumulates both paths") {
  Var x(Mat::Constant(2, 2, 3.0), true);
  Var y = add(mul(x, x), x);  // d/dx = 2x + 1
  Var loss = sum_all(y);
  backward(loss);
  CHECK((x.grad() - Mat::Constant(2, 2, 7.0)).norm() == doctest::Approx(0.0));
}

TEST_CASE("composite network gradient") {
  Rng rng(37);
  Var x(random_mat(rng, 6, 8, 0.5));
  Var w1(random_mat(rng, 8, 16, 0.3), true);
  Var b1(random_mat(rng, 1, 16, 0.1), true);
  Var w2(random_mat(rng, 16, 4, 0.3), true);
  check_grads({w1, b1, w2}, [&] {
    Var h = gelu(add_rowvec(matmul(x, w1), b1));
    Var o = matmul(layer_norm_rows(h), w2);
    return mean_all(square(o));
  }, 1e-5);
}

TEST_CASE("backward requires scalar root") {
  Var x(Mat::Ones(2, 3), true);
  CHECK_THROWS_AS(backward(add(x, x)), InvalidInput);
}

TEST_CASE("grad does not flow into constants") {
  Var c = Var::constant(Mat::Ones(2, 2));
  Var x(Mat::Ones(2, 2), true);
  Var loss = sum_all(mul(c, x));
  backward(loss);
  CHECK(x.grad().sum() == doctest::Approx(4.0));
  CHECK_FALSE(c.requires_grad());
}
