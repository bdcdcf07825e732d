#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tapret/ops.hpp"
#include "tapret/rng.hpp"
#include "tapret/tensor.hpp"

using namespace tapret;

namespace {

Tensor random_matrix(std::size_t m, std::size_t n, Rng& rng) {
  Tensor t({m, n});
  for (double& x : t.data()) x = rng.normal();
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double d = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
  CHECK(t.shape_str() == "[2x3]");
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), std::invalid_argument);

  Tensor r3({2, 3, 4});
  CHECK(r3.numel() == 24);
  CHECK_THROWS_AS(r3.rows(), std::invalid_argument);
}

TEST_CASE("matmul identity leaves the matrix unchanged") {
  Rng rng(1);
  Tensor a = random_matrix(3, 3, rng);
  Tensor c = ops::matmul(a, Tensor::identity(3));
  CHECK(max_abs_diff(a, c) == 0.0);
}

TEST_CASE("matmul hand-checkable 2x2") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{1}, {1}});
  Tensor c = ops::matmul(a, b);
  CHECK(c.at(0, 0) == 3.0);
  CHECK(c.at(1, 0) == 7.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(2);
  Tensor a = random_matrix(5, 7, rng);
  Tensor b = random_matrix(7, 3, rng);
  Tensor c = ops::matmul(a, b);

  Tensor ref({5, 3});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < 7; ++l) s += a.at(i, l) * b.at(l, j);
      ref.at(i, j) = s;
    }
  CHECK(max_abs_diff(c, ref) <= 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a({2, 3});
  Tensor b({4, 2});
  CHECK_THROWS_WITH_AS(ops::matmul(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
  try {
    ops::matmul(a, b);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("softmax of equal logits is uniform") {
  Tensor y = ops::softmax_rows(Tensor::matrix({{0, 0}}));
  CHECK(y.at(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(y.at(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("softmax shift invariance with a ln 2 gap") {
  for (double c : {-1000.0, -3.5, 0.0, 17.0, 1000.0}) {
    Tensor y = ops::softmax_rows(Tensor::matrix({{c, c + std::log(2.0)}}));
    CHECK(std::abs(y.at(0, 0) - 1.0 / 3.0) <= 1e-12);
    CHECK(std::abs(y.at(0, 1) - 2.0 / 3.0) <= 1e-12);
  }
}

TEST_CASE("softmax survives huge logits via max subtraction") {
  Tensor y = ops::softmax_rows(Tensor::matrix({{1000.0, 0.0}}));
  CHECK(y.all_finite());
  CHECK(y.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  Tensor x = random_matrix(6, 9, rng);
  Tensor y = ops::softmax_rows(ops::scale(x, 13.0));
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
      CHECK(y.at(i, j) >= 0.0);
      s += y.at(i, j);
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax rejects non-finite input") {
  Tensor x = Tensor::matrix({{1.0, std::numeric_limits<double>::infinity()}});
  CHECK_THROWS_AS(ops::softmax_rows(x), std::domain_error);
}

TEST_CASE("log_softmax agrees with log of softmax") {
  Rng rng(4);
  Tensor x = random_matrix(4, 7, rng);
  Tensor a = ops::log_softmax_rows(x);
  Tensor b = ops::log(ops::softmax_rows(x));
  CHECK(max_abs_diff(a, b) <= 1e-12);
}

TEST_CASE("layer_norm maps a constant row to beta") {
  Tensor y = ops::layer_norm(Tensor::matrix({{5, 5, 5}}), Tensor::full(1, 3, 1.0), Tensor::zeros(1, 3), 1e-5);
  for (std::size_t j = 0; j < 3; ++j) CHECK(y[j] == 0.0);
}

TEST_CASE("layer_norm of [1,3] approaches [-1,1] as eps vanishes") {
  Tensor y = ops::layer_norm(Tensor::matrix({{1, 3}}), Tensor::full(1, 2, 1.0), Tensor::zeros(1, 2), 1e-14);
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("layer_norm output rows are centered") {
  Rng rng(5);
  Tensor x = random_matrix(4, 8, rng);
  Tensor y = ops::layer_norm(x, Tensor::full(1, 8, 1.0), Tensor::zeros(1, 8), 1e-5);
  for (std::size_t i = 0; i < 4; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += y.at(i, j);
    mean /= 8.0;
    CHECK(std::abs(mean) <= 1e-10);
  }
}

TEST_CASE("l2_normalize_rows on a 3-4-5 triangle") {
  Tensor y = ops::l2_normalize_rows(Tensor::matrix({{3, 4}}));
  CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("l2_normalize_rows rejects a zero row with its index") {
  Tensor x = Tensor::matrix({{1, 2}, {0, 0}});
  CHECK_THROWS_WITH_AS(ops::l2_normalize_rows(x), doctest::Contains("index 1"), std::domain_error);
}

TEST_CASE("mean over a one-element axis is the identity") {
  Rng rng(6);
  Tensor row = random_matrix(1, 5, rng);
  CHECK(max_abs_diff(ops::mean_over_axis(row, 0), row) == 0.0);
  Tensor col = random_matrix(5, 1, rng);
  CHECK(max_abs_diff(ops::mean_over_axis(col, 1), col) == 0.0);
}

TEST_CASE("exp and log are inverse on positive input") {
  Rng rng(7);
  Tensor x({3, 4});
  for (double& v : x.data()) v = 0.01 + std::abs(rng.normal()) * 3.0;
  CHECK(max_abs_diff(ops::exp(ops::log(x)), x) <= 1e-12);
}

TEST_CASE("log rejects nonpositive values") {
  CHECK_THROWS_AS(ops::log(Tensor::matrix({{1.0, 0.0}})), std::domain_error);
  CHECK_THROWS_AS(ops::log(Tensor::matrix({{-2.0}})), std::domain_error);
}

TEST_CASE("elementwise ops require identical shapes") {
  Tensor a({2, 3});
  Tensor b({3, 2});
  CHECK_THROWS_WITH_AS(ops::add(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
  CHECK_THROWS_AS(ops::sub(a, b), std::invalid_argument);
  CHECK_THROWS_AS(ops::mul(a, b), std::invalid_argument);
}

TEST_CASE("max_over_axis picks per-channel maxima") {
  Tensor x = Tensor::matrix({{1, 5, -2}, {4, 3, -1}});
  Tensor over_rows = ops::max_over_axis(x, 0);
  CHECK(over_rows[0] == 4.0);
  CHECK(over_rows[1] == 5.0);
  CHECK(over_rows[2] == -1.0);
  Tensor over_cols = ops::max_over_axis(x, 1);
  CHECK(over_cols[0] == 5.0);
  CHECK(over_cols[1] == 4.0);
}

TEST_CASE("transpose round-trips") {
  Rng rng(8);
  Tensor x = random_matrix(3, 5, rng);
  CHECK(max_abs_diff(ops::transpose(ops::transpose(x)), x) == 0.0);
}

TEST_CASE("add_rowvec adds the bias to every row") {
  Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{10, 20}});
  Tensor y = ops::add_rowvec(x, b);
  CHECK(y.at(0, 0) == 11.0);
  CHECK(y.at(1, 1) == 24.0);
  CHECK_THROWS_AS(ops::add_rowvec(x, Tensor::matrix({{1, 2, 3}})), std::invalid_argument);
}

TEST_CASE("concat ops stitch blocks in order") {
  Tensor a = Tensor::matrix({{1, 2}});
  Tensor b = Tensor::matrix({{3}});
  Tensor wide = ops::concat_last_axis({&a, &b});
  CHECK(wide.cols() == 3);
  CHECK(wide.at(0, 2) == 3.0);

  Tensor c = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor d = Tensor::matrix({{5, 6}});
  Tensor tall = ops::concat_rows({&c, &d});
  CHECK(tall.rows() == 3);
  CHECK(tall.at(2, 1) == 6.0);

  Tensor bad = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK_THROWS_AS(ops::concat_last_axis({&a, &bad}), std::invalid_argument);
  CHECK_THROWS_AS(ops::concat_rows({&a, &b}), std::invalid_argument);
}

TEST_CASE("sum_all reduces to a scalar") {
  Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(ops::sum_all(x)[0] == 10.0);
}

TEST_CASE("forward kernels are deterministic") {
  Rng rng(9);
  Tensor a = random_matrix(7, 7, rng);
  Tensor b = random_matrix(7, 7, rng);
  Tensor c1 = ops::matmul(a, b);
  Tensor c2 = ops::matmul(a, b);
  for (std::size_t i = 0; i < c1.numel(); ++i) CHECK(c1[i] == c2[i]);
  Tensor s1 = ops::softmax_rows(a);
  Tensor s2 = ops::softmax_rows(a);
  for (std::size_t i = 0; i < s1.numel(); ++i) CHECK(s1[i] == s2[i]);
}

TEST_CASE("quantize_to_float makes every entry float-representable") {
  Tensor x = Tensor::matrix({{0.1, 1.0 / 3.0}});
  quantize_to_float(x);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(x[i] == static_cast<double>(static_cast<float>(x[i])));
  }
}
