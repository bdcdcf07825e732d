#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tapret/graph.hpp"
#include "tapret/ops.hpp"
#include "tapret/rng.hpp"

using namespace tapret;

namespace {

Tensor random_matrix(std::size_t m, std::size_t n, Rng& rng, double scale = 1.0) {
  Tensor t({m, n});
  for (double& x : t.data()) x = rng.normal() * scale;
  return t;
}

using BuildFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Central-difference check of dLoss/dInput over every element of every input.
double fd_max_rel_err(const BuildFn& build, const std::vector<Tensor>& inputs, double h = 1e-6) {
  Graph g;
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, true));
  Var loss = build(g, leaves);
  auto grads = g.backward(loss);

  auto eval = [&](const std::vector<Tensor>& xs) {
    Graph gg;
    std::vector<Var> ls;
    for (const Tensor& t : xs) ls.push_back(gg.leaf(t, false));
    return gg.scalar(build(gg, ls));
  };

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    const Tensor& analytic = grads.at(leaves[ti].id);
    for (std::size_t i = 0; i < probe[ti].numel(); ++i) {
      const double saved = probe[ti][i];
      probe[ti][i] = saved + h;
      const double up = eval(probe);
      probe[ti][i] = saved - h;
      const double down = eval(probe);
      probe[ti][i] = saved;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

// Random row mask so reductions see a nontrivial cotangent.
Var masked_sum(Graph& g, Var x, Rng& rng) {
  const Tensor& v = g.value(x);
  Tensor mask(v.shape());
  for (double& m : mask.data()) m = rng.normal();
  return g.sum_all(g.mul(x, g.leaf(mask)));
}

}  // namespace

TEST_CASE("backward of a linear map is the constant slope") {
  Tensor x = Tensor::matrix({{1, -2}, {0.5, 3}});
  Graph g;
  Var vx = g.leaf(x, true);
  Var loss = g.sum_all(g.scale(vx, 3.0));
  auto grads = g.backward(loss);
  const Tensor& gx = grads.at(vx.id);
  for (std::size_t i = 0; i < gx.numel(); ++i) CHECK(gx[i] == 3.0);
}

TEST_CASE("cosine of a vector with itself is stationary") {
  Rng rng(11);
  Tensor u = random_matrix(1, 8, rng);
  Graph g;
  Var vu = g.leaf(u, true);
  Var un = g.l2_normalize_rows(vu);
  Var s = g.matmul(un, g.transpose(un));
  CHECK(g.scalar(s) == doctest::Approx(1.0).epsilon(1e-12));
  auto grads = g.backward(s);
  const Tensor& gu = grads.at(vu.id);
  for (std::size_t i = 0; i < gu.numel(); ++i) CHECK(std::abs(gu[i]) <= 1e-12);
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  Var x = g.leaf(Tensor::matrix({{1, 2}}), true);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("fan-out accumulates by summation") {
  Graph g;
  Var x = g.leaf(Tensor::matrix({{2, 5}}), true);
  Var loss = g.sum_all(g.add(x, x));
  auto grads = g.backward(loss);
  const Tensor& gx = grads.at(x.id);
  CHECK(gx[0] == 2.0);
  CHECK(gx[1] == 2.0);
}

TEST_CASE("max gradient routes to the first argmax on ties") {
  Graph g;
  Var x = g.leaf(Tensor::matrix({{1.0, 1.0, 0.5}}), true);
  Var loss = g.sum_all(g.max_over_axis(x, 1));
  auto grads = g.backward(loss);
  const Tensor& gx = grads.at(x.id);
  CHECK(gx[0] == 1.0);
  CHECK(gx[1] == 0.0);
  CHECK(gx[2] == 0.0);
}

TEST_CASE("stop_gradient blocks the upstream path") {
  Tensor x = Tensor::matrix({{1.5, -0.5}});
  Graph g;
  Var vx = g.leaf(x, true);
  Var blocked = g.stop_gradient(g.scale(vx, 2.0));
  Var loss = g.sum_all(g.add(vx, blocked));
  auto grads = g.backward(loss);
  const Tensor& gx = grads.at(vx.id);
  CHECK(gx[0] == 1.0);  // only the direct path contributes
  CHECK(gx[1] == 1.0);
}

TEST_CASE("gradcheck: matmul chain with add, sub, mul, scale, transpose") {
  Rng rng(21);
  std::vector<Tensor> inputs = {random_matrix(3, 4, rng), random_matrix(4, 2, rng),
                                random_matrix(3, 2, rng), random_matrix(3, 2, rng)};
  Rng mask_rng(22);
  auto build = [&](Graph& g, const std::vector<Var>& v) {
    Var y = g.matmul(v[0], v[1]);
    y = g.add(y, v[2]);
    y = g.sub(y, g.scale(v[3], 0.7));
    y = g.mul(y, g.transpose(g.transpose(v[2])));
    return masked_sum(g, y, mask_rng);
  };
  CHECK(fd_max_rel_err(build, inputs) <= 1e-6);
}

TEST_CASE("gradcheck: softmax and log_softmax") {
  Rng rng(23);
  std::vector<Tensor> inputs = {random_matrix(3, 5, rng, 2.0)};
  Rng mask_rng(24);
  auto build_sm = [&](Graph& g, const std::vector<Var>& v) {
    return masked_sum(g, g.softmax_rows(v[0]), mask_rng);
  };
  CHECK(fd_max_rel_err(build_sm, inputs) <= 1e-6);

  Rng mask_rng2(25);
  auto build_lsm = [&](Graph& g, const std::vector<Var>& v) {
    return masked_sum(g, g.log_softmax_rows(v[0]), mask_rng2);
  };
  CHECK(fd_max_rel_err(build_lsm, inputs) <= 1e-6);
}

TEST_CASE("gradcheck: layer_norm wrt input, gamma and beta") {
  Rng rng(26);
  std::vector<Tensor> inputs = {random_matrix(4, 6, rng), random_matrix(1, 6, rng),
                                random_matrix(1, 6, rng)};
  Rng mask_rng(27);
  auto build = [&](Graph& g, const std::vector<Var>& v) {
    return masked_sum(g, g.layer_norm(v[0], v[1], v[2], 1e-5), mask_rng);
  };
  CHECK(fd_max_rel_err(build, inputs) <= 1e-5);
}

TEST_CASE("gradcheck: l2_normalize_rows") {
  Rng rng(28);
  std::vector<Tensor> inputs = {random_matrix(3, 6, rng)};
  Rng mask_rng(29);
  auto build = [&](Graph& g, const std::vector<Var>& v) {
    return masked_sum(g, g.l2_normalize_rows(v[0]), mask_rng);
  };
  CHECK(fd_max_rel_err(build, inputs) <= 1e-6);
}

TEST_CASE("gradcheck: exp and log") {
  Rng rng(30);
  Tensor x({3, 4});
  for (double& v : x.data()) v = 0.5 + std::abs(rng.normal());
  Rng mask_rng(31);
  auto build = [&](Graph& g, const std::vector<Var>& v) {
    return masked_sum(g, g.log(g.exp(g.log(v[0]))), mask_rng);
  };
  CHECK(fd_max_rel_err(build, {x}) <= 1e-6);
}

TEST_CASE("gradcheck: reductions over both axes") {
  Rng rng(32);
  std::vector<Tensor> inputs = {random_matrix(4, 5, rng)};
  Rng mask_rng(33);
  auto build = [&](Graph& g, const std::vector<Var>& v) {
    Var m0 = g.mean_over_axis(v[0], 0);
    Var m1 = g.transpose(g.mean_over_axis(v[0], 1));
    Var x1 = g.max_over_axis(v[0], 0);
    Var x2 = g.transpose(g.max_over_axis(v[0], 1));
    return g.add(g.add(masked_sum(g, m0, mask_rng), masked_sum(g, m1, mask_rng)),
                 g.add(masked_sum(g, x1, mask_rng), masked_sum(g, x2, mask_rng)));
  };
  CHECK(fd_max_rel_err(build, inputs) <= 1e-6);
}

TEST_CASE("gradcheck: concat and add_rowvec") {
  Rng rng(34);
  std::vector<Tensor> inputs = {random_matrix(2, 3, rng), random_matrix(2, 2, rng),
                                random_matrix(1, 5, rng), random_matrix(3, 5, rng)};
  Rng mask_rng(35);
  auto build = [&](Graph& g, const std::vector<Var>& v) {
    Var wide = g.concat_last_axis({v[0], v[1]});
    Var biased = g.add_rowvec(wide, v[2]);
    Var tall = g.concat_rows({biased, v[3]});
    return masked_sum(g, tall, mask_rng);
  };
  CHECK(fd_max_rel_err(build, inputs) <= 1e-6);
}

TEST_CASE("replay reproduces every saved activation bit-exactly") {
  Rng rng(36);
  Graph g;
  Var a = g.leaf(random_matrix(4, 4, rng), true);
  Var b = g.leaf(random_matrix(4, 4, rng));
  Var y = g.softmax_rows(g.matmul(a, b));
  Var z = g.layer_norm(y, g.leaf(Tensor::full(1, 4, 1.0)), g.leaf(Tensor::zeros(1, 4)), 1e-5);
  g.sum_all(g.l2_normalize_rows(z));
  CHECK(g.replay_matches());
}

TEST_CASE("identical graphs give bit-identical forwards") {
  Rng rng(37);
  Tensor a = random_matrix(5, 5, rng);
  Tensor b = random_matrix(5, 5, rng);
  auto run = [&]() {
    Graph g;
    Var y = g.softmax_rows(g.matmul(g.leaf(a), g.leaf(b)));
    return g.value(g.sum_all(y))[0];
  };
  CHECK(run() == run());
}

TEST_CASE("single precision graphs keep values float-representable") {
  Rng rng(38);
  Graph g(Precision::Single);
  Var a = g.leaf(random_matrix(3, 3, rng), true);
  Var y = g.softmax_rows(g.matmul(a, a));
  const Tensor& v = g.value(y);
  for (std::size_t i = 0; i < v.numel(); ++i) {
    CHECK(v[i] == static_cast<double>(static_cast<float>(v[i])));
  }
  CHECK(g.replay_matches());
}

TEST_CASE("gradients flow through a conditioned similarity assembly") {
  // scalar cosines concatenated into a matrix keep exact gradients
  Rng rng(39);
  std::vector<Tensor> inputs = {random_matrix(1, 4, rng), random_matrix(1, 4, rng),
                                random_matrix(1, 4, rng)};
  Rng mask_rng(40);
  auto build = [&](Graph& g, const std::vector<Var>& v) {
    std::vector<Var> cells;
    for (std::size_t j = 1; j < v.size(); ++j) {
      cells.push_back(g.matmul(g.l2_normalize_rows(v[0]), g.transpose(g.l2_normalize_rows(v[j]))));
    }
    return masked_sum(g, g.concat_last_axis(cells), mask_rng);
  };
  CHECK(fd_max_rel_err(build, inputs) <= 1e-6);
}
