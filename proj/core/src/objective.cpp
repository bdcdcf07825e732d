#include "tapret/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tapret/ops.hpp"

namespace tapret {

namespace {

void require_square(const Tensor& s, const char* who) {
  if (s.rank() != 2 || s.rows() != s.cols()) {
    throw std::invalid_argument(std::string(who) + ": similarity matrix must be square, got " + s.shape_str());
  }
}

double cosine(const double* a, const double* b, std::size_t d, const std::string& a_who,
              const std::string& b_who) {
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    na += a[k] * a[k];
    nb += b[k] * b[k];
    dot += a[k] * b[k];
  }
  if (na == 0.0) throw std::domain_error("similarity_matrix: zero-norm embedding for " + a_who);
  if (nb == 0.0) throw std::domain_error("similarity_matrix: zero-norm embedding for " + b_who);
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

Tensor similarity_matrix(const Tensor& z_t, const Tensor& z_a) {
  if (z_t.rank() != 2) throw std::invalid_argument("similarity_matrix: z_t must be rank-2");
  const std::size_t b_t = z_t.rows(), d = z_t.cols();
  if (z_a.rank() == 2) {
    if (z_a.cols() != d) {
      throw std::invalid_argument("similarity_matrix: dim mismatch " + z_t.shape_str() + " vs " + z_a.shape_str());
    }
    const std::size_t b_a = z_a.rows();
    Tensor s({b_t, b_a});
    for (std::size_t i = 0; i < b_t; ++i)
      for (std::size_t j = 0; j < b_a; ++j)
        s.at(i, j) = cosine(&z_t.data()[i * d], &z_a.data()[j * d], d,
                            "text " + std::to_string(i), "audio " + std::to_string(j));
    return s;
  }
  if (z_a.rank() == 3) {
    if (z_a.shape()[0] != b_t || z_a.shape()[2] != d) {
      throw std::invalid_argument("similarity_matrix: conditioned shape " + z_a.shape_str() +
                                  " does not match z_t " + z_t.shape_str());
    }
    const std::size_t b_a = z_a.shape()[1];
    Tensor s({b_t, b_a});
    for (std::size_t i = 0; i < b_t; ++i)
      for (std::size_t j = 0; j < b_a; ++j)
        s.at(i, j) = cosine(&z_t.data()[i * d], &z_a.data()[(i * b_a + j) * d], d,
                            "text " + std::to_string(i),
                            "audio (" + std::to_string(i) + "," + std::to_string(j) + ")");
    return s;
  }
  throw std::invalid_argument("similarity_matrix: z_a must be rank-2 or rank-3, got " + z_a.shape_str());
}

Tensor prior_matrix_t2a(const Tensor& s, double omega) {
  require_square(s, "prior_matrix_t2a");
  return ops::transpose(ops::softmax_rows(ops::scale(ops::transpose(s), omega)));
}

Tensor prior_matrix_a2t(const Tensor& s, double omega) {
  require_square(s, "prior_matrix_a2t");
  return ops::softmax_rows(ops::scale(s, omega));
}

double ntxent_loss(const Tensor& s, double tau) {
  Graph g;
  return g.scalar(ntxent_loss(g, g.leaf(s), tau));
}

double pmr_loss(const Tensor& s, const LossConfig& cfg) {
  Graph g;
  return g.scalar(pmr_loss(g, g.leaf(s), cfg));
}

Var similarity_from_pooled(Graph& g, const std::vector<Var>& z_t, const std::vector<Var>& z_a) {
  if (z_t.empty() || z_a.empty()) throw std::invalid_argument("similarity_from_pooled: empty batch");
  Var zt = g.l2_normalize_rows(g.concat_rows(z_t));
  Var za = g.l2_normalize_rows(g.concat_rows(z_a));
  return g.matmul(zt, g.transpose(za));
}

Var similarity_from_conditioned(Graph& g, const std::vector<Var>& z_t,
                                const std::vector<std::vector<Var>>& z_a_cond) {
  if (z_t.size() != z_a_cond.size() || z_t.empty()) {
    throw std::invalid_argument("similarity_from_conditioned: batch shape mismatch");
  }
  std::vector<Var> rows;
  rows.reserve(z_t.size());
  for (std::size_t i = 0; i < z_t.size(); ++i) {
    Var zt_n = g.l2_normalize_rows(z_t[i]);
    std::vector<Var> cells;
    cells.reserve(z_a_cond[i].size());
    for (Var z : z_a_cond[i]) {
      cells.push_back(g.matmul(zt_n, g.transpose(g.l2_normalize_rows(z))));
    }
    rows.push_back(g.concat_last_axis(cells));
  }
  return g.concat_rows(rows);
}

namespace {

// -(1/B) * sum of diagonal entries of log_softmax_rows(X).
Var diag_cross_entropy(Graph& g, Var x) {
  const std::size_t b = g.value(x).rows();
  Var mask = g.leaf(Tensor::identity(b));
  Var picked = g.mul(g.log_softmax_rows(x), mask);
  return g.scale(g.sum_all(picked), -1.0 / static_cast<double>(b));
}

}  // namespace

Var ntxent_loss(Graph& g, Var s, double tau) {
  require_square(g.value(s), "ntxent_loss");
  if (!(tau > 0.0)) throw std::invalid_argument("ntxent_loss: tau must be > 0");
  Var row_term = diag_cross_entropy(g, g.scale(s, 1.0 / tau));
  Var col_term = diag_cross_entropy(g, g.scale(g.transpose(s), 1.0 / tau));
  return g.add(row_term, col_term);
}

Var pmr_loss(Graph& g, Var s, const LossConfig& cfg) {
  require_square(g.value(s), "pmr_loss");
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("pmr_loss: tau must be > 0");
  if (!std::isfinite(cfg.omega)) throw std::invalid_argument("pmr_loss: omega must be finite");

  // t2a prior: softmax along each column; a2t prior: softmax along each row.
  Var pr_t2a = g.transpose(g.softmax_rows(g.scale(g.transpose(s), cfg.omega)));
  Var pr_a2t = g.softmax_rows(g.scale(s, cfg.omega));
  if (cfg.stop_gradient_prior) {
    pr_t2a = g.stop_gradient(pr_t2a);
    pr_a2t = g.stop_gradient(pr_a2t);
  }

  Var m_t2a = g.mul(s, pr_t2a);
  Var m_a2t = g.mul(s, pr_a2t);
  Var l_t2a = diag_cross_entropy(g, g.scale(m_t2a, 1.0 / cfg.tau));
  Var l_a2t = diag_cross_entropy(g, g.scale(g.transpose(m_a2t), 1.0 / cfg.tau));
  return g.add(l_t2a, l_a2t);
}

}  // namespace tapret
