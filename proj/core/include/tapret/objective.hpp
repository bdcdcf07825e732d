#pragma once

#include <vector>

#include "tapret/graph.hpp"
#include "tapret/tensor.hpp"

namespace tapret {

struct LossConfig {
  double tau = 0.07;   // contrastive temperature, > 0
  double omega = 1.0;  // prior-matrix logit scale, finite
  bool stop_gradient_prior = false;
};

// ---- plain forms (eval and tests) ----

// z_t [B_t x D], z_a [B_a x D]: entry (i,j) = cosine(z_t_i, z_a_j).
// z_a rank-3 [B_t x B_a x D]: entry (i,j) = cosine(z_t_i, z_a[i][j]),
// the text-conditioned form.
Tensor similarity_matrix(const Tensor& z_t, const Tensor& z_a);

// Column-wise softmax of omega*S; every column sums to 1.
Tensor prior_matrix_t2a(const Tensor& s, double omega);
// Row-wise softmax of omega*S; every row sums to 1.
Tensor prior_matrix_a2t(const Tensor& s, double omega);

double ntxent_loss(const Tensor& s, double tau);
double pmr_loss(const Tensor& s, const LossConfig& cfg);

// ---- graph forms (training) ----

// Stacks per-item embeddings, l2-normalizes and takes the cross product.
Var similarity_from_pooled(Graph& g, const std::vector<Var>& z_t, const std::vector<Var>& z_a);
// Text-conditioned: z_a_cond[i][j] is the 1xD audio embedding pooled for
// text i against audio j.
Var similarity_from_conditioned(Graph& g, const std::vector<Var>& z_t,
                                const std::vector<std::vector<Var>>& z_a_cond);

// Symmetric temperature-scaled cross entropy over in-batch pairs; the
// diagonal holds the positives. S must be square.
Var ntxent_loss(Graph& g, Var s, double tau);
// Similarity matrix revised by cross-direction softmax priors before the
// row/column cross entropies.
Var pmr_loss(Graph& g, Var s, const LossConfig& cfg);

}  // namespace tapret
