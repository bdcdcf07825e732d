#pragma once

#include <vector>

#include "tapret/tensor.hpp"

// Pure forward kernels. Every kernel uses a fixed summation order so that
// identical inputs give bit-identical outputs.
namespace tapret::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Per-row max subtraction; rows sum to 1 within 1e-12.
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

// Population (divide-by-n) variance; gamma/beta are 1xN rows.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
// y[i][j] = x[i][j] + b[0][j]
Tensor add_rowvec(const Tensor& x, const Tensor& b);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // strictly positive input
Tensor l2_normalize_rows(const Tensor& x);
// axis 0 reduces rows (-> 1xN), axis 1 reduces columns (-> Mx1)
Tensor mean_over_axis(const Tensor& x, int axis);
// ties route to the first index in row-major order
Tensor max_over_axis(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);  // -> 1x1
Tensor concat_last_axis(const std::vector<const Tensor*>& xs);
Tensor concat_rows(const std::vector<const Tensor*>& xs);

}  // namespace tapret::ops
