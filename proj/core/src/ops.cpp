#include "tapret/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tapret::ops {

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got shape " + t.shape_str());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw std::domain_error(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = &c.data()[i * n];
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = a.at(i, l);
      const double* brow = &b.data()[l * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += ail * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y.at(j, i) = x.at(i, j);
  return y;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  require_finite(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mx = x.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(x.at(i, j) - mx);
      y.at(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) /= sum;
  }
  return y;
}

Tensor log_softmax_rows(const Tensor& x) {
  require_rank2(x, "log_softmax_rows");
  require_finite(x, "log_softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mx = x.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(x.at(i, j) - mx);
    const double lse = std::log(sum);
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = x.at(i, j) - mx - lse;
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.numel() != n || beta.numel() != n) {
    throw std::invalid_argument("layer_norm: affine shape " + gamma.shape_str() + "/" + beta.shape_str() +
                                " does not match feature width " + std::to_string(n));
  }
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      y.at(i, j) = gamma[j] * ((x.at(i, j) - mean) * inv) + beta[j];
    }
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) c[i] = a[i] + b[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) c[i] = a[i] - b[i];
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) c[i] = a[i] * b[i];
  return c;
}

Tensor scale(const Tensor& x, double c) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] * c;
  return y;
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  require_rank2(x, "add_rowvec");
  if (b.rank() != 2 || b.rows() != 1 || b.cols() != x.cols()) {
    throw std::invalid_argument("add_rowvec: bias shape " + b.shape_str() + " does not match " + x.shape_str());
  }
  Tensor y(x.shape());
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = x.at(i, j) + b[j];
  return y;
}

Tensor exp(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::exp(x[i]);
  return y;
}

Tensor log(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (!(x[i] > 0.0)) {
      throw std::domain_error("log: nonpositive value " + std::to_string(x[i]) + " at flat index " + std::to_string(i));
    }
    y[i] = std::log(x[i]);
  }
  return y;
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_rank2(x, "l2_normalize_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) sq += x.at(i, j) * x.at(i, j);
    if (sq == 0.0) {
      throw std::domain_error("l2_normalize_rows: zero-norm row at index " + std::to_string(i));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = x.at(i, j) * inv;
  }
  return y;
}

Tensor mean_over_axis(const Tensor& x, int axis) {
  require_rank2(x, "mean_over_axis");
  const std::size_t m = x.rows(), n = x.cols();
  if (axis == 0) {
    Tensor y({1, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) y[j] += x.at(i, j);
    for (std::size_t j = 0; j < n; ++j) y[j] /= static_cast<double>(m);
    return y;
  }
  if (axis == 1) {
    Tensor y({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += x.at(i, j);
      y[i] = s / static_cast<double>(n);
    }
    return y;
  }
  throw std::invalid_argument("mean_over_axis: axis must be 0 or 1");
}

Tensor max_over_axis(const Tensor& x, int axis) {
  require_rank2(x, "max_over_axis");
  const std::size_t m = x.rows(), n = x.cols();
  if (axis == 0) {
    Tensor y({1, n});
    for (std::size_t j = 0; j < n; ++j) {
      double best = x.at(0, j);
      for (std::size_t i = 1; i < m; ++i) best = std::max(best, x.at(i, j));
      y[j] = best;
    }
    return y;
  }
  if (axis == 1) {
    Tensor y({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
      double best = x.at(i, 0);
      for (std::size_t j = 1; j < n; ++j) best = std::max(best, x.at(i, j));
      y[i] = best;
    }
    return y;
  }
  throw std::invalid_argument("max_over_axis: axis must be 0 or 1");
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += x[i];
  return Tensor({1, 1}, {s});
}

Tensor concat_last_axis(const std::vector<const Tensor*>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_last_axis: no inputs");
  const std::size_t m = xs[0]->rows();
  std::size_t total = 0;
  for (const Tensor* t : xs) {
    require_rank2(*t, "concat_last_axis");
    if (t->rows() != m) {
      throw std::invalid_argument("concat_last_axis: row mismatch " + xs[0]->shape_str() + " vs " + t->shape_str());
    }
    total += t->cols();
  }
  Tensor y({m, total});
  std::size_t off = 0;
  for (const Tensor* t : xs) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < t->cols(); ++j) y.at(i, off + j) = t->at(i, j);
    off += t->cols();
  }
  return y;
}

Tensor concat_rows(const std::vector<const Tensor*>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t n = xs[0]->cols();
  std::size_t total = 0;
  for (const Tensor* t : xs) {
    require_rank2(*t, "concat_rows");
    if (t->cols() != n) {
      throw std::invalid_argument("concat_rows: column mismatch " + xs[0]->shape_str() + " vs " + t->shape_str());
    }
    total += t->rows();
  }
  Tensor y({total, n});
  std::size_t off = 0;
  for (const Tensor* t : xs) {
    for (std::size_t i = 0; i < t->rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) y.at(off + i, j) = t->at(i, j);
    off += t->rows();
  }
  return y;
}

}  // namespace tapret::ops
