#include "tapret/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "tapret/ops.hpp"

namespace tapret {

Graph::Graph(Precision precision) : precision_(precision) {}

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument("graph: invalid var handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.numel() != 1) throw std::invalid_argument("scalar: node has shape " + t.shape_str());
  return t[0];
}

Var Graph::record(OpKind kind, std::vector<int> inputs, Tensor value, double attr, int axis) {
  Node n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.attr = attr;
  n.axis = axis;
  for (int in : n.inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  if (precision_ == Precision::Single) quantize_to_float(n.value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (precision_ == Precision::Single) quantize_to_float(n.value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::matmul(Var a, Var b) {
  return record(OpKind::MatMul, {a.id, b.id}, ops::matmul(value(a), value(b)));
}

Var Graph::transpose(Var x) {
  return record(OpKind::Transpose, {x.id}, ops::transpose(value(x)));
}

Var Graph::softmax_rows(Var x) {
  return record(OpKind::SoftmaxRows, {x.id}, ops::softmax_rows(value(x)));
}

Var Graph::log_softmax_rows(Var x) {
  return record(OpKind::LogSoftmaxRows, {x.id}, ops::log_softmax_rows(value(x)));
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
  return record(OpKind::LayerNorm, {x.id, gamma.id, beta.id},
                ops::layer_norm(value(x), value(gamma), value(beta), eps), eps);
}

Var Graph::add(Var a, Var b) { return record(OpKind::Add, {a.id, b.id}, ops::add(value(a), value(b))); }
Var Graph::sub(Var a, Var b) { return record(OpKind::Sub, {a.id, b.id}, ops::sub(value(a), value(b))); }
Var Graph::mul(Var a, Var b) { return record(OpKind::Mul, {a.id, b.id}, ops::mul(value(a), value(b))); }

Var Graph::scale(Var x, double c) {
  return record(OpKind::Scale, {x.id}, ops::scale(value(x), c), c);
}

Var Graph::add_rowvec(Var x, Var b) {
  return record(OpKind::AddRowVec, {x.id, b.id}, ops::add_rowvec(value(x), value(b)));
}

Var Graph::exp(Var x) { return record(OpKind::Exp, {x.id}, ops::exp(value(x))); }
Var Graph::log(Var x) { return record(OpKind::Log, {x.id}, ops::log(value(x))); }

Var Graph::l2_normalize_rows(Var x) {
  return record(OpKind::L2NormalizeRows, {x.id}, ops::l2_normalize_rows(value(x)));
}

Var Graph::mean_over_axis(Var x, int axis) {
  return record(OpKind::MeanAxis, {x.id}, ops::mean_over_axis(value(x), axis), 0.0, axis);
}

Var Graph::max_over_axis(Var x, int axis) {
  return record(OpKind::MaxAxis, {x.id}, ops::max_over_axis(value(x), axis), 0.0, axis);
}

Var Graph::sum_all(Var x) { return record(OpKind::SumAll, {x.id}, ops::sum_all(value(x))); }

Var Graph::concat_last_axis(const std::vector<Var>& xs) {
  std::vector<int> ids;
  std::vector<const Tensor*> vals;
  ids.reserve(xs.size());
  vals.reserve(xs.size());
  for (Var v : xs) {
    ids.push_back(v.id);
    vals.push_back(&value(v));
  }
  return record(OpKind::ConcatLast, std::move(ids), ops::concat_last_axis(vals));
}

Var Graph::concat_rows(const std::vector<Var>& xs) {
  std::vector<int> ids;
  std::vector<const Tensor*> vals;
  ids.reserve(xs.size());
  vals.reserve(xs.size());
  for (Var v : xs) {
    ids.push_back(v.id);
    vals.push_back(&value(v));
  }
  return record(OpKind::ConcatRows, std::move(ids), ops::concat_rows(vals));
}

Var Graph::stop_gradient(Var x) {
  Node n;
  n.kind = OpKind::StopGrad;
  n.inputs = {x.id};
  n.value = value(x);
  n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

namespace {

void accumulate(Tensor& dst, const Tensor& shape_like, bool& present) {
  if (!present) {
    dst = Tensor(shape_like.shape());
    present = true;
  }
}

}  // namespace

std::unordered_map<int, Tensor> Graph::backward(Var loss) const {
  const Node& ln = node(loss);
  if (ln.value.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + ln.value.shape_str());
  }

  std::vector<Tensor> grad(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);
  grad[loss.id] = Tensor(ln.value.shape());
  grad[loss.id][0] = 1.0;
  has[loss.id] = 1;

  auto want = [&](int id) { return nodes_[id].requires_grad; };
  auto buf = [&](int id) -> Tensor& {
    if (!has[id]) {
      grad[id] = Tensor(nodes_[id].value.shape());
      has[id] = 1;
    }
    return grad[id];
  };

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    if (!has[id] || !nodes_[id].requires_grad) continue;
    const Node& n = nodes_[id];
    const Tensor& dy = grad[id];
    switch (n.kind) {
      case OpKind::Leaf:
      case OpKind::StopGrad:
        break;
      case OpKind::MatMul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (want(n.inputs[0])) {
          Tensor& da = buf(n.inputs[0]);
          const std::size_t m = a.rows(), k = a.cols(), cn = b.cols();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < k; ++l) {
              double s = 0.0;
              for (std::size_t j = 0; j < cn; ++j) s += dy.at(i, j) * b.at(l, j);
              da.at(i, l) += s;
            }
        }
        if (want(n.inputs[1])) {
          Tensor& db = buf(n.inputs[1]);
          const std::size_t m = a.rows(), k = a.cols(), cn = b.cols();
          for (std::size_t l = 0; l < k; ++l)
            for (std::size_t j = 0; j < cn; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < m; ++i) s += a.at(i, l) * dy.at(i, j);
              db.at(l, j) += s;
            }
        }
        break;
      }
      case OpKind::Transpose: {
        if (want(n.inputs[0])) {
          Tensor& dx = buf(n.inputs[0]);
          for (std::size_t i = 0; i < dy.rows(); ++i)
            for (std::size_t j = 0; j < dy.cols(); ++j) dx.at(j, i) += dy.at(i, j);
        }
        break;
      }
      case OpKind::SoftmaxRows: {
        if (want(n.inputs[0])) {
          Tensor& dx = buf(n.inputs[0]);
          const Tensor& y = n.value;
          for (std::size_t i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) dot += dy.at(i, j) * y.at(i, j);
            for (std::size_t j = 0; j < y.cols(); ++j) dx.at(i, j) += y.at(i, j) * (dy.at(i, j) - dot);
          }
        }
        break;
      }
      case OpKind::LogSoftmaxRows: {
        if (want(n.inputs[0])) {
          Tensor& dx = buf(n.inputs[0]);
          const Tensor& y = n.value;
          for (std::size_t i = 0; i < y.rows(); ++i) {
            double sum_dy = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) sum_dy += dy.at(i, j);
            for (std::size_t j = 0; j < y.cols(); ++j) dx.at(i, j) += dy.at(i, j) - std::exp(y.at(i, j)) * sum_dy;
          }
        }
        break;
      }
      case OpKind::LayerNorm: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        const Tensor& gamma = nodes_[n.inputs[1]].value;
        const std::size_t m = x.rows(), w = x.cols();
        const bool wx = want(n.inputs[0]);
        const bool wg = want(n.inputs[1]);
        const bool wb = want(n.inputs[2]);
        Tensor* dx = wx ? &buf(n.inputs[0]) : nullptr;
        Tensor* dg = wg ? &buf(n.inputs[1]) : nullptr;
        Tensor* db = wb ? &buf(n.inputs[2]) : nullptr;
        for (std::size_t i = 0; i < m; ++i) {
          double mean = 0.0;
          for (std::size_t j = 0; j < w; ++j) mean += x.at(i, j);
          mean /= static_cast<double>(w);
          double var = 0.0;
          for (std::size_t j = 0; j < w; ++j) {
            const double d = x.at(i, j) - mean;
            var += d * d;
          }
          var /= static_cast<double>(w);
          const double inv = 1.0 / std::sqrt(var + n.attr);
          if (wg || wb) {
            for (std::size_t j = 0; j < w; ++j) {
              if (wg) (*dg)[j] += dy.at(i, j) * ((x.at(i, j) - mean) * inv);
              if (wb) (*db)[j] += dy.at(i, j);
            }
          }
          if (wx) {
            double mg = 0.0, mgx = 0.0;
            for (std::size_t j = 0; j < w; ++j) {
              const double g = dy.at(i, j) * gamma[j];
              const double xh = (x.at(i, j) - mean) * inv;
              mg += g;
              mgx += g * xh;
            }
            mg /= static_cast<double>(w);
            mgx /= static_cast<double>(w);
            for (std::size_t j = 0; j < w; ++j) {
              const double g = dy.at(i, j) * gamma[j];
              const double xh = (x.at(i, j) - mean) * inv;
              dx->at(i, j) += (g - mg - xh * mgx) * inv;
            }
          }
        }
        break;
      }
      case OpKind::Add: {
        for (int s = 0; s < 2; ++s) {
          if (want(n.inputs[s])) {
            Tensor& d = buf(n.inputs[s]);
            for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i];
          }
        }
        break;
      }
      case OpKind::Sub: {
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i];
        }
        if (want(n.inputs[1])) {
          Tensor& d = buf(n.inputs[1]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] -= dy[i];
        }
        break;
      }
      case OpKind::Mul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i] * b[i];
        }
        if (want(n.inputs[1])) {
          Tensor& d = buf(n.inputs[1]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i] * a[i];
        }
        break;
      }
      case OpKind::Scale: {
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i] * n.attr;
        }
        break;
      }
      case OpKind::AddRowVec: {
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i];
        }
        if (want(n.inputs[1])) {
          Tensor& d = buf(n.inputs[1]);
          for (std::size_t i = 0; i < dy.rows(); ++i)
            for (std::size_t j = 0; j < dy.cols(); ++j) d[j] += dy.at(i, j);
        }
        break;
      }
      case OpKind::Exp: {
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i] * n.value[i];
        }
        break;
      }
      case OpKind::Log: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          for (std::size_t i = 0; i < dy.numel(); ++i) d[i] += dy[i] / x[i];
        }
        break;
      }
      case OpKind::L2NormalizeRows: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          const Tensor& y = n.value;
          for (std::size_t i = 0; i < x.rows(); ++i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) sq += x.at(i, j) * x.at(i, j);
            const double inv = 1.0 / std::sqrt(sq);
            double dot = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) dot += y.at(i, j) * dy.at(i, j);
            for (std::size_t j = 0; j < x.cols(); ++j) d.at(i, j) += (dy.at(i, j) - y.at(i, j) * dot) * inv;
          }
        }
        break;
      }
      case OpKind::MeanAxis: {
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          const std::size_t m = d.rows(), w = d.cols();
          if (n.axis == 0) {
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < w; ++j) d.at(i, j) += dy[j] / static_cast<double>(m);
          } else {
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < w; ++j) d.at(i, j) += dy[i] / static_cast<double>(w);
          }
        }
        break;
      }
      case OpKind::MaxAxis: {
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          const Tensor& x = nodes_[n.inputs[0]].value;
          const std::size_t m = x.rows(), w = x.cols();
          if (n.axis == 0) {
            for (std::size_t j = 0; j < w; ++j) {
              std::size_t arg = 0;
              for (std::size_t i = 1; i < m; ++i)
                if (x.at(i, j) > x.at(arg, j)) arg = i;  // first max wins ties
              d.at(arg, j) += dy[j];
            }
          } else {
            for (std::size_t i = 0; i < m; ++i) {
              std::size_t arg = 0;
              for (std::size_t j = 1; j < w; ++j)
                if (x.at(i, j) > x.at(i, arg)) arg = j;
              d.at(i, arg) += dy[i];
            }
          }
        }
        break;
      }
      case OpKind::SumAll: {
        if (want(n.inputs[0])) {
          Tensor& d = buf(n.inputs[0]);
          for (std::size_t i = 0; i < d.numel(); ++i) d[i] += dy[0];
        }
        break;
      }
      case OpKind::ConcatLast: {
        std::size_t off = 0;
        for (int in : n.inputs) {
          const Tensor& x = nodes_[in].value;
          if (want(in)) {
            Tensor& d = buf(in);
            for (std::size_t i = 0; i < x.rows(); ++i)
              for (std::size_t j = 0; j < x.cols(); ++j) d.at(i, j) += dy.at(i, off + j);
          }
          off += x.cols();
        }
        break;
      }
      case OpKind::ConcatRows: {
        std::size_t off = 0;
        for (int in : n.inputs) {
          const Tensor& x = nodes_[in].value;
          if (want(in)) {
            Tensor& d = buf(in);
            for (std::size_t i = 0; i < x.rows(); ++i)
              for (std::size_t j = 0; j < x.cols(); ++j) d.at(i, j) += dy.at(off + i, j);
          }
          off += x.rows();
        }
        break;
      }
    }
  }

  std::unordered_map<int, Tensor> out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind == OpKind::Leaf && nodes_[id].requires_grad) {
      if (has[id]) {
        out.emplace(static_cast<int>(id), std::move(grad[id]));
      } else {
        out.emplace(static_cast<int>(id), Tensor(nodes_[id].value.shape()));
      }
    }
  }
  return out;
}

Tensor Graph::run_forward(const Node& n) const {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  switch (n.kind) {
    case OpKind::Leaf:
      return n.value;
    case OpKind::MatMul:
      return ops::matmul(in(0), in(1));
    case OpKind::Transpose:
      return ops::transpose(in(0));
    case OpKind::SoftmaxRows:
      return ops::softmax_rows(in(0));
    case OpKind::LogSoftmaxRows:
      return ops::log_softmax_rows(in(0));
    case OpKind::LayerNorm:
      return ops::layer_norm(in(0), in(1), in(2), n.attr);
    case OpKind::Add:
      return ops::add(in(0), in(1));
    case OpKind::Sub:
      return ops::sub(in(0), in(1));
    case OpKind::Mul:
      return ops::mul(in(0), in(1));
    case OpKind::Scale:
      return ops::scale(in(0), n.attr);
    case OpKind::AddRowVec:
      return ops::add_rowvec(in(0), in(1));
    case OpKind::Exp:
      return ops::exp(in(0));
    case OpKind::Log:
      return ops::log(in(0));
    case OpKind::L2NormalizeRows:
      return ops::l2_normalize_rows(in(0));
    case OpKind::MeanAxis:
      return ops::mean_over_axis(in(0), n.axis);
    case OpKind::MaxAxis:
      return ops::max_over_axis(in(0), n.axis);
    case OpKind::SumAll:
      return ops::sum_all(in(0));
    case OpKind::ConcatLast:
    case OpKind::ConcatRows: {
      std::vector<const Tensor*> vals;
      vals.reserve(n.inputs.size());
      for (int id : n.inputs) vals.push_back(&nodes_[id].value);
      return n.kind == OpKind::ConcatLast ? ops::concat_last_axis(vals) : ops::concat_rows(vals);
    }
    case OpKind::StopGrad:
      return in(0);
  }
  throw std::logic_error("graph: unknown op kind");
}

bool Graph::replay_matches() const {
  for (const Node& n : nodes_) {
    if (n.kind == OpKind::Leaf) continue;
    Tensor fresh = run_forward(n);
    if (precision_ == Precision::Single) quantize_to_float(fresh);
    if (!fresh.same_shape(n.value)) return false;
    for (std::size_t i = 0; i < fresh.numel(); ++i) {
      if (fresh[i] != n.value[i]) return false;
    }
  }
  return true;
}

}  // namespace tapret
