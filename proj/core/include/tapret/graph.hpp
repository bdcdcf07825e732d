#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "tapret/tensor.hpp"

namespace tapret {

enum class Precision { Double, Single };

// Handle to a node in a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Recorded computation tape. Nodes are appended in topological order and the
// whole graph lives for one training step (or one eval tile), then dies.
// Single-owner: a Graph is confined to one thread.
class Graph {
 public:
  explicit Graph(Precision precision = Precision::Double);

  Var leaf(Tensor value, bool requires_grad = false);
  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  Precision precision() const { return precision_; }

  Var matmul(Var a, Var b);
  Var transpose(Var x);
  Var softmax_rows(Var x);
  Var log_softmax_rows(Var x);
  Var layer_norm(Var x, Var gamma, Var beta, double eps);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, double c);
  Var add_rowvec(Var x, Var b);
  Var exp(Var x);
  Var log(Var x);
  Var l2_normalize_rows(Var x);
  Var mean_over_axis(Var x, int axis);
  Var max_over_axis(Var x, int axis);
  Var sum_all(Var x);
  Var concat_last_axis(const std::vector<Var>& xs);
  Var concat_rows(const std::vector<Var>& xs);
  // Identity forward, blocks gradient flow.
  Var stop_gradient(Var x);

  double scalar(Var v) const;  // value of a 1-element node

  // Reverse sweep from a scalar loss. Returns dLoss/dLeaf for every leaf
  // created with requires_grad; fan-out accumulates by summation. The tape
  // is traversed exactly once in reverse topological order.
  std::unordered_map<int, Tensor> backward(Var loss) const;

  // Re-runs every op from its recorded inputs and checks the saved
  // activations are reproduced bit-exactly.
  bool replay_matches() const;

 private:
  enum class OpKind : std::uint8_t {
    Leaf, MatMul, Transpose, SoftmaxRows, LogSoftmaxRows, LayerNorm,
    Add, Sub, Mul, Scale, AddRowVec, Exp, Log, L2NormalizeRows,
    MeanAxis, MaxAxis, SumAll, ConcatLast, ConcatRows, StopGrad,
  };

  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Tensor value;
    double attr = 0.0;  // scale factor or layer-norm eps
    int axis = 0;
    bool requires_grad = false;
  };

  Var record(OpKind kind, std::vector<int> inputs, Tensor value, double attr = 0.0, int axis = 0);
  Tensor run_forward(const Node& node) const;
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  Precision precision_;
};

}  // namespace tapret
