#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "vrrae/matrix.hpp"
#include "vrrae/svd.hpp"

namespace vrrae {

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Subtract,
  Hadamard,
  ScalarMul,
  Exp,
  Log,
  Square,
  SumAll,
  SumRows,
  Transpose,
  SliceRows,
  ConcatRows,
  BroadcastColumn,
  Relu,
  Sigmoid,
  Tanh,
  SvdU,
  SvdS,
  SvdVt,
};

const char* op_name(Op op);

/// Reverse-mode tape over Matrix operations. Values are computed eagerly as
/// nodes are recorded; backward() walks the tape once in reverse order and
/// accumulates gradients by sum over all paths. Single-threaded per graph.
class Graph {
 public:
  using NodeId = std::uint32_t;

  NodeId leaf(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId subtract(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scalar_mul(NodeId a, double c);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);
  NodeId sum_all(NodeId a);
  NodeId sum_rows(NodeId a);
  NodeId transpose(NodeId a);
  NodeId slice_rows(NodeId a, Index begin, Index end);
  NodeId concat_rows(NodeId a, NodeId b);
  NodeId broadcast_column(NodeId column, Index cols);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);

  struct SvdNodes {
    NodeId u;   // L x k
    NodeId s;   // k x 1
    NodeId vt;  // k x B
  };
  /// Differentiable rank-k SVD; the three outputs share one decomposition.
  SvdNodes truncated_svd(NodeId m, Index k);

  const Matrix& value(NodeId id) const { return nodes_[id].value; }
  Index num_nodes() const { return nodes_.size(); }

  /// Seeds d(output)=1 and accumulates gradients; output must be 1x1.
  void backward(NodeId output);

  bool has_grad(NodeId id) const { return nodes_[id].grad_set; }
  const Matrix& grad(NodeId id) const;

 private:
  struct SvdShared {
    SvdFactors full;
    Index k = 0;
  };

  struct Node {
    Op op = Op::Leaf;
    NodeId in0 = 0;
    NodeId in1 = 0;
    double scalar = 0.0;   // ScalarMul
    Index aux0 = 0;        // SliceRows begin / BroadcastColumn cols
    Index aux1 = 0;        // SliceRows end
    std::shared_ptr<SvdShared> svd;
    Matrix value;
    Matrix grad;
    bool grad_set = false;
  };

  NodeId push(Node node);
  NodeId unary(Op op, NodeId a);
  void accumulate(NodeId id, const Matrix& g);
  void backprop_node(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace vrrae
