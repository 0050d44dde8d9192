#include "vrrae/graph.hpp"

#include <cmath>

namespace vrrae {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Subtract: return "subtract";
    case Op::Hadamard: return "hadamard";
    case Op::ScalarMul: return "scalar-multiply";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::SumAll: return "sum-all";
    case Op::SumRows: return "sum-rows";
    case Op::Transpose: return "transpose";
    case Op::SliceRows: return "slice-rows";
    case Op::ConcatRows: return "concat-rows";
    case Op::BroadcastColumn: return "broadcast-column";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::SvdU: return "svd-u";
    case Op::SvdS: return "svd-s";
    case Op::SvdVt: return "svd-vt";
  }
  return "?";
}

Graph::NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::NodeId Graph::leaf(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::MatMul;
  n.in0 = a;
  n.in1 = b;
  n.value = vrrae::matmul(value(a), value(b));
  return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::Add;
  n.in0 = a;
  n.in1 = b;
  n.value = vrrae::add(value(a), value(b));
  return push(std::move(n));
}

Graph::NodeId Graph::subtract(NodeId a, NodeId b) {
  Node n;
  n.op = Op::Subtract;
  n.in0 = a;
  n.in1 = b;
  n.value = vrrae::subtract(value(a), value(b));
  return push(std::move(n));
}

Graph::NodeId Graph::hadamard(NodeId a, NodeId b) {
  Node n;
  n.op = Op::Hadamard;
  n.in0 = a;
  n.in1 = b;
  n.value = vrrae::hadamard(value(a), value(b));
  return push(std::move(n));
}

Graph::NodeId Graph::scalar_mul(NodeId a, double c) {
  Node n;
  n.op = Op::ScalarMul;
  n.in0 = a;
  n.scalar = c;
  n.value = vrrae::scale(value(a), c);
  return push(std::move(n));
}

Graph::NodeId Graph::unary(Op op, NodeId a) {
  Node n;
  n.op = op;
  n.in0 = a;
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols());
  switch (op) {
    case Op::Exp:
      for (Index i = 0; i < x.size(); ++i) y.data()[i] = std::exp(x.data()[i]);
      break;
    case Op::Log:
      for (Index i = 0; i < x.size(); ++i) y.data()[i] = std::log(x.data()[i]);
      break;
    case Op::Square:
      for (Index i = 0; i < x.size(); ++i) y.data()[i] = x.data()[i] * x.data()[i];
      break;
    case Op::Relu:
      for (Index i = 0; i < x.size(); ++i) y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
      break;
    case Op::Sigmoid:
      for (Index i = 0; i < x.size(); ++i) y.data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
      break;
    case Op::Tanh:
      for (Index i = 0; i < x.size(); ++i) y.data()[i] = std::tanh(x.data()[i]);
      break;
    default:
      throw Error("unary: bad op");
  }
  n.value = std::move(y);
  return push(std::move(n));
}

Graph::NodeId Graph::exp(NodeId a) { return unary(Op::Exp, a); }
Graph::NodeId Graph::log(NodeId a) { return unary(Op::Log, a); }
Graph::NodeId Graph::square(NodeId a) { return unary(Op::Square, a); }
Graph::NodeId Graph::relu(NodeId a) { return unary(Op::Relu, a); }
Graph::NodeId Graph::sigmoid(NodeId a) { return unary(Op::Sigmoid, a); }
Graph::NodeId Graph::tanh(NodeId a) { return unary(Op::Tanh, a); }

Graph::NodeId Graph::sum_all(NodeId a) {
  Node n;
  n.op = Op::SumAll;
  n.in0 = a;
  Matrix y(1, 1);
  y(0, 0) = vrrae::sum_all(value(a));
  n.value = std::move(y);
  return push(std::move(n));
}

Graph::NodeId Graph::sum_rows(NodeId a) {
  Node n;
  n.op = Op::SumRows;
  n.in0 = a;
  n.value = vrrae::sum_rows(value(a));
  return push(std::move(n));
}

Graph::NodeId Graph::transpose(NodeId a) {
  Node n;
  n.op = Op::Transpose;
  n.in0 = a;
  n.value = vrrae::transpose(value(a));
  return push(std::move(n));
}

Graph::NodeId Graph::slice_rows(NodeId a, Index begin, Index end) {
  Node n;
  n.op = Op::SliceRows;
  n.in0 = a;
  n.aux0 = begin;
  n.aux1 = end;
  n.value = vrrae::slice_rows(value(a), begin, end);
  return push(std::move(n));
}

Graph::NodeId Graph::concat_rows(NodeId a, NodeId b) {
  Node n;
  n.op = Op::ConcatRows;
  n.in0 = a;
  n.in1 = b;
  n.value = vrrae::concat_rows(value(a), value(b));
  return push(std::move(n));
}

Graph::NodeId Graph::broadcast_column(NodeId column, Index cols) {
  Node n;
  n.op = Op::BroadcastColumn;
  n.in0 = column;
  n.aux0 = cols;
  n.value = vrrae::broadcast_column(value(column), cols);
  return push(std::move(n));
}

Graph::SvdNodes Graph::truncated_svd(NodeId m, Index k) {
  auto shared = std::make_shared<SvdShared>();
  shared->full = full_svd(value(m));
  shared->k = k;
  const Index p = shared->full.s.size();
  if (k < 1 || k > p)
    throw ValueError("truncated_svd: rank " + std::to_string(k) + " out of range for " +
                     value(m).shape_str());

  TruncatedFactors f = shared->full.truncate(k);

  Node nu;
  nu.op = Op::SvdU;
  nu.in0 = m;
  nu.svd = shared;
  nu.value = std::move(f.u_bar);
  NodeId u = push(std::move(nu));

  Node ns;
  ns.op = Op::SvdS;
  ns.in0 = m;
  ns.svd = shared;
  ns.value = Matrix::column(f.s_bar);
  NodeId s = push(std::move(ns));

  Node nv;
  nv.op = Op::SvdVt;
  nv.in0 = m;
  nv.svd = shared;
  nv.value = std::move(f.vt_bar);
  NodeId vt = push(std::move(nv));

  return {u, s, vt};
}

const Matrix& Graph::grad(NodeId id) const {
  if (!nodes_[id].grad_set)
    throw Error("grad: node " + std::to_string(id) + " has no gradient; run backward first");
  return nodes_[id].grad;
}

void Graph::accumulate(NodeId id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.grad_set) {
    n.grad = g;
    n.grad_set = true;
  } else {
    add_in_place(n.grad, g);
  }
}

void Graph::backward(NodeId output) {
  const Matrix& out = value(output);
  if (out.rows() != 1 || out.cols() != 1)
    throw ShapeError("backward: output node must be 1x1, got " + out.shape_str());
  for (Node& n : nodes_) {
    n.grad = Matrix();
    n.grad_set = false;
  }
  Matrix seed(1, 1);
  seed(0, 0) = 1.0;
  accumulate(output, seed);
  for (NodeId id = output + 1; id-- > 0;) {
    if (nodes_[id].grad_set && nodes_[id].op != Op::Leaf) backprop_node(id);
  }
}

void Graph::backprop_node(NodeId id) {
  Node& n = nodes_[id];
  const Matrix& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul:
      accumulate(n.in0, matmul_nt(g, value(n.in1)));
      accumulate(n.in1, matmul_tn(value(n.in0), g));
      break;
    case Op::Add:
      accumulate(n.in0, g);
      accumulate(n.in1, g);
      break;
    case Op::Subtract:
      accumulate(n.in0, g);
      accumulate(n.in1, scale(g, -1.0));
      break;
    case Op::Hadamard:
      accumulate(n.in0, vrrae::hadamard(g, value(n.in1)));
      accumulate(n.in1, vrrae::hadamard(g, value(n.in0)));
      break;
    case Op::ScalarMul:
      accumulate(n.in0, scale(g, n.scalar));
      break;
    case Op::Exp:
      accumulate(n.in0, vrrae::hadamard(g, n.value));
      break;
    case Op::Log: {
      const Matrix& x = value(n.in0);
      Matrix d(x.rows(), x.cols());
      for (Index i = 0; i < x.size(); ++i) d.data()[i] = g.data()[i] / x.data()[i];
      accumulate(n.in0, d);
      break;
    }
    case Op::Square: {
      const Matrix& x = value(n.in0);
      Matrix d(x.rows(), x.cols());
      for (Index i = 0; i < x.size(); ++i) d.data()[i] = 2.0 * x.data()[i] * g.data()[i];
      accumulate(n.in0, d);
      break;
    }
    case Op::SumAll:
      accumulate(n.in0, Matrix::constant(value(n.in0).rows(), value(n.in0).cols(), g(0, 0)));
      break;
    case Op::SumRows:
      accumulate(n.in0, vrrae::broadcast_column(g, value(n.in0).cols()));
      break;
    case Op::Transpose:
      accumulate(n.in0, vrrae::transpose(g));
      break;
    case Op::SliceRows: {
      const Matrix& x = value(n.in0);
      Matrix d(x.rows(), x.cols());
      for (Index j = 0; j < x.cols(); ++j)
        for (Index i = n.aux0; i < n.aux1; ++i) d(i, j) = g(i - n.aux0, j);
      accumulate(n.in0, d);
      break;
    }
    case Op::ConcatRows: {
      const Index top = value(n.in0).rows();
      accumulate(n.in0, vrrae::slice_rows(g, 0, top));
      accumulate(n.in1, vrrae::slice_rows(g, top, g.rows()));
      break;
    }
    case Op::BroadcastColumn:
      accumulate(n.in0, vrrae::sum_rows(g));
      break;
    case Op::Relu: {
      const Matrix& x = value(n.in0);
      Matrix d(x.rows(), x.cols());
      for (Index i = 0; i < x.size(); ++i)
        d.data()[i] = x.data()[i] > 0.0 ? g.data()[i] : 0.0;
      accumulate(n.in0, d);
      break;
    }
    case Op::Sigmoid: {
      Matrix d(n.value.rows(), n.value.cols());
      for (Index i = 0; i < d.size(); ++i) {
        double y = n.value.data()[i];
        d.data()[i] = g.data()[i] * y * (1.0 - y);
      }
      accumulate(n.in0, d);
      break;
    }
    case Op::Tanh: {
      Matrix d(n.value.rows(), n.value.cols());
      for (Index i = 0; i < d.size(); ++i) {
        double y = n.value.data()[i];
        d.data()[i] = g.data()[i] * (1.0 - y * y);
      }
      accumulate(n.in0, d);
      break;
    }
    case Op::SvdU:
      accumulate(n.in0, svd_backward_full(n.svd->full, n.svd->k, &g, nullptr, nullptr));
      break;
    case Op::SvdS: {
      std::vector<double> gs(n.svd->k);
      for (Index i = 0; i < n.svd->k; ++i) gs[i] = g(i, 0);
      accumulate(n.in0, svd_backward_full(n.svd->full, n.svd->k, nullptr, &gs, nullptr));
      break;
    }
    case Op::SvdVt:
      accumulate(n.in0, svd_backward_full(n.svd->full, n.svd->k, nullptr, nullptr, &g));
      break;
  }
}


}  // namespace vrrae
