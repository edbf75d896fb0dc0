#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gcope/types.hpp"

namespace gcope {

/// A named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  Index id = -1;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Reverse-mode tape over whole-matrix operations. Nodes are appended in
/// evaluation order, so backward() simply walks the node list in reverse.
/// One tape per training step, confined to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Index self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to `p`; backward() adds into p.grad.
  Var param(Param& p);

  /// Appends an op node. `backward` reads grad(self) and calls accumulate()
  /// on the inputs. Not called when no input requires a gradient.
  Var push(Matrix value, std::vector<Index> inputs, BackwardFn backward);

  void backward(Var loss);

  const Matrix& value(Index id) const { return nodes_[id].value; }
  const Matrix& grad(Index id) const { return nodes_[id].grad; }
  bool requires_grad(Index id) const { return nodes_[id].requires_grad; }
  void accumulate(Index id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(Index id, const Expr& g) {
    auto& node = nodes_[id];
    if (!node.requires_grad) return;
    ensure_grad(node);
    node.grad += g;
  }
  Matrix& grad_buffer(Index id) {
    ensure_grad(nodes_[id]);
    return nodes_[id].grad;
  }

  /// Smallest |input| any relu on this tape has seen. Finite-difference
  /// checks use it to stay away from the kink.
  double kink_margin() const { return kink_margin_; }
  void note_kink_margin(double m) {
    if (m < kink_margin_) kink_margin_ = m;
  }

  Index size() const { return static_cast<Index>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Param* param = nullptr;
    BackwardFn backward;
    std::vector<Index> inputs;
    bool requires_grad = false;
    bool grad_touched = false;
  };

  static void ensure_grad(Node& node) {
    if (!node.grad_touched) {
      node.grad.setZero(node.value.rows(), node.value.cols());
      node.grad_touched = true;
    }
  }

  std::vector<Node> nodes_;
  double kink_margin_ = 1e300;
};

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a (n x d) plus a 1 x d row broadcast over rows.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
/// Elementwise product with a constant matrix of the same shape.
Var hadamard_const(Var a, const Matrix& m);
Var relu(Var a);
Var tanh(Var a);
Var concat_rows(Var a, Var b);
/// out.row(r) = src.row(index[r]), or zeros when index[r] < 0.
Var gather_rows(Var src, std::vector<Index> index);
/// w * x for a fixed weighted sparse matrix.
Var spmm(std::shared_ptr<const Csr> w, Var x);
/// pattern * x where entry k of the pattern carries edge_w(k, 0).
Var spmm_edge(std::shared_ptr<const Csr> pattern, Var edge_w, Var x);
/// e(k) = s(row_k, 0) + s(col_k, 1) for every stored entry k.
Var edge_score(std::shared_ptr<const Csr> pattern, Var s);
/// Rows scaled to unit length. Throws ZeroEmbedding on a zero row.
Var row_normalize(Var a);
Var logsumexp_rows(Var a);
Var softmax_rows(Var a);
Var diag(Var a);
Var sum_all(Var a);
Var mean_all(Var a);
/// Mean over all entries of (pred - target)^2.
Var mse(Var pred, const Matrix& target);
/// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

enum class Reduce { Mean, Sum, Max };
/// Segment s spans rows [offsets[s], offsets[s+1]); one output row each.
Var segment_reduce(Var x, const std::vector<Index>& offsets, Reduce kind);

/// Pairwise cosine similarities of rows of a against rows of b.
Var cosine_similarity(Var a, Var b);

}  // namespace ad

}  // namespace gcope
