#include "gcope/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "gcope/error.hpp"

namespace gcope {

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, size() - 1};
}

Var Tape::param(Param& p) {
  Node node;
  node.value = p.value;
  node.param = &p;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return {this, size() - 1};
}

Var Tape::push(Matrix value, std::vector<Index> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [&](Index i) { return nodes_[i].requires_grad; });
  if (node.requires_grad) node.backward = std::move(backward);
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return {this, size() - 1};
}

void Tape::accumulate(Index id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(Var loss) {
  if (loss.tape != this) fail(ErrorCode::InvalidArgument, "loss belongs to another tape");
  auto& root = nodes_[loss.id];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    fail(ErrorCode::ShapeMismatch, "backward() needs a scalar loss");
  }
  ensure_grad(root);
  root.grad(0, 0) = 1.0;
  for (Index i = loss.id; i >= 0; --i) {
    auto& node = nodes_[i];
    if (!node.requires_grad || !node.grad_touched || !node.backward) continue;
    node.backward(*this, i);
  }

  static std::mutex warned_mutex;
  static std::set<std::string> warned;
  for (auto& node : nodes_) {
    if (node.param == nullptr) continue;
    if (!node.grad_touched) {
      std::lock_guard lock(warned_mutex);
      if (warned.insert(node.param->name).second) {
        warn("parameter " + node.param->name + " does not reach the loss; gradient is zero");
      }
      continue;
    }
    if (node.param->grad.rows() != node.grad.rows() || node.param->grad.cols() != node.grad.cols()) {
      node.param->zero_grad();
    }
    node.param->grad += node.grad;
  }
}

namespace ad {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
                                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                       "x" + std::to_string(b.cols()));
  }
}

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    fail(ErrorCode::ShapeMismatch, "matmul: " + std::to_string(av.rows()) + "x" + std::to_string(av.cols()) +
                                       " * " + std::to_string(bv.rows()) + "x" + std::to_string(bv.cols()));
  }
  Matrix out = av * bv;
  const Index ai = a.id, bi = b.id;
  return a.tape->push(std::move(out), {ai, bi}, [ai, bi](Tape& t, Index self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ai)) t.accumulate_expr(ai, g * t.value(bi).transpose());
    if (t.requires_grad(bi)) t.accumulate_expr(bi, t.value(ai).transpose() * g);
  });
}

Var transpose(Var a) {
  const Index ai = a.id;
  return a.tape->push(a.value().transpose(), {ai},
                      [ai](Tape& t, Index self) { t.accumulate_expr(ai, t.grad(self).transpose()); });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  const Index ai = a.id, bi = b.id;
  return a.tape->push(a.value() + b.value(), {ai, bi}, [ai, bi](Tape& t, Index self) {
    t.accumulate(ai, t.grad(self));
    t.accumulate(bi, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  const Index ai = a.id, bi = b.id;
  return a.tape->push(a.value() - b.value(), {ai, bi}, [ai, bi](Tape& t, Index self) {
    t.accumulate(ai, t.grad(self));
    t.accumulate_expr(bi, -t.grad(self));
  });
}

Var add_row(Var a, Var row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) fail(ErrorCode::ShapeMismatch, "add_row: bias shape");
  Matrix out = av.rowwise() + rv.row(0);
  const Index ai = a.id, ri = row.id;
  return a.tape->push(std::move(out), {ai, ri}, [ai, ri](Tape& t, Index self) {
    t.accumulate(ai, t.grad(self));
    if (t.requires_grad(ri)) t.accumulate_expr(ri, t.grad(self).colwise().sum());
  });
}

Var scale(Var a, double s) {
  const Index ai = a.id;
  return a.tape->push(a.value() * s, {ai},
                      [ai, s](Tape& t, Index self) { t.accumulate_expr(ai, s * t.grad(self)); });
}

Var hadamard_const(Var a, const Matrix& m) {
  check_same_shape(a.value(), m, "hadamard_const");
  const Index ai = a.id;
  return a.tape->push(a.value().cwiseProduct(m), {ai}, [ai, m](Tape& t, Index self) {
    t.accumulate_expr(ai, t.grad(self).cwiseProduct(m));
  });
}

Var relu(Var a) {
  const Matrix& av = a.value();
  if (av.size() > 0) a.tape->note_kink_margin(av.cwiseAbs().minCoeff());
  const Index ai = a.id;
  return a.tape->push(av.cwiseMax(0.0), {ai}, [ai](Tape& t, Index self) {
    const Matrix& x = t.value(ai);
    t.accumulate_expr(ai, t.grad(self).cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

Var tanh(Var a) {
  const Index ai = a.id;
  Matrix out = a.value().array().tanh().matrix();
  return a.tape->push(std::move(out), {ai}, [ai](Tape& t, Index self) {
    const Matrix& y = t.value(self);
    t.accumulate_expr(ai, t.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var concat_rows(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) fail(ErrorCode::ShapeMismatch, "concat_rows: column count");
  Matrix out(av.rows() + bv.rows(), av.cols());
  out.topRows(av.rows()) = av;
  out.bottomRows(bv.rows()) = bv;
  const Index ai = a.id, bi = b.id, ar = av.rows(), br = bv.rows();
  return a.tape->push(std::move(out), {ai, bi}, [ai, bi, ar, br](Tape& t, Index self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ai)) t.accumulate_expr(ai, g.topRows(ar));
    if (t.requires_grad(bi)) t.accumulate_expr(bi, g.bottomRows(br));
  });
}

Var gather_rows(Var src, std::vector<Index> index) {
  const Matrix& sv = src.value();
  Matrix out = Matrix::Zero(static_cast<Index>(index.size()), sv.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    const Index s = index[r];
    if (s >= sv.rows()) fail(ErrorCode::IndexOutOfRange, "gather_rows: index beyond source rows");
    if (s >= 0) out.row(static_cast<Index>(r)) = sv.row(s);
  }
  const Index si = src.id;
  return src.tape->push(std::move(out), {si}, [si, index = std::move(index)](Tape& t, Index self) {
    const Matrix& g = t.grad(self);
    Matrix& gs = t.grad_buffer(si);
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index[r] >= 0) gs.row(index[r]) += g.row(static_cast<Index>(r));
    }
  });
}

Var spmm(std::shared_ptr<const Csr> wp, Var x) {
  const Csr& w = *wp;
  const Matrix& xv = x.value();
  if (w.rows != xv.rows()) fail(ErrorCode::ShapeMismatch, "spmm: operator and input row counts differ");
  Matrix out = Matrix::Zero(w.rows, xv.cols());
  for (Index r = 0; r < w.rows; ++r) {
    for (Index k = w.row_ptr[r]; k < w.row_ptr[r + 1]; ++k) out.row(r) += w.value(k) * xv.row(w.cols[k]);
  }
  const Index xi = x.id;
  return x.tape->push(std::move(out), {xi}, [xi, wp](Tape& t, Index self) {
    const Csr& w = *wp;
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad_buffer(xi);
    for (Index r = 0; r < w.rows; ++r) {
      for (Index k = w.row_ptr[r]; k < w.row_ptr[r + 1]; ++k) gx.row(w.cols[k]) += w.value(k) * g.row(r);
    }
  });
}

Var spmm_edge(std::shared_ptr<const Csr> pp, Var edge_w, Var x) {
  const Csr& pattern = *pp;
  const Matrix& ev = edge_w.value();
  const Matrix& xv = x.value();
  if (ev.rows() != pattern.nnz() || ev.cols() != 1) fail(ErrorCode::ShapeMismatch, "spmm_edge: edge weights");
  if (pattern.rows != xv.rows()) fail(ErrorCode::ShapeMismatch, "spmm_edge: input rows");
  Matrix out = Matrix::Zero(pattern.rows, xv.cols());
  for (Index r = 0; r < pattern.rows; ++r) {
    for (Index k = pattern.row_ptr[r]; k < pattern.row_ptr[r + 1]; ++k) {
      out.row(r) += ev(k, 0) * xv.row(pattern.cols[k]);
    }
  }
  const Index ei = edge_w.id, xi = x.id;
  return x.tape->push(std::move(out), {ei, xi}, [ei, xi, pp](Tape& t, Index self) {
    const Csr& pattern = *pp;
    const Matrix& g = t.grad(self);
    const Matrix& e = t.value(ei);
    const Matrix& xv2 = t.value(xi);
    const bool need_e = t.requires_grad(ei);
    const bool need_x = t.requires_grad(xi);
    Matrix* ge = need_e ? &t.grad_buffer(ei) : nullptr;
    Matrix* gx = need_x ? &t.grad_buffer(xi) : nullptr;
    for (Index r = 0; r < pattern.rows; ++r) {
      for (Index k = pattern.row_ptr[r]; k < pattern.row_ptr[r + 1]; ++k) {
        const Index c = pattern.cols[k];
        if (gx) gx->row(c) += e(k, 0) * g.row(r);
        if (ge) (*ge)(k, 0) += g.row(r).dot(xv2.row(c));
      }
    }
  });
}

Var edge_score(std::shared_ptr<const Csr> pp, Var s) {
  const Csr& pattern = *pp;
  const Matrix& sv = s.value();
  if (sv.rows() != pattern.rows || sv.cols() != 2) fail(ErrorCode::ShapeMismatch, "edge_score: scores must be n x 2");
  Matrix out(pattern.nnz(), 1);
  for (Index r = 0; r < pattern.rows; ++r) {
    for (Index k = pattern.row_ptr[r]; k < pattern.row_ptr[r + 1]; ++k) {
      out(k, 0) = sv(r, 0) + sv(pattern.cols[k], 1);
    }
  }
  const Index si = s.id;
  return s.tape->push(std::move(out), {si}, [si, pp](Tape& t, Index self) {
    const Csr& pattern = *pp;
    const Matrix& g = t.grad(self);
    Matrix& gs = t.grad_buffer(si);
    for (Index r = 0; r < pattern.rows; ++r) {
      for (Index k = pattern.row_ptr[r]; k < pattern.row_ptr[r + 1]; ++k) {
        gs(r, 0) += g(k, 0);
        gs(pattern.cols[k], 1) += g(k, 0);
      }
    }
  });
}

Var row_normalize(Var a) {
  const Matrix& av = a.value();
  Vector norms = av.rowwise().norm();
  for (Index r = 0; r < norms.size(); ++r) {
    if (!(norms[r] > 0.0)) fail(ErrorCode::ZeroEmbedding, "row " + std::to_string(r) + " has zero norm");
  }
  Matrix out = norms.cwiseInverse().asDiagonal() * av;
  const Index ai = a.id;
  return a.tape->push(std::move(out), {ai}, [ai, norms = std::move(norms)](Tape& t, Index self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    const Vector proj = g.cwiseProduct(y).rowwise().sum();
    Matrix gx = g - proj.asDiagonal() * y;
    t.accumulate_expr(ai, norms.cwiseInverse().asDiagonal() * gx);
  });
}

Var logsumexp_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  for (Index r = 0; r < av.rows(); ++r) {
    const double m = av.row(r).maxCoeff();
    out(r, 0) = m + std::log((av.row(r).array() - m).exp().sum());
  }
  const Index ai = a.id;
  return a.tape->push(std::move(out), {ai}, [ai](Tape& t, Index self) {
    const Matrix& x = t.value(ai);
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix gx(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) gx.row(r) = g(r, 0) * (x.row(r).array() - y(r, 0)).exp().matrix();
    t.accumulate(ai, gx);
  });
}

Var softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Index r = 0; r < av.rows(); ++r) {
    const double m = av.row(r).maxCoeff();
    out.row(r) = (av.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  const Index ai = a.id;
  return a.tape->push(std::move(out), {ai}, [ai](Tape& t, Index self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const Vector dot = g.cwiseProduct(y).rowwise().sum();
    Matrix gx = y.cwiseProduct(g - dot.replicate(1, g.cols()));
    t.accumulate(ai, gx);
  });
}

Var diag(Var a) {
  const Matrix& av = a.value();
  if (av.rows() != av.cols()) fail(ErrorCode::ShapeMismatch, "diag: matrix must be square");
  Matrix out = av.diagonal();
  const Index ai = a.id;
  return a.tape->push(std::move(out), {ai}, [ai](Tape& t, Index self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_buffer(ai);
    for (Index i = 0; i < g.rows(); ++i) ga(i, i) += g(i, 0);
  });
}

Var sum_all(Var a) {
  const Index ai = a.id;
  return a.tape->push(scalar_matrix(a.value().sum()), {ai}, [ai](Tape& t, Index self) {
    Matrix& ga = t.grad_buffer(ai);
    ga.array() += t.grad(self)(0, 0);
  });
}

Var mean_all(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) fail(ErrorCode::ShapeMismatch, "mean_all of empty matrix");
  const Index ai = a.id;
  return a.tape->push(scalar_matrix(a.value().sum() / n), {ai}, [ai, n](Tape& t, Index self) {
    Matrix& ga = t.grad_buffer(ai);
    ga.array() += t.grad(self)(0, 0) / n;
  });
}

Var mse(Var pred, const Matrix& target) {
  check_same_shape(pred.value(), target, "mse");
  const double n = static_cast<double>(target.size());
  if (n == 0) fail(ErrorCode::ShapeMismatch, "mse of empty matrix");
  Matrix residual = pred.value() - target;
  const double loss = residual.squaredNorm() / n;
  const Index pi = pred.id;
  return pred.tape->push(scalar_matrix(loss), {pi}, [pi, residual = std::move(residual), n](Tape& t, Index self) {
    t.accumulate_expr(pi, (2.0 * t.grad(self)(0, 0) / n) * residual);
  });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  const Matrix& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.rows() || z.rows() == 0) {
    fail(ErrorCode::ShapeMismatch, "softmax_cross_entropy: one label per row required");
  }
  Matrix prob(z.rows(), z.cols());
  double loss = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= z.cols()) fail(ErrorCode::IndexOutOfRange, "softmax_cross_entropy: label out of range");
    const double m = z.row(r).maxCoeff();
    prob.row(r) = (z.row(r).array() - m).exp().matrix();
    const double s = prob.row(r).sum();
    prob.row(r) /= s;
    loss += m + std::log(s) - z(r, y);
  }
  const double n = static_cast<double>(z.rows());
  const Index li = logits.id;
  return logits.tape->push(scalar_matrix(loss / n), {li},
                           [li, prob = std::move(prob), labels, n](Tape& t, Index self) {
                             Matrix g = prob;
                             for (Index r = 0; r < g.rows(); ++r) g(r, labels[r]) -= 1.0;
                             t.accumulate_expr(li, (t.grad(self)(0, 0) / n) * g);
                           });
}

Var segment_reduce(Var x, const std::vector<Index>& offsets, Reduce kind) {
  const Matrix& xv = x.value();
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != xv.rows()) {
    fail(ErrorCode::ShapeMismatch, "segment_reduce: offsets must span all rows");
  }
  const Index segs = static_cast<Index>(offsets.size()) - 1;
  Matrix out = Matrix::Zero(segs, xv.cols());
  std::vector<Index> argmax;
  if (kind == Reduce::Max) argmax.assign(static_cast<std::size_t>(segs * xv.cols()), -1);
  for (Index s = 0; s < segs; ++s) {
    const Index b = offsets[s], e = offsets[s + 1];
    if (e <= b) fail(ErrorCode::EmptySubset, "segment " + std::to_string(s) + " is empty");
    if (kind == Reduce::Max) {
      for (Index c = 0; c < xv.cols(); ++c) {
        Index best = b;
        for (Index r = b + 1; r < e; ++r) {
          if (xv(r, c) > xv(best, c)) best = r;
        }
        out(s, c) = xv(best, c);
        argmax[static_cast<std::size_t>(s * xv.cols() + c)] = best;
      }
    } else {
      for (Index r = b; r < e; ++r) out.row(s) += xv.row(r);
      if (kind == Reduce::Mean) out.row(s) /= static_cast<double>(e - b);
    }
  }
  const Index xi = x.id;
  return x.tape->push(std::move(out), {xi},
                      [xi, offsets, kind, argmax = std::move(argmax)](Tape& t, Index self) {
                        const Matrix& g = t.grad(self);
                        Matrix& gx = t.grad_buffer(xi);
                        const Index segs2 = static_cast<Index>(offsets.size()) - 1;
                        for (Index s = 0; s < segs2; ++s) {
                          const Index b = offsets[s], e = offsets[s + 1];
                          if (kind == Reduce::Max) {
                            for (Index c = 0; c < g.cols(); ++c) {
                              gx(argmax[static_cast<std::size_t>(s * g.cols() + c)], c) += g(s, c);
                            }
                          } else {
                            const double w = kind == Reduce::Mean ? 1.0 / static_cast<double>(e - b) : 1.0;
                            for (Index r = b; r < e; ++r) gx.row(r) += w * g.row(s);
                          }
                        }
                      });
}

Var cosine_similarity(Var a, Var b) { return matmul(row_normalize(a), transpose(row_normalize(b))); }

}  // namespace ad
}  // namespace gcope
