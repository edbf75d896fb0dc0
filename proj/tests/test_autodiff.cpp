#include <gtest/gtest.h>

#include <memory>

#include "gcope/autodiff.hpp"
#include "gcope/error.hpp"
#include "helpers.hpp"

using namespace gcope;

namespace {

constexpr double kStep = 1e-5;
constexpr double kFloor = 1e-6;
constexpr double kTol = 1e-4;

using OpFn = std::function<Var(Tape&, std::vector<Var>&)>;

// Loss = sum(op(params) .* R) for a fixed random R; returns the worst
// relative error over all parameter entries.
double op_gradient_error(std::vector<Param>& params, const OpFn& op, std::mt19937_64& rng) {
  Matrix weights;
  auto loss = [&]() {
    Tape t;
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(t.param(p));
    Var out = op(t, vars);
    if (weights.size() == 0) weights = testutil::random_matrix(out.rows(), out.cols(), rng);
    return ad::sum_all(ad::hadamard_const(out, weights)).scalar();
  };
  loss();
  for (auto& p : params) p.zero_grad();
  {
    Tape t;
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(t.param(p));
    t.backward(ad::sum_all(ad::hadamard_const(op(t, vars), weights)));
  }
  double worst = 0.0;
  for (auto& p : params) {
    Param* pp = &p;
    const Matrix analytic = p.grad;
    auto r = oracle::finite_difference(
        loss, [pp](long i) { return pp->value.data()[i]; }, [pp](long i, double v) { pp->value.data()[i] = v; },
        static_cast<long>(p.size()), [&analytic](long i) { return analytic.data()[i]; }, kStep, kFloor);
    worst = std::max(worst, r.max_rel);
  }
  return worst;
}

// Entries pushed away from zero so relu/max kinks stay far from the FD step.
Matrix away_from_zero(Index r, Index c, std::mt19937_64& rng) {
  Matrix m = testutil::random_matrix(r, c, rng);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] += (m.data()[i] >= 0 ? 0.1 : -0.1);
  return m;
}

struct Shapes {
  Index a, b, c;
};

Shapes random_shapes(std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> d(1, 5);
  return {d(rng), d(rng), d(rng)};
}

std::shared_ptr<const Csr> random_pattern(Index n, std::mt19937_64& rng, bool weighted) {
  std::bernoulli_distribution coin(0.5);
  std::vector<Edge> e;
  for (Index u = 0; u < n; ++u)
    for (Index v = 0; v < n; ++v)
      if (coin(rng)) e.emplace_back(u, v);
  auto csr = std::make_shared<Csr>(Csr::from_entries(n, e));
  if (weighted) {
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    csr->values.resize(csr->cols.size());
    for (auto& x : csr->values) x = w(rng);
  }
  return csr;
}

void check_op(const std::string& name, const std::function<std::vector<Param>(std::mt19937_64&, OpFn&)>& make) {
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    OpFn op;
    auto params = make(rng, op);
    const double err = op_gradient_error(params, op, rng);
    ASSERT_LT(err, kTol) << name << " seed " << seed;
  }
}

Param P(const std::string& n, Matrix m) { return Param(n, std::move(m)); }

}  // namespace

TEST(Autodiff, SumGradientIsOnes) {
  Param w("w", Matrix::Constant(2, 2, 3.0));
  Tape t;
  t.backward(ad::sum_all(t.param(w)));
  EXPECT_EQ(w.grad, Matrix::Ones(2, 2));
}

TEST(Autodiff, HalfSquaredNormGradientIsValue) {
  std::mt19937_64 rng(1);
  Param w("w", testutil::random_matrix(3, 2, rng));
  Tape t;
  Var v = t.param(w);
  // ||W||^2 / 2 = trace(W^T W) / 2
  t.backward(ad::scale(ad::sum_all(ad::diag(ad::matmul(ad::transpose(v), v))), 0.5));
  EXPECT_LT((w.grad - w.value).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Autodiff, UnusedParamStaysZero) {
  Param used("used", Matrix::Ones(1, 1));
  Param unused("unused", Matrix::Ones(1, 1));
  Tape t;
  t.param(unused);
  t.backward(ad::sum_all(t.param(used)));
  EXPECT_EQ(unused.grad(0, 0), 0.0);
}

TEST(Autodiff, Matmul) {
  check_op("matmul", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::matmul(v[0], v[1]); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng)), P("b", testutil::random_matrix(s.b, s.c, rng))};
  });
}

TEST(Autodiff, TransposeAddSubScale) {
  check_op("linear", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) {
      return ad::scale(ad::sub(ad::add(v[0], ad::transpose(v[1])), ad::scale(v[0], 0.3)), -1.7);
    };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng)), P("b", testutil::random_matrix(s.b, s.a, rng))};
  });
}

TEST(Autodiff, AddRow) {
  check_op("add_row", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::add_row(v[0], v[1]); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng)), P("r", testutil::random_matrix(1, s.b, rng))};
  });
}

TEST(Autodiff, HadamardConst) {
  check_op("hadamard", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    Matrix m = testutil::random_matrix(s.a, s.b, rng);
    op = [m](Tape&, std::vector<Var>& v) { return ad::hadamard_const(v[0], m); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng))};
  });
}

TEST(Autodiff, Relu) {
  check_op("relu", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::relu(v[0]); };
    return std::vector<Param>{P("a", away_from_zero(s.a, s.b, rng))};
  });
}

TEST(Autodiff, Tanh) {
  check_op("tanh", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::tanh(v[0]); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng))};
  });
}

TEST(Autodiff, ConcatRows) {
  check_op("concat_rows", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::concat_rows(v[0], v[1]); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.c, rng)), P("b", testutil::random_matrix(s.b, s.c, rng))};
  });
}

TEST(Autodiff, GatherRows) {
  check_op("gather_rows", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    std::uniform_int_distribution<Index> pick(-1, s.a - 1);
    std::vector<Index> idx(static_cast<std::size_t>(s.b + 2));
    for (auto& i : idx) i = pick(rng);
    op = [idx](Tape&, std::vector<Var>& v) { return ad::gather_rows(v[0], idx); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.c, rng))};
  });
}

TEST(Autodiff, Spmm) {
  check_op("spmm", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    auto w = random_pattern(s.a, rng, true);
    op = [w](Tape&, std::vector<Var>& v) { return ad::spmm(w, v[0]); };
    return std::vector<Param>{P("x", testutil::random_matrix(s.a, s.b, rng))};
  });
}

TEST(Autodiff, SpmmEdgeAndEdgeScore) {
  check_op("spmm_edge", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    auto pat = random_pattern(s.a, rng, false);
    op = [pat](Tape&, std::vector<Var>& v) {
      Var e = ad::tanh(ad::edge_score(pat, v[1]));
      return ad::spmm_edge(pat, e, v[0]);
    };
    return std::vector<Param>{P("x", testutil::random_matrix(s.a, s.b, rng)), P("s", testutil::random_matrix(s.a, 2, rng))};
  });
}

TEST(Autodiff, RowNormalize) {
  check_op("row_normalize", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::row_normalize(v[0]); };
    return std::vector<Param>{P("a", away_from_zero(s.a, s.b, rng))};
  });
}

TEST(Autodiff, LogSumExpAndSoftmax) {
  check_op("logsumexp", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::logsumexp_rows(v[0]); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng, 2.0))};
  });
  check_op("softmax", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::softmax_rows(v[0]); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng, 2.0))};
  });
}

TEST(Autodiff, DiagSumMean) {
  check_op("diag_sum_mean", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) {
      return ad::concat_rows(ad::diag(v[0]), ad::concat_rows(ad::sum_all(v[0]), ad::mean_all(v[0])));
    };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.a, rng))};
  });
}

TEST(Autodiff, Mse) {
  check_op("mse", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    Matrix target = testutil::random_matrix(s.a, s.b, rng);
    op = [target](Tape&, std::vector<Var>& v) { return ad::mse(v[0], target); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, s.b, rng))};
  });
}

TEST(Autodiff, SoftmaxCrossEntropy) {
  check_op("softmax_ce", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    const Index classes = s.b + 1;
    std::uniform_int_distribution<int> lab(0, static_cast<int>(classes - 1));
    std::vector<int> labels(static_cast<std::size_t>(s.a));
    for (auto& l : labels) l = lab(rng);
    op = [labels](Tape&, std::vector<Var>& v) { return ad::softmax_cross_entropy(v[0], labels); };
    return std::vector<Param>{P("a", testutil::random_matrix(s.a, classes, rng))};
  });
}

TEST(Autodiff, SegmentReduce) {
  for (auto kind : {ad::Reduce::Mean, ad::Reduce::Sum, ad::Reduce::Max}) {
    check_op("segment_reduce", [kind](auto& rng, OpFn& op) {
      auto s = random_shapes(rng);
      std::vector<Index> offsets{0};
      std::uniform_int_distribution<Index> len(1, 3);
      for (Index i = 0; i < s.a; ++i) offsets.push_back(offsets.back() + len(rng));
      op = [offsets, kind](Tape&, std::vector<Var>& v) { return ad::segment_reduce(v[0], offsets, kind); };
      return std::vector<Param>{P("a", testutil::random_matrix(offsets.back(), s.b, rng))};
    });
  }
}

TEST(Autodiff, CosineSimilarity) {
  check_op("cosine", [](auto& rng, OpFn& op) {
    auto s = random_shapes(rng);
    op = [](Tape&, std::vector<Var>& v) { return ad::cosine_similarity(v[0], v[1]); };
    return std::vector<Param>{P("a", away_from_zero(s.a, s.c, rng)), P("b", away_from_zero(s.b, s.c, rng))};
  });
}

TEST(Autodiff, ZeroRowRejectedByNormalize) {
  Tape t;
  Var z = t.constant(Matrix::Zero(2, 3));
  try {
    ad::row_normalize(z);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroEmbedding);
  }
}
