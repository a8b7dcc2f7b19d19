#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "nstw/nn/checkpoint.hpp"
#include "nstw/nn/gat.hpp"
#include "nstw/nn/layers.hpp"
#include "nstw/nn/params.hpp"
#include "nstw/nn/tape.hpp"
#include "oracles.hpp"

using namespace nstw;
using namespace nstw::nn;

namespace {

using LossFn = std::function<Var(Tape&, ParameterStore&)>;

// Compares tape gradients with central differences on every scalar of every
// parameter (or a strided subset for larger tensors). Returns the worst
// relative error.
double gradient_check(ParameterStore& store, const LossFn& loss, int max_per_param = 40) {
  store.zero_grad();
  {
    Tape t;
    t.backward(loss(t, store));
  }
  double worst = 0.0;
  for (auto& [name, p] : store) {
    const Matrix analytic = p.has_grad ? p.grad : Matrix::Zero(p.value.rows(), p.value.cols());
    const auto n = p.value.size();
    const auto stride = std::max<Eigen::Index>(1, n / max_per_param);
    for (Eigen::Index k = 0; k < n; k += stride) {
      double& x = p.value.data()[k];
      auto f = [&] {
        Tape t;
        return t.value(loss(t, store))(0, 0);
      };
      const double numeric = oracle::central_difference(f, x, 1e-5);
      const double err = oracle::rel_error(analytic.data()[k], numeric);
      worst = std::max(worst, err);
    }
  }
  store.zero_grad();
  return worst;
}

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Random symmetric weights with self-loops; some nodes are left isolated.
Matrix random_graph(int n, std::mt19937_64& rng, double density = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < density) a(i, j) = a(j, i) = 0.2 + 1.5 * u(rng);
  return a;
}

// Dense reference for one attention head.
Matrix dense_attention(const Matrix& z, const RowVector& as, const RowVector& ad, const Matrix& adj, double slope,
                       bool log_weight, Matrix* alpha_out = nullptr) {
  const auto n = z.rows();
  Matrix alpha = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> logits(static_cast<std::size_t>(n), 0.0);
    double mx = -1e300;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (adj(i, j) <= 0.0) continue;
      const double p = as.dot(z.row(i)) + ad.dot(z.row(j));
      double l = p > 0 ? p : slope * p;
      if (log_weight) l += std::log(adj(i, j));
      logits[static_cast<std::size_t>(j)] = l;
      mx = std::max(mx, l);
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (adj(i, j) > 0.0) s += std::exp(logits[static_cast<std::size_t>(j)] - mx);
    for (Eigen::Index j = 0; j < n; ++j)
      if (adj(i, j) > 0.0) alpha(i, j) = std::exp(logits[static_cast<std::size_t>(j)] - mx) / s;
  }
  if (alpha_out) *alpha_out = alpha;
  return alpha * z;
}

Matrix dense_alpha(const AttentionTrace& tr, const Neighborhoods& nb, int head) {
  Matrix a = Matrix::Zero(nb.nodes(), nb.nodes());
  for (int i = 0; i < nb.nodes(); ++i)
    for (int k = nb.offsets[static_cast<std::size_t>(i)]; k < nb.offsets[static_cast<std::size_t>(i) + 1]; ++k)
      a(i, nb.cols[static_cast<std::size_t>(k)]) =
          tr.alpha[static_cast<std::size_t>(head * nb.edges() + k)];
  return a;
}

}  // namespace

// ---- tape basics ----

TEST(Tape, ElementwiseValues) {
  Tape t;
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  auto v = t.constant(x);
  EXPECT_TRUE(t.value(relu(t, v)).isApprox((Matrix(1, 3) << 0, 0, 2).finished()));
  EXPECT_TRUE(t.value(leaky_relu(t, v, 0.2)).isApprox((Matrix(1, 3) << -0.2, 0, 2).finished()));
  EXPECT_NEAR(t.value(elu(t, v))(0, 0), std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(t.value(mse(t, v, Matrix::Zero(1, 3)))(0, 0), 5.0 / 3.0, 1e-15);
}

TEST(Tape, ConstantsSkipBackward) {
  Tape t;
  auto a = t.constant(Matrix::Ones(2, 2));
  auto l = sum(t, square(t, a));
  EXPECT_FALSE(t.needs_grad(l));
  EXPECT_NO_THROW(t.backward(l));
}

TEST(Tape, LossMustBeScalarAndFinite) {
  ParameterStore s;
  s.add("w", Matrix::Ones(2, 2));
  Tape t;
  auto w = t.param(s.at("w"));
  EXPECT_THROW(t.backward(w), StructureError);
  auto bad = scale(t, sum(t, w), std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(t.backward(bad), NumericError);
}

TEST(Tape, SharedParameterAccumulates) {
  ParameterStore s;
  s.add("w", Matrix::Constant(1, 1, 3.0));
  Tape t;
  auto w1 = t.param(s.at("w"));
  auto w2 = t.param(s.at("w"));
  t.backward(sum(t, hadamard(t, w1, w2)));
  EXPECT_DOUBLE_EQ(s.at("w").grad(0, 0), 6.0);
}

// ---- gradient suites ----

TEST(Gradients, StructuralOps) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    ParameterStore s;
    s.add("a", random_matrix(5, 3, rng));
    s.add("b", random_matrix(5, 2, rng));
    s.add("c", random_matrix(1, 5, rng));
    const std::vector<int> rows{4, 0, 0, 2};
    const std::vector<int> seg{0, 1, 1, 2, 0};
    auto loss = [&](Tape& t, ParameterStore& st) {
      auto a = t.param(st.at("a"));
      auto b = t.param(st.at("b"));
      auto cat = concat_cols(t, a, b);
      auto g = gather_rows(t, cat, rows);
      auto r = segment_reduce(t, tanh(t, cat), seg, 3, trial % 2 == 0);
      auto lin = add_row(t, cat, t.param(st.at("c")));
      return add(t, add(t, mean(t, square(t, g)), sum(t, elu(t, r))), mse(t, lin, Matrix::Ones(5, 5)));
    };
    EXPECT_LT(gradient_check(s, loss), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, DenseLayers) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    ParameterStore s;
    MlpSpec spec{{4, 6, 5, 2}, trial % 2 ? Activation::Tanh : Activation::LeakyRelu, Activation::Tanh, 4.5};
    init_mlp(s, "net", spec, rng);
    s.add("x", random_matrix(3, 4, rng));
    const Matrix target = random_matrix(3, 2, rng);
    auto loss = [&](Tape& t, ParameterStore& st) {
      return mse(t, mlp(t, st, "net", spec, t.param(st.at("x"))), target);
    };
    EXPECT_LT(gradient_check(s, loss), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, AttentionLayer) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 5;
    const Matrix adj = random_graph(n, rng, 0.5);
    const auto nb = Neighborhoods::from_dense(adj);
    GatSpec spec;
    spec.in = 3;
    spec.heads = 1 + trial % 3;
    spec.head_width = 2 + trial % 2;
    spec.final_layer = trial % 2 == 1;
    spec.activation = spec.final_layer ? Activation::Tanh : Activation::Elu;
    const auto injection = trial % 4 < 2 ? EdgeInjection::LogWeight : EdgeInjection::MaskOnly;
    ParameterStore s;
    init_gat(s, "gat", spec, rng);
    s.add("x", random_matrix(n, 3, rng));
    const Matrix target = random_matrix(n, spec.out_width(), rng);
    auto loss = [&](Tape& t, ParameterStore& st) {
      return mse(t, gat_layer(t, st, "gat", spec, t.param(st.at("x")), nb, injection), target);
    };
    EXPECT_LT(gradient_check(s, loss), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, StackedAttentionIntoMlp) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + trial % 3;
    const auto nb = Neighborhoods::from_dense(random_graph(n, rng, 0.6));
    GatSpec g1{3, 2, 3, 0.2, false, Activation::Elu};
    GatSpec g2{g1.out_width(), 2, 2, 0.2, true, Activation::Tanh};
    MlpSpec head{{g2.out_width() + 1, 4, 1}, Activation::Relu, Activation::Identity, 1.0};
    ParameterStore s;
    init_gat(s, "g1", g1, rng);
    init_gat(s, "g2", g2, rng);
    init_mlp(s, "q", head, rng);
    const Matrix x = random_matrix(n, 3, rng);
    s.add("act", random_matrix(n, 1, rng));
    const Matrix y = random_matrix(n, 1, rng);
    auto loss = [&](Tape& t, ParameterStore& st) {
      auto h = gat_layer(t, st, "g1", g1, t.constant(x), nb, EdgeInjection::LogWeight);
      h = gat_layer(t, st, "g2", g2, h, nb, EdgeInjection::LogWeight);
      auto q = mlp(t, st, "q", head, concat_cols(t, h, t.param(st.at("act"))));
      return mse(t, q, y);
    };
    EXPECT_LT(gradient_check(s, loss), 1e-4) << "trial " << trial;
  }
}

// ---- attention behaviour ----

TEST(Attention, RowsNormalizedAndMasked) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 12;
    Matrix adj = random_graph(n, rng, trial % 3 == 0 ? 0.0 : 0.35);
    const auto nb = Neighborhoods::from_dense(adj);
    const int heads = 1 + trial % 4;
    Tape t;
    AttentionTrace tr;
    graph_attention(t, t.constant(random_matrix(n, heads * 3, rng)), t.constant(random_matrix(heads, 3, rng, 3.0)),
                    t.constant(random_matrix(heads, 3, rng, 3.0)), nb, heads, 0.2, false,
                    trial % 2 ? EdgeInjection::MaskOnly : EdgeInjection::LogWeight, &tr);
    for (int h = 0; h < heads; ++h) {
      const Matrix a = dense_alpha(tr, nb, h);
      for (int i = 0; i < n; ++i) ASSERT_NEAR(a.row(i).sum(), 1.0, 1e-9);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (adj(i, j) == 0.0) {
            ASSERT_EQ(a(i, j), 0.0);
          }
    }
  }
}

TEST(Attention, SingleNeighborAndEqualNeighbors) {
  Matrix adj = Matrix::Identity(3, 3);
  adj(1, 2) = adj(2, 1) = 1.0;
  const auto nb = Neighborhoods::from_dense(adj);
  Matrix z(3, 2);
  z << 1, 2, 5, 5, 5, 5;  // nodes 1 and 2 identical
  Tape t;
  AttentionTrace tr;
  graph_attention(t, t.constant(z), t.constant(Matrix::Constant(1, 2, 0.3)), t.constant(Matrix::Constant(1, 2, -0.7)),
                  nb, 1, 0.2, false, EdgeInjection::LogWeight, &tr);
  const Matrix a = dense_alpha(tr, nb, 0);
  EXPECT_DOUBLE_EQ(a(0, 0), 1.0);
  EXPECT_NEAR(a(1, 1), 0.5, 1e-15);
  EXPECT_NEAR(a(1, 2), 0.5, 1e-15);
}

TEST(Attention, MatchesDenseOracle) {
  // Small hand-sized case, then randomized ones.
  Matrix adj(3, 3);
  adj << 1, 2, 0, 2, 1, 0.5, 0, 0.5, 1;
  Matrix z(3, 2);
  z << 1, 0, 0, 1, -1, 2;
  RowVector as(2), ad(2);
  as << 0.5, -1;
  ad << 1, 0.25;
  for (bool lw : {true, false}) {
    Tape t;
    const auto out = t.value(graph_attention(t, t.constant(z), t.constant(Matrix(as)), t.constant(Matrix(ad)),
                                             Neighborhoods::from_dense(adj), 1, 0.2, false,
                                             lw ? EdgeInjection::LogWeight : EdgeInjection::MaskOnly));
    EXPECT_TRUE(out.isApprox(dense_attention(z, as, ad, adj, 0.2, lw), 1e-14));
  }
  // Node 0 by hand, log-weight: pre = [0.5 + 1, 0.5 + 0.25] -> logits [1.5, 0.75 + ln 2].
  const double e0 = std::exp(1.5), e1 = std::exp(0.75) * 2.0;
  const double a01 = e1 / (e0 + e1);
  Tape t;
  const auto out = t.value(graph_attention(t, t.constant(z), t.constant(Matrix(as)), t.constant(Matrix(ad)),
                                           Neighborhoods::from_dense(adj), 1, 0.2, false));
  EXPECT_NEAR(out(0, 0), 1.0 - a01, 1e-14);
  EXPECT_NEAR(out(0, 1), a01, 1e-14);

  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 7;
    const int heads = 1 + trial % 3;
    const Matrix a = random_graph(n, rng);
    const Matrix zz = random_matrix(n, heads * 2, rng);
    const Matrix As = random_matrix(heads, 2, rng), Ad = random_matrix(heads, 2, rng);
    Tape tt;
    const Matrix got = tt.value(graph_attention(tt, tt.constant(zz), tt.constant(As), tt.constant(Ad),
                                                Neighborhoods::from_dense(a), heads, 0.2, true));
    Matrix want = Matrix::Zero(n, 2);
    for (int h = 0; h < heads; ++h)
      want += dense_attention(zz.middleCols(h * 2, 2), As.row(h), Ad.row(h), a, 0.2, true) / heads;
    EXPECT_TRUE(got.isApprox(want, 1e-12));
  }
}

TEST(Attention, PermutationEquivariant) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 6;
    const Matrix a = random_graph(n, rng);
    const Matrix z = random_matrix(n, 4, rng);
    const Matrix As = random_matrix(2, 2, rng), Ad = random_matrix(2, 2, rng);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix pa(n, n), pz(n, 4);
    for (int i = 0; i < n; ++i) {
      pz.row(i) = z.row(perm[static_cast<std::size_t>(i)]);
      for (int j = 0; j < n; ++j) pa(i, j) = a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    Tape t;
    const Matrix out = t.value(graph_attention(t, t.constant(z), t.constant(As), t.constant(Ad),
                                               Neighborhoods::from_dense(a), 2, 0.2, false));
    const Matrix pout = t.value(graph_attention(t, t.constant(pz), t.constant(As), t.constant(Ad),
                                                Neighborhoods::from_dense(pa), 2, 0.2, false));
    for (int i = 0; i < n; ++i) EXPECT_TRUE(pout.row(i).isApprox(out.row(perm[static_cast<std::size_t>(i)]), 1e-12));
  }
}

TEST(Attention, BlockBatchingMatchesSeparateGraphs) {
  std::mt19937_64 rng(34);
  const Matrix a1 = random_graph(4, rng), a2 = random_graph(3, rng);
  const Matrix z1 = random_matrix(4, 2, rng), z2 = random_matrix(3, 2, rng);
  const Matrix As = random_matrix(1, 2, rng), Ad = random_matrix(1, 2, rng);
  auto nb = Neighborhoods::from_dense(a1);
  nb.append_block(Neighborhoods::from_dense(a2));
  Matrix z(7, 2);
  z << z1, z2;
  Tape t;
  const Matrix both = t.value(graph_attention(t, t.constant(z), t.constant(As), t.constant(Ad), nb, 1, 0.2, false));
  EXPECT_TRUE(both.topRows(4).isApprox(dense_attention(z1, As.row(0), Ad.row(0), a1, 0.2, true), 1e-12));
  EXPECT_TRUE(both.bottomRows(3).isApprox(dense_attention(z2, As.row(0), Ad.row(0), a2, 0.2, true), 1e-12));
}

TEST(Attention, SparseAndDenseNeighborhoodsAgree) {
  std::mt19937_64 rng(35);
  const Matrix a = random_graph(6, rng);
  Eigen::SparseMatrix<double, Eigen::RowMajor> sp = a.sparseView();
  const auto d = Neighborhoods::from_dense(a);
  const auto s = Neighborhoods::from_sparse(sp);
  EXPECT_EQ(d.offsets, s.offsets);
  EXPECT_EQ(d.cols, s.cols);
  EXPECT_EQ(d.weights, s.weights);
  for (double w : d.binary().weights) EXPECT_EQ(w, 1.0);
}

TEST(Attention, Errors) {
  Tape t;
  const auto z = t.constant(Matrix::Ones(2, 4));
  const auto a = t.constant(Matrix::Ones(2, 2));
  EXPECT_THROW(graph_attention(t, z, a, a, Neighborhoods::from_dense(Matrix::Identity(3, 3)), 2, 0.2, false),
               StructureError);
  EXPECT_THROW(graph_attention(t, z, a, a, Neighborhoods::from_dense(Matrix::Zero(2, 2)), 2, 0.2, false),
               DomainError);
  EXPECT_THROW(graph_attention(t, z, a, a, Neighborhoods::from_dense(Matrix::Identity(2, 2)), 3, 0.2, false),
               StructureError);
  Matrix neg = Matrix::Identity(2, 2);
  neg(0, 1) = -1.0;
  EXPECT_THROW(Neighborhoods::from_dense(neg), DomainError);
}

// ---- parameter updates ----

TEST(Updates, GradientDescentStep) {
  ParameterStore s;
  s.add("p", Matrix::Constant(1, 1, 1.0));
  s.add("untouched", Matrix::Constant(1, 1, 1.0));
  s.at("p").accumulate(Matrix::Constant(1, 1, 2.0));
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  apply_update(s, cfg);
  EXPECT_NEAR(s.at("p").value(0, 0), 0.8, 1e-15);
  EXPECT_EQ(s.at("untouched").value(0, 0), 1.0);
  EXPECT_FALSE(s.at("p").has_grad);
}

TEST(Updates, PrefixRestrictsUpdate) {
  ParameterStore s;
  s.add("actor/w", Matrix::Constant(1, 1, 1.0));
  s.add("critic/w", Matrix::Constant(1, 1, 1.0));
  s.at("actor/w").accumulate(Matrix::Constant(1, 1, 1.0));
  s.at("critic/w").accumulate(Matrix::Constant(1, 1, 1.0));
  apply_update(s, {UpdateRule::GradientDescent, 0.5}, "critic/");
  EXPECT_EQ(s.at("actor/w").value(0, 0), 1.0);
  EXPECT_EQ(s.at("critic/w").value(0, 0), 0.5);
  EXPECT_TRUE(s.at("actor/w").has_grad);
}

TEST(Updates, AdamFirstStepMovesByLr) {
  ParameterStore s;
  s.add("p", Matrix::Constant(1, 2, 1.0));
  Matrix g(1, 2);
  g << 3.0, -0.01;
  s.at("p").accumulate(g);
  OptimizerConfig cfg;
  cfg.rule = UpdateRule::Adam;
  cfg.lr = 0.01;
  apply_update(s, cfg);
  EXPECT_NEAR(s.at("p").value(0, 0), 0.99, 1e-8);
  EXPECT_NEAR(s.at("p").value(0, 1), 1.01, 1e-6);
}

TEST(Updates, NonFiniteGradientRejected) {
  ParameterStore s;
  s.add("p", Matrix::Constant(1, 1, 1.0));
  s.at("p").accumulate(Matrix::Constant(1, 1, std::numeric_limits<double>::infinity()));
  EXPECT_THROW(apply_update(s, {}), NumericError);
}

TEST(SoftUpdate, EndpointsAndGeometricApproach) {
  ParameterStore online, target;
  online.add("w", Matrix::Constant(2, 2, 1.0));
  target.add("w", Matrix::Zero(2, 2));
  auto t0 = clone_values(target);
  soft_update(t0, online, 0.0);
  EXPECT_EQ(t0.at("w").value, Matrix::Zero(2, 2));
  auto t1 = clone_values(target);
  soft_update(t1, online, 1.0);
  EXPECT_EQ(t1.at("w").value, online.at("w").value);
  for (int k = 1; k <= 50; ++k) {
    soft_update(target, online, 0.075);
    const double expect = 1.0 - std::pow(0.925, k);
    ASSERT_NEAR(target.at("w").value(0, 0), expect, 1e-12 * std::max(1.0, expect));
  }
  EXPECT_THROW(soft_update(target, online, 1.5), DomainError);
}

TEST(SoftUpdate, ContractsDistance) {
  std::mt19937_64 rng(41);
  ParameterStore a, b;
  a.add("x", random_matrix(3, 3, rng));
  b.add("x", random_matrix(3, 3, rng));
  double prev = squared_distance(a, b);
  for (int k = 0; k < 20; ++k) {
    soft_update(b, a, 0.1);
    const double d = squared_distance(a, b);
    EXPECT_LT(d, prev);
    prev = d;
  }
}

// ---- layers ----

TEST(Layers, MlpForwardByHand) {
  ParameterStore s;
  MlpSpec spec{{2, 2, 1}, Activation::Relu, Activation::Tanh, 4.5};
  Matrix w0(2, 2), b0(1, 2), w1(2, 1), b1(1, 1);
  w0 << 1, -1, 2, 0.5;
  b0 << 0.1, -3;
  w1 << 0.5, 2;
  b1 << -0.2;
  s.add("m/l0/W", w0);
  s.add("m/l0/b", b0);
  s.add("m/l1/W", w1);
  s.add("m/l1/b", b1);
  Matrix x(1, 2);
  x << 1, 1;
  // hidden = relu([3.1, -3.5]) = [3.1, 0]; out = 4.5 tanh(1.55 - 0.2)
  EXPECT_NEAR(mlp_forward(s, "m", spec, x)(0, 0), 4.5 * std::tanh(1.35), 1e-14);
  EXPECT_THROW(mlp_forward(s, "m", spec, Matrix::Ones(1, 3)), StructureError);
}

TEST(Layers, InitShapes) {
  std::mt19937_64 rng(1);
  ParameterStore s;
  GatSpec g{6, 3, 5};
  init_gat(s, "enc", g, rng);
  EXPECT_EQ(s.at("enc/W").value.rows(), 6);
  EXPECT_EQ(s.at("enc/W").value.cols(), 15);
  EXPECT_EQ(s.at("enc/a_src").value.rows(), 3);
  EXPECT_EQ(g.out_width(), 15);
  g.final_layer = true;
  EXPECT_EQ(g.out_width(), 5);
  const double bound = 1.0 / std::sqrt(6.0);
  EXPECT_LE(s.at("enc/W").value.cwiseAbs().maxCoeff(), bound);
  EXPECT_THROW(init_dense(s, "enc", 1, 1, rng), StructureError);  // enc/W already present
}

// ---- checkpoints ----

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nstw_nn_test_" + name)).string();
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  std::mt19937_64 rng(51);
  ParameterStore a, b;
  init_mlp(a, "actor", {{4, 8, 1}}, rng);
  init_gat(b, "enc", {6, 2, 4}, rng);
  CheckpointMeta meta{"abc123", {{"norm.speed", 40.0}, {"step", 500.0}}};
  const auto path = temp_path("roundtrip.bin");
  save_checkpoint(path, meta, {{"actor", &a}, {"encoder", &b}});
  ParameterStore a2, b2;
  std::mt19937_64 other(99);
  init_mlp(a2, "actor", {{4, 8, 1}}, other);
  init_gat(b2, "enc", {6, 2, 4}, other);
  const auto got = load_checkpoint(path, {{"actor", &a2}, {"encoder", &b2}});
  EXPECT_EQ(got.config_hash, "abc123");
  EXPECT_EQ(got.values.at("norm.speed"), 40.0);
  EXPECT_EQ(squared_distance(a, a2), 0.0);
  EXPECT_EQ(squared_distance(b, b2), 0.0);
  std::filesystem::remove(path);
}

TEST(Checkpoint, ShapeMismatchRejectedBeforeWrite) {
  std::mt19937_64 rng(52);
  ParameterStore a;
  init_mlp(a, "actor", {{4, 8, 1}}, rng);
  const auto path = temp_path("shape.bin");
  save_checkpoint(path, {}, {{"actor", &a}});
  ParameterStore wrong;
  init_mlp(wrong, "actor", {{4, 16, 1}}, rng);
  const auto before = clone_values(wrong);
  try {
    load_checkpoint(path, {{"actor", &wrong}});
    FAIL() << "expected shape mismatch";
  } catch (const StructureError& e) {
    EXPECT_NE(std::string(e.what()).find("expected"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("found"), std::string::npos);
  }
  EXPECT_EQ(squared_distance(before, wrong), 0.0);
  ParameterStore missing;
  EXPECT_THROW(load_checkpoint(path, {{"critic", &missing}}), StructureError);
  EXPECT_THROW(load_checkpoint(temp_path("does_not_exist.bin"), {{"actor", &a}}), StructureError);
  std::filesystem::remove(path);
}
