#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "wallresp/assemble.hpp"
#include "wallresp/error.hpp"
#include "wallresp/linalg.hpp"

using namespace wallresp;
using namespace wallresp::testing;

namespace {

BlockCyclicMatrix assemble(comm::RankCtx& ctx, const TriMesh& a, const TriMesh& b,
                           const PairKernel& k, bool edge, Index nb = 3,
                           AssemblyStats* stats = nullptr) {
  auto out = create_block_cyclic(a.npot, b.npot, nb, nb, ctx.grid());
  auto st = assemble_pairwise(a, b, k, edge, out);
  if (stats) *stats = st;
  return out;
}

// Points a single-vertex "mesh" at angle theta (degenerate triangle).
TriMesh point_mesh(double theta) {
  return make_mesh({Vec3(std::cos(theta), 0, std::sin(theta))}, {{0, 0, 0}}, {theta}, {0.0});
}

}  // namespace

TEST(Mesh, TorusCounts) {
  auto m1 = generate_torus_mesh(1, 1, 3, 1);
  EXPECT_EQ(m1.ntri(), 2);
  auto m = generate_torus_mesh(8, 4, 3, 1);
  EXPECT_EQ(m.ntri(), 64);
  EXPECT_EQ(m.npot, 32);
  EXPECT_EQ(generate_torus_mesh(500, 500, 3, 1).ntri(), 500000);
  EXPECT_THROW(generate_torus_mesh(0, 4, 3, 1), std::invalid_argument);
  EXPECT_THROW(generate_torus_mesh(4, 4, 1, 2), std::invalid_argument);
}

TEST(Mesh, EdgesCloseAndAreaPositive) {
  auto m = generate_torus_mesh(6, 5, 3, 1);
  for (Index i = 0; i < m.ntri(); ++i) {
    const auto& e = m.edge[static_cast<std::size_t>(i)];
    EXPECT_LT((e[0] + e[1] + e[2]).norm(), 1e-14);
    EXPECT_GT(m.area[static_cast<std::size_t>(i)], 0.0);
  }
}

TEST(Mesh, JitterAndWriteAreDeterministic) {
  auto base = generate_torus_mesh(4, 4, 3, 1);
  std::ostringstream a, b, c;
  write_mesh(a, jitter_mesh(base, 0.01, 5));
  write_mesh(b, jitter_mesh(base, 0.01, 5));
  write_mesh(c, jitter_mesh(base, 0.01, 6));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Kernel, SurrogateValues) {
  auto m = generate_torus_mesh(4, 4, 3, 1);
  EXPECT_DOUBLE_EQ(induct_kernel_surrogate(m, 3, m, 3, 0.25), 4.0);
  auto p = make_mesh({Vec3(0, 0, 0), Vec3(3, 4, 0)}, {{0, 0, 0}, {1, 1, 1}});
  EXPECT_NEAR(induct_kernel_surrogate(p, 0, p, 1, 1e-12), 0.2, 1e-15);
  const double d = (m.centroid[0] - m.centroid[5]).norm();
  EXPECT_NEAR(induct_kernel_surrogate(m, 0, m, 5, 1e-9), 1.0 / d, 1e-12);
  EXPECT_THROW(surrogate_kernel(0.0), std::invalid_argument);
}

TEST(Assemble, MatchesDensePairwiseOracle) {
  const auto k = surrogate_kernel(0.1);
  for (auto [nu, nv] : {std::pair<Index, Index>{1, 1}, {2, 2}, {4, 4}, {8, 4}}) {
    auto a = generate_torus_mesh(nu, nv, 3, 1.2);
    auto b = jitter_mesh(generate_torus_mesh(nu, nv + 1, 3, 0.8), 0.02, 9);
    for (bool edge : {true, false}) {
      const Dense ref = dense_pairwise(a, b, k, edge);
      comm::run(4, [&](comm::RankCtx& ctx) {
        EXPECT_LE(rel_err(gather_all(ctx, assemble(ctx, a, b, k, edge)), ref), 1e-13);
      });
    }
  }
}

TEST(Assemble, AsymmetricKernelUsesBothOrders) {
  // k depends on the order of its arguments; the assembled form averages
  // k(A,i,B,i1) and k(B,i1,A,i).
  PairKernel k{[](const TriMesh& a, Index i, const TriMesh& b, Index i1) {
                 return a.centroid[static_cast<std::size_t>(i)].x() +
                        2.0 * b.centroid[static_cast<std::size_t>(i1)].y();
               },
               false};
  auto a = generate_torus_mesh(3, 2, 3, 1);
  auto b = generate_torus_mesh(2, 3, 3, 0.5);
  const Dense ref = dense_pairwise(a, b, k, true);
  comm::run(2, [&](comm::RankCtx& ctx) {
    EXPECT_LE(rel_err(gather_all(ctx, assemble(ctx, a, b, k, true)), ref), 1e-13);
  });
}

TEST(Assemble, SymmetricWhenMeshesEqual) {
  auto m = jitter_mesh(generate_torus_mesh(5, 4, 3, 1), 0.05, 1);
  comm::run(3, [&](comm::RankCtx& ctx) {
    const Dense a = gather_all(ctx, assemble(ctx, m, m, surrogate_kernel(0.1), true));
    EXPECT_LE(rel_err(a.transpose(), a), 1e-13);
  });
}

TEST(Assemble, RankAndBlockInvariance) {
  auto m = generate_torus_mesh(6, 6, 3, 1);
  const auto k = surrogate_kernel(0.1);
  const Dense one = comm::run(1, [&](comm::RankCtx& ctx) {
                      return gather_all(ctx, assemble(ctx, m, m, k, true, 64));
                    })[0];
  for (int p : {2, 4, 6}) {
    comm::run(p, [&](comm::RankCtx& ctx) {
      EXPECT_LE(rel_err(gather_all(ctx, assemble(ctx, m, m, k, true, 2)), one), 1e-10);
    });
  }
}

TEST(Assemble, KernelWorkIsSplitAcrossRanks) {
  auto m = generate_torus_mesh(8, 8, 3, 1);
  const auto k = surrogate_kernel(0.1);
  const auto n = static_cast<std::uint64_t>(m.ntri());
  auto stats = comm::run(4, [&](comm::RankCtx& ctx) {
    AssemblyStats st;
    assemble(ctx, m, m, k, true, 4, &st);
    return st;
  });
  std::uint64_t total = 0;
  for (const auto& s : stats) {
    EXPECT_EQ(s.kernel_evals, 2 * s.pairs_visited);
    EXPECT_LT(s.pairs_visited, n * n);
    total += s.pairs_visited;
  }
  EXPECT_GE(total, n * n);
}

TEST(Assemble, DimensionMismatchThrows) {
  auto m = generate_torus_mesh(2, 2, 3, 1);
  auto out = create_block_cyclic(3, 4, 2, 2, ProcessGrid{});
  EXPECT_THROW(assemble_pairwise(m, m, surrogate_kernel(0.1), true, out), DimensionMismatch);
}

TEST(Harmonic, SinglePointCosSin) {
  const double th = 0.7;
  auto out = create_block_cyclic(1, 2, 2, 2, ProcessGrid{});
  assemble_harmonic(point_mesh(th), 1, 1, out);
  EXPECT_NEAR(out.local()(0, 0), std::cos(th), 1e-15);
  EXPECT_NEAR(out.local()(0, 1), std::sin(th), 1e-15);
  EXPECT_EQ(harmonic_column(0, 11, 11) + 2, 22);
}

TEST(Harmonic, ColumnsNearOrthogonalOnUniformMesh) {
  auto m = generate_torus_mesh(16, 1, 3, 1);
  const Index nh = 3;
  auto out = create_block_cyclic(m.npot, 2 * nh, 4, 4, ProcessGrid{});
  assemble_harmonic(m, nh, 1, out);
  const Dense g = out.local().transpose() * out.local();
  for (Index i = 0; i < g.rows(); ++i) {
    for (Index j = 0; j < g.cols(); ++j) {
      if (i != j) EXPECT_LT(std::abs(g(i, j)), 1e-12 * g(i, i));
    }
  }
}

TEST(Resistance, SingleTriangleMassMatrix) {
  // right triangle with legs sqrt2: area 1
  const double s = std::sqrt(2.0);
  auto m = make_mesh({Vec3(0, 0, 0), Vec3(s, 0, 0), Vec3(0, s, 0)}, {{0, 1, 2}});
  ASSERT_NEAR(m.area[0], 1.0, 1e-15);
  comm::run(1, [&](comm::RankCtx& ctx) {
    auto b = create_block_cyclic(3, 3, 2, 2, ctx.grid());
    const double eta[] = {1.0};
    assemble_resistance(ctx, m, eta, b);
    for (Index i = 0; i < 3; ++i) {
      for (Index j = 0; j < 3; ++j) EXPECT_NEAR(b.local()(i, j), i == j ? 1.0 / 6 : 1.0 / 12, 1e-15);
    }
  });
}

TEST(Resistance, LinearInEtaAndSpd) {
  auto m = generate_torus_mesh(4, 4, 3, 1);
  comm::run(4, [&](comm::RankCtx& ctx) {
    std::vector<double> eta(static_cast<std::size_t>(m.ntri()), 1.0);
    auto b1 = create_block_cyclic(m.npot, m.npot, 3, 3, ctx.grid());
    assemble_resistance(ctx, m, eta, b1);
    for (auto& e : eta) e = 2.5;
    auto b2 = create_block_cyclic(m.npot, m.npot, 3, 3, ctx.grid());
    assemble_resistance(ctx, m, eta, b2);
    EXPECT_LE(rel_err(gather_all(ctx, b2), 2.5 * gather_all(ctx, b1)), 1e-15);
    auto l = b1;
    EXPECT_NO_THROW(cholesky_factor(ctx, l));
  });
}

TEST(Resistance, RejectsNonSpd) {
  auto m = generate_torus_mesh(2, 2, 3, 1);
  comm::run(1, [&](comm::RankCtx& ctx) {
    std::vector<double> eta(static_cast<std::size_t>(m.ntri()), -1.0);
    auto b = create_block_cyclic(m.npot, m.npot, 2, 2, ctx.grid());
    EXPECT_THROW(assemble_resistance(ctx, m, eta, b), std::invalid_argument);
  });
  // vertex 3 only touches a zero-area triangle, so its row is empty
  auto d = make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(5, 5, 5)},
                     {{0, 1, 2}, {3, 3, 3}});
  comm::run(1, [&](comm::RankCtx& ctx) {
    const double eta[] = {1.0, 1.0};
    auto b = create_block_cyclic(4, 4, 2, 2, ctx.grid());
    EXPECT_THROW(assemble_resistance(ctx, d, eta, b), NotPositiveDefinite);
  });
}

TEST(Ridge, AddsScaledTrace) {
  const Dense a = random_spd(7, 4);
  comm::run(4, [&](comm::RankCtx& ctx) {
    auto m = distribute(ctx, a, 2);
    const double mu = add_ridge(ctx, m, 1e-3);
    EXPECT_NEAR(mu, 1e-3 * a.trace() / 7, 1e-15 * a.trace());
    Dense expect = a;
    expect.diagonal().array() += mu;
    EXPECT_LE(rel_err(gather_all(ctx, m), expect), 1e-15);
  });
}
