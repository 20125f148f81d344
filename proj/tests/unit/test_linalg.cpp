#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "wallresp/error.hpp"
#include "wallresp/linalg.hpp"

using namespace wallresp;
using namespace wallresp::testing;

namespace {

Dense local_part(const Dense& full, const Layout& l, int rank) {
  const auto rows = l.rows_of(rank);
  const auto cols = l.cols_of(rank);
  Dense out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Index>(i), static_cast<Index>(j)) = full(rows[i], cols[j]);
    }
  }
  return out;
}

Layout make_layout(comm::RankCtx& ctx, int kind, Index m, Index n) {
  switch (kind) {
    case 0: return Layout::block_cyclic(make_desc(m, n, 3, 5, ctx.grid()));
    case 1: return Layout::striped(m, n, true, ctx.size());
    case 2: return Layout::striped(m, n, false, ctx.size());
    default: return Layout::replicated(m, n, ctx.size());
  }
}

Dense assemble_local(comm::RankCtx& ctx, const Layout& l, const Dense& local) {
  return to_replicated(ctx, MatrixRef(l, local)).loc_mat;
}

Dense mat(std::initializer_list<std::initializer_list<double>> rows) {
  Dense d(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) d(i, j++) = v;
    ++i;
  }
  return d;
}

}  // namespace

TEST(Gemm, TwoByTwoExample) {
  const Dense a = mat({{1, 2}, {3, 4}});
  const Dense b = mat({{5, 6}, {7, 8}});
  for (int p : {1, 4}) {
    comm::run(p, [&](comm::RankCtx& ctx) {
      auto da = distribute(ctx, a, 1);
      auto db = distribute(ctx, b, 1);
      auto dc = create_block_cyclic(2, 2, 1, 1, ctx.grid(), 99.0);
      dist_gemm(ctx, 1.0, da, db, 0.0, dc);
      EXPECT_EQ(gather_all(ctx, dc), mat({{19, 22}, {43, 50}}));
    });
  }
}

TEST(Gemm, IdentityOperand) {
  const Dense b = random_matrix(9, 6, 1);
  const Dense c0 = random_matrix(9, 6, 2);
  comm::run(4, [&](comm::RankCtx& ctx) {
    auto c = distribute(ctx, c0, 2);
    dist_gemm(ctx, 2.0, distribute(ctx, Dense::Identity(9, 9), 2), distribute(ctx, b, 4), -0.5, c);
    EXPECT_LE(rel_err(gather_all(ctx, c), Dense(2.0 * b - 0.5 * c0)), 1e-15);
  });
}

TEST(Gemm, AllLayoutCombinations) {
  const Dense a = random_matrix(17, 13, 3);
  const Dense b = random_matrix(13, 11, 4);
  const Dense c0 = random_matrix(17, 11, 5);
  const Dense ref = 0.7 * a * b + 0.3 * c0;
  comm::run(4, [&](comm::RankCtx& ctx) {
    for (int ka = 0; ka < 4; ++ka) {
      for (int kb = 0; kb < 4; ++kb) {
        for (int kc = 0; kc < 4; ++kc) {
          const auto la = make_layout(ctx, ka, 17, 13);
          const auto lb = make_layout(ctx, kb, 13, 11);
          const auto lc = make_layout(ctx, kc, 17, 11);
          const Dense al = local_part(a, la, ctx.rank());
          const Dense bl = local_part(b, lb, ctx.rank());
          Dense cl = local_part(c0, lc, ctx.rank());
          dist_gemm(ctx, 0.7, MatrixRef(la, al), MatrixRef(lb, bl), 0.3, MatrixMut(lc, cl), 4);
          EXPECT_LE(rel_err(assemble_local(ctx, lc, cl), ref), 1e-12) << ka << kb << kc;
        }
      }
    }
  });
}

TEST(Gemm, DimensionMismatchNamesShapes) {
  comm::run(1, [](comm::RankCtx& ctx) {
    auto a = create_block_cyclic(3, 4, 2, 2, ctx.grid());
    auto b = create_block_cyclic(5, 2, 2, 2, ctx.grid());
    auto c = create_block_cyclic(3, 2, 2, 2, ctx.grid());
    try {
      dist_gemm(ctx, 1.0, a, b, 0.0, c);
      FAIL();
    } catch (const DimensionMismatch& e) {
      EXPECT_NE(std::string(e.what()).find("3x4"), std::string::npos);
    }
  });
}

TEST(Transpose, NineByNineAndSymmetric) {
  Dense a(9, 9);
  for (Index i = 0; i < 9; ++i) {
    for (Index j = 0; j < 9; ++j) a(i, j) = 10.0 * (i + 1) + (j + 1);
  }
  const Dense s = random_symmetric(8, 6);
  comm::run(6, [&](comm::RankCtx& ctx) {
    EXPECT_EQ(gather_all(ctx, dist_transpose(ctx, distribute(ctx, a, 2))), Dense(a.transpose()));
    EXPECT_EQ(gather_all(ctx, dist_transpose(ctx, distribute(ctx, s, 3))), s);
    const Dense r = random_matrix(5, 12, 2);
    EXPECT_EQ(gather_all(ctx, dist_transpose(ctx, distribute(ctx, r, 2))), Dense(r.transpose()));
  });
}

TEST(Cholesky, SmallSolve) {
  comm::run(2, [](comm::RankCtx& ctx) {
    auto a = distribute(ctx, mat({{4, 2}, {2, 3}}), 1);
    auto rhs = distribute(ctx, mat({{2}, {1}}), 1);
    auto x = gather_all(ctx, cholesky_solve(ctx, a, rhs));
    EXPECT_NEAR(x(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(x(1, 0), 0.0, 1e-15);
    auto id = cholesky_solve(ctx, distribute(ctx, Dense::Identity(5, 5), 2),
                             distribute(ctx, random_matrix(5, 3, 1), 2));
    EXPECT_EQ(gather_all(ctx, id), random_matrix(5, 3, 1));
  });
}

TEST(Cholesky, FactorMatchesEigen) {
  const Dense a = random_spd(23, 8);
  const Dense l = a.llt().matrixL();
  for (int p : {1, 4, 6}) {
    for (Index nb : {1, 4, 64}) {
      comm::run(p, [&](comm::RankCtx& ctx) {
        auto m = distribute(ctx, a, nb);
        cholesky_factor(ctx, m);
        EXPECT_LE(rel_err(gather_all(ctx, m), l), 1e-13);
      });
    }
  }
}

TEST(Cholesky, NamesFailingPivot) {
  Dense a = Dense::Identity(6, 6);
  a(3, 3) = -1.0;
  comm::run(4, [&](comm::RankCtx& ctx) {
    auto m = distribute(ctx, a, 2);
    try {
      cholesky_factor(ctx, m);
      ADD_FAILURE();
    } catch (const NotPositiveDefinite& e) {
      EXPECT_EQ(e.pivot(), 4);
    }
  });
  Dense d = a;
  EXPECT_EQ(dense::cholesky_lower(d), Index{3});
}

TEST(Triangular, AllVariants) {
  const Dense t = random_matrix(11, 11, 12) + 11.0 * Dense::Identity(11, 11);
  const Dense b = random_matrix(11, 4, 13);
  comm::run(4, [&](comm::RankCtx& ctx) {
    for (auto uplo : {Uplo::Lower, Uplo::Upper}) {
      for (bool trans : {false, true}) {
        for (bool unit : {false, true}) {
          Dense tri = uplo == Uplo::Lower ? Dense(t.triangularView<Eigen::Lower>())
                                          : Dense(t.triangularView<Eigen::Upper>());
          if (unit) tri.diagonal().setOnes();
          const Dense op = trans ? Dense(tri.transpose()) : tri;
          auto x = distribute(ctx, b, 3);
          triangular_solve(ctx, distribute(ctx, t, 3), uplo, trans, unit, x);
          const Dense xs = gather_all(ctx, x);
          EXPECT_LE(rel_err(Dense(op * xs), b), 1e-13);
        }
      }
    }
  });
}

TEST(Lu, InvertExamples) {
  comm::run(2, [](comm::RankCtx& ctx) {
    EXPECT_EQ(gather_all(ctx, invert(ctx, distribute(ctx, Dense::Identity(4, 4), 2))),
              Dense(Dense::Identity(4, 4)));
    const Dense d = gather_all(ctx, invert(ctx, distribute(ctx, mat({{2, 0}, {0, 4}}), 1)));
    EXPECT_EQ(d, mat({{0.5, 0}, {0, 0.25}}));
  });
}

TEST(Lu, RandomInverseResidual) {
  const Dense s = random_matrix(20, 20, 21) + 5.0 * Dense::Identity(20, 20);
  for (int p : {1, 4, 6}) {
    comm::run(p, [&](comm::RankCtx& ctx) {
      const Dense inv = gather_all(ctx, invert(ctx, distribute(ctx, s, 3)));
      EXPECT_LE((s * inv - Dense::Identity(20, 20)).cwiseAbs().maxCoeff(), 1e-10);
    });
  }
}

TEST(Lu, PivotsRows) {
  const Dense s = mat({{0, 1}, {1, 0}});
  comm::run(1, [&](comm::RankCtx& ctx) {
    auto f = lu_factor(ctx, distribute(ctx, s, 1));
    EXPECT_EQ(f.perm, (std::vector<Index>{1, 0}));
    EXPECT_EQ(gather_all(ctx, invert(ctx, distribute(ctx, s, 1))), s);
  });
}

TEST(Lu, SingularNamesPivot) {
  Dense s = random_matrix(6, 6, 3);
  s.col(4) = s.col(1) + s.col(2);
  comm::run(4, [&](comm::RankCtx& ctx) {
    try {
      lu_factor(ctx, distribute(ctx, s, 2));
      ADD_FAILURE();
    } catch (const SingularMatrix& e) {
      EXPECT_EQ(e.pivot(), 5);
    }
  });
}

TEST(Eig, DiagonalPencils) {
  comm::run(1, [](comm::RankCtx& ctx) {
    auto r = generalized_eig(ctx, distribute(ctx, mat({{2, 0}, {0, 3}}), 1),
                             distribute(ctx, Dense::Identity(2, 2), 1));
    EXPECT_NEAR(r.gamma[0], 2.0, 1e-15);
    EXPECT_NEAR(r.gamma[1], 3.0, 1e-15);
    EXPECT_LE(rel_err(canonical_signs(gather_all(ctx, r.s)), Dense(Dense::Identity(2, 2))), 1e-15);
    auto r2 = generalized_eig(ctx, distribute(ctx, mat({{2, 0}, {0, 2}}), 1),
                              distribute(ctx, mat({{1, 0}, {0, 2}}), 1));
    EXPECT_NEAR(r2.gamma[0], 1.0, 1e-15);
    EXPECT_NEAR(r2.gamma[1], 2.0, 1e-15);
  });
}

TEST(Eig, ContractOnRandomPencils) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index n = 5 + static_cast<Index>(seed) * 3;
    const Dense a = random_symmetric(n, seed);
    const Dense b = random_spd(n, seed + 100);
    comm::run(4, [&](comm::RankCtx& ctx) {
      auto r = generalized_eig(ctx, distribute(ctx, a, 4), distribute(ctx, b, 4));
      const Dense s = gather_all(ctx, r.s);
      const Vector g = Eigen::Map<const Vector>(r.gamma.data(), n);
      const double scale = a.norm() + g.cwiseAbs().maxCoeff() * b.norm();
      EXPECT_LE((a * s - b * s * g.asDiagonal()).cwiseAbs().maxCoeff(), 1e-10 * scale);
      EXPECT_LE((s.transpose() * b * s - Dense::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10 * n);
      for (Index k = 1; k < n; ++k) EXPECT_LE(g(k - 1), g(k));
    });
  }
}

TEST(Eig, NonSpdBThrowsOnEveryRank) {
  Dense b = Dense::Identity(4, 4);
  b(2, 2) = -1;
  auto errs = comm::launch(3, [&](comm::RankCtx& ctx) {
    generalized_eig(ctx, distribute(ctx, Dense::Identity(4, 4), 2), distribute(ctx, b, 2));
  });
  for (const auto& e : errs) {
    ASSERT_TRUE(e);
    EXPECT_THROW(std::rethrow_exception(e), NotPositiveDefinite);
  }
}

TEST(RowScale, Examples) {
  comm::run(2, [](comm::RankCtx& ctx) {
    auto a = distribute(ctx, mat({{2}, {9}}), 1);
    const double d[] = {2.0, 3.0};
    row_scale(a, d);
    EXPECT_EQ(gather_all(ctx, a), mat({{1}, {3}}));
    const Dense r = random_matrix(5, 3, 1);
    auto b = distribute(ctx, r, 2);
    const std::vector<double> ones(5, 1.0);
    row_scale(b, ones);
    EXPECT_EQ(gather_all(ctx, b), r);
    std::vector<double> z(5, 1.0);
    z[3] = 0.0;
    try {
      row_scale(b, z);
      ADD_FAILURE();
    } catch (const ZeroDivisor& e) {
      EXPECT_EQ(e.row(), 4);
    }
  });
}
