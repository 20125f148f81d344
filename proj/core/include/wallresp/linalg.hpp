#pragma once

// Distributed dense linear algebra over block-cyclic and striped matrices.
// Every function taking a RankCtx is collective. Errors that depend on
// matrix values (non-positive pivots, singular pivots, zero divisors) are
// detected from data every rank holds, so all ranks throw together.

#include <optional>
#include <span>
#include <vector>

#include "wallresp/comm.hpp"
#include "wallresp/dmat.hpp"
#include "wallresp/types.hpp"

namespace wallresp {

/// C = alpha*A*B + beta*C for any mix of block-cyclic, row-striped,
/// column-striped or replicated operands. Each rank pulls the rows of A and
/// columns of B matching its part of C, one K-panel of width `panel` at a
/// time. C must not alias A or B.
void dist_gemm(comm::RankCtx& ctx, double alpha, const MatrixRef& a, const MatrixRef& b,
               double beta, MatrixMut c, Index panel = kDefaultBlockSize);

/// Result has swapped dimensions and block sizes on the same grid.
BlockCyclicMatrix dist_transpose(comm::RankCtx& ctx, const BlockCyclicMatrix& a);

/// In-place lower Cholesky factor A = L*L^T; the strict upper part is
/// zeroed. Throws NotPositiveDefinite naming the 1-based pivot.
void cholesky_factor(comm::RankCtx& ctx, BlockCyclicMatrix& a);

enum class Uplo { Lower, Upper };

/// Solves op(T) X = B in place, op(T) = T or T^T, using only the `uplo`
/// triangle of T (unit diagonal when `unit_diag`).
void triangular_solve(comm::RankCtx& ctx, const BlockCyclicMatrix& t, Uplo uplo, bool transpose,
                      bool unit_diag, BlockCyclicMatrix& b);

/// X with A X = RHS for symmetric positive definite A.
BlockCyclicMatrix cholesky_solve(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                                 const BlockCyclicMatrix& rhs);

struct LuFactors {
  BlockCyclicMatrix lu;     // unit-lower L below the diagonal, U on and above
  std::vector<Index> perm;  // row i of P*A is row perm[i] of A (0-based)
};

/// LU with partial pivoting. Throws SingularMatrix naming the 1-based pivot
/// when |pivot| <= n * eps * max|A|.
LuFactors lu_factor(comm::RankCtx& ctx, BlockCyclicMatrix a);

BlockCyclicMatrix invert(comm::RankCtx& ctx, const BlockCyclicMatrix& s);

struct EigResult {
  std::vector<double> gamma;  // ascending, replicated on every rank
  BlockCyclicMatrix s;        // B-orthonormal eigenvectors in columns
};

/// All eigenpairs of A x = gamma B x for symmetric A and SPD B. The pencil
/// is gathered to rank 0, reduced to standard form with the Cholesky factor
/// of B, solved there, and the eigenvectors are scattered back with A's
/// descriptor. With ctx.debug_checks() the residual and B-orthonormality
/// bounds are verified on every solve.
EigResult generalized_eig(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                          const BlockCyclicMatrix& b);

/// A(i,k) /= d(i). d is replicated; a zero entry throws ZeroDivisor.
void row_scale(BlockCyclicMatrix& a, std::span<const double> d);

namespace dense {

/// Lower Cholesky in place (upper part zeroed). Returns the 0-based index
/// of the first non-positive pivot, or nullopt on success.
std::optional<Index> cholesky_lower(Dense& a);

struct GeneralizedEig {
  Vector gamma;
  Dense s;
};

/// Sequential solve by Cholesky reduction; throws NotPositiveDefinite.
GeneralizedEig generalized_eig(const Dense& a, const Dense& b);

}  // namespace dense
}  // namespace wallresp
