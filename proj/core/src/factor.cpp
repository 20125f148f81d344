#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wallresp/error.hpp"
#include "wallresp/linalg.hpp"

namespace wallresp {

namespace {

std::vector<Index> iota(Index begin, Index end) {
  std::vector<Index> v;
  for (Index k = begin; k < end; ++k) v.push_back(k);
  return v;
}

// Position of the first entry >= g in an ascending index list.
Index first_at_least(const std::vector<Index>& v, Index g) {
  return static_cast<Index>(std::lower_bound(v.begin(), v.end(), g) - v.begin());
}

std::vector<Index> slice(const std::vector<Index>& v, Index from, Index to) {
  return {v.begin() + from, v.begin() + to};
}

void require_square(const BlockCyclicMatrix& a, const char* who) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(std::string(who) + ": matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected square");
  }
}

}  // namespace

namespace dense {

std::optional<Index> cholesky_lower(Dense& a) {
  const Index n = a.rows();
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Index k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) return j;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
  }
  a.triangularView<Eigen::StrictlyUpper>().setZero();
  return std::nullopt;
}

}  // namespace dense

void cholesky_factor(comm::RankCtx& ctx, BlockCyclicMatrix& a) {
  require_square(a, "cholesky_factor");
  const Index n = a.rows();
  const Index w = a.desc().nb;
  const Layout lay = a.layout();
  const auto rows = lay.rows_of(ctx.rank());
  const auto cols = lay.cols_of(ctx.rank());
  Dense& loc = a.local();

  for (Index kb = 0; kb < n; kb += w) {
    const Index ke = std::min(kb + w, n);
    const Index wk = ke - kb;
    const auto panel = iota(kb, ke);

    Dense d = fetch(ctx, a, panel, panel);
    if (auto bad = dense::cholesky_lower(d)) {
      const Index pivot = kb + *bad + 1;
      throw NotPositiveDefinite("cholesky: leading minor of order " + std::to_string(pivot) +
                                    " is not positive definite",
                                pivot);
    }

    const Index r_panel = first_at_least(rows, kb);
    const Index r_tail = first_at_least(rows, ke);
    const Index c_panel = first_at_least(cols, kb);
    const Index c_tail = first_at_least(cols, ke);
    const bool owns_panel_cols = c_tail - c_panel == wk;

    if (owns_panel_cols) {
      for (Index li = r_panel; li < r_tail; ++li) {
        loc.block(li, c_panel, 1, wk) = d.row(rows[static_cast<std::size_t>(li)] - kb);
      }
      auto tail = loc.block(r_tail, c_panel, loc.rows() - r_tail, wk);
      d.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(tail);
    }

    const auto tail_rows = slice(rows, r_tail, static_cast<Index>(rows.size()));
    const auto tail_cols = slice(cols, c_tail, static_cast<Index>(cols.size()));
    Dense lr = fetch(ctx, a, tail_rows, panel);
    Dense lc = fetch(ctx, a, tail_cols, panel);
    if (!tail_rows.empty() && !tail_cols.empty()) {
      loc.block(r_tail, c_tail, lr.rows(), lc.rows()).noalias() -= lr * lc.transpose();
    }
  }

  a.for_each_owned([](Index i, Index j, double& v) {
    if (j > i) v = 0.0;
  });
}

void triangular_solve(comm::RankCtx& ctx, const BlockCyclicMatrix& t, Uplo uplo, bool transpose,
                      bool unit_diag, BlockCyclicMatrix& b) {
  require_square(t, "triangular_solve");
  if (b.rows() != t.rows()) {
    throw DimensionMismatch("triangular_solve: T is " + std::to_string(t.rows()) + "x" +
                            std::to_string(t.cols()) + ", B is " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
  }
  const Index n = t.rows();
  const Index w = b.desc().mb;
  const bool lower = (uplo == Uplo::Lower) != transpose;
  const Layout blay = b.layout();
  const auto rows = blay.rows_of(ctx.rank());
  const auto cols = blay.cols_of(ctx.rank());
  Dense& loc = b.local();

  auto op_fetch = [&](std::span<const Index> r, std::span<const Index> c) -> Dense {
    if (transpose) return fetch(ctx, t, c, r).transpose();
    return fetch(ctx, t, r, c);
  };

  auto step = [&](Index kb) {
    const Index ke = std::min(kb + w, n);
    const Index wk = ke - kb;
    const auto panel = iota(kb, ke);
    Dense d = op_fetch(panel, panel);

    const Index r0 = first_at_least(rows, kb);
    const Index r1 = first_at_least(rows, ke);
    if (r1 - r0 == wk && loc.cols() > 0) {
      auto xb = loc.middleRows(r0, wk);
      if (lower) {
        if (unit_diag) d.triangularView<Eigen::UnitLower>().solveInPlace(xb);
        else d.triangularView<Eigen::Lower>().solveInPlace(xb);
      } else {
        if (unit_diag) d.triangularView<Eigen::UnitUpper>().solveInPlace(xb);
        else d.triangularView<Eigen::Upper>().solveInPlace(xb);
      }
    }

    Dense xk = fetch(ctx, b, panel, cols);
    const Index from = lower ? r1 : 0;
    const Index to = lower ? static_cast<Index>(rows.size()) : r0;
    const auto rest = slice(rows, from, to);
    Dense tp = op_fetch(rest, panel);
    if (!rest.empty() && loc.cols() > 0) loc.middleRows(from, to - from).noalias() -= tp * xk;
  };

  if (n == 0) return;
  const Index last = ((n - 1) / w) * w;
  if (lower) {
    for (Index kb = 0; kb < n; kb += w) step(kb);
  } else {
    for (Index kb = last; kb >= 0; kb -= w) step(kb);
  }
}

BlockCyclicMatrix cholesky_solve(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                                 const BlockCyclicMatrix& rhs) {
  if (rhs.rows() != a.rows()) {
    throw DimensionMismatch("cholesky_solve: A is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", RHS is " + std::to_string(rhs.rows()) +
                            "x" + std::to_string(rhs.cols()));
  }
  BlockCyclicMatrix l = a;
  cholesky_factor(ctx, l);
  BlockCyclicMatrix x = rhs;
  triangular_solve(ctx, l, Uplo::Lower, false, false, x);
  triangular_solve(ctx, l, Uplo::Lower, true, false, x);
  return x;
}

LuFactors lu_factor(comm::RankCtx& ctx, BlockCyclicMatrix a) {
  require_square(a, "lu_factor");
  const Index n = a.rows();
  const Layout lay = a.layout();
  const auto rows = lay.rows_of(ctx.rank());
  const auto cols = lay.cols_of(ctx.rank());
  Dense& loc = a.local();

  const double local_max = loc.size() > 0 ? loc.cwiseAbs().maxCoeff() : 0.0;
  const double amax = ctx.allreduce_max(local_max);
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * amax;

  std::vector<Index> perm = iota(0, n);
  for (Index k = 0; k < n; ++k) {
    const auto below = iota(k, n);
    const Index kk[] = {k};
    Vector col = fetch(ctx, a, below, kk).col(0);

    Index p = 0;
    col.cwiseAbs().maxCoeff(&p);
    if (!(std::abs(col(p)) > tol)) {
      throw SingularMatrix("lu: pivot " + std::to_string(k + 1) + " is zero to working precision",
                           k + 1);
    }
    const Index pk = k + p;

    const Index c_tail = first_at_least(cols, k + 1);
    const auto swap_rows = pk == k ? std::vector<Index>{k} : std::vector<Index>{k, pk};
    Dense sw = fetch(ctx, a, swap_rows, cols);
    if (pk != k) {
      if (lay.owns_row(ctx.rank(), k)) loc.row(lay.local_row(k)) = sw.row(1);
      if (lay.owns_row(ctx.rank(), pk)) loc.row(lay.local_row(pk)) = sw.row(0);
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pk)]);
      std::swap(col(0), col(p));
    }

    const double pivot = col(0);
    const Index r_tail = first_at_least(rows, k + 1);
    const Index nr = static_cast<Index>(rows.size()) - r_tail;
    Vector mult(nr);
    for (Index q = 0; q < nr; ++q) {
      mult(q) = col(rows[static_cast<std::size_t>(r_tail + q)] - k) / pivot;
    }
    if (lay.owns_col(ctx.rank(), k) && nr > 0) {
      loc.col(lay.local_col(k)).tail(nr) = mult;
    }
    const Index nc = static_cast<Index>(cols.size()) - c_tail;
    if (nr > 0 && nc > 0) {
      loc.block(r_tail, c_tail, nr, nc).noalias() -=
          mult * sw.row(sw.rows() - 1).tail(nc);
    }
  }
  return {std::move(a), std::move(perm)};
}

BlockCyclicMatrix invert(comm::RankCtx& ctx, const BlockCyclicMatrix& s) {
  LuFactors f = lu_factor(ctx, s);
  BlockCyclicMatrix x(s.desc());
  const auto& perm = f.perm;
  x.for_each_owned([&](Index i, Index j, double& v) {
    v = perm[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0;
  });
  triangular_solve(ctx, f.lu, Uplo::Lower, false, true, x);
  triangular_solve(ctx, f.lu, Uplo::Upper, false, false, x);
  return x;
}

}  // namespace wallresp
