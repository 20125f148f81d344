#include <algorithm>
#include <string>

#include "wallresp/error.hpp"
#include "wallresp/linalg.hpp"

namespace wallresp {

namespace {

std::string shape(const Layout& l) {
  return std::to_string(l.rows()) + "x" + std::to_string(l.cols());
}

std::vector<Index> iota(Index begin, Index end) {
  std::vector<Index> v;
  v.reserve(static_cast<std::size_t>(std::max<Index>(0, end - begin)));
  for (Index k = begin; k < end; ++k) v.push_back(k);
  return v;
}

}  // namespace

void dist_gemm(comm::RankCtx& ctx, double alpha, const MatrixRef& a, const MatrixRef& b,
               double beta, MatrixMut c, Index panel) {
  if (a.layout.cols() != b.layout.rows() || c.layout.rows() != a.layout.rows() ||
      c.layout.cols() != b.layout.cols()) {
    throw DimensionMismatch("dist_gemm: A is " + shape(a.layout) + ", B is " + shape(b.layout) +
                            ", C is " + shape(c.layout));
  }
  if (panel < 1) panel = kDefaultBlockSize;

  const auto rows = c.layout.rows_of(ctx.rank());
  const auto cols = c.layout.cols_of(ctx.rank());
  Dense& cl = *c.local;
  if (cl.rows() != static_cast<Index>(rows.size()) || cl.cols() != static_cast<Index>(cols.size())) {
    throw DimensionMismatch("dist_gemm: local C buffer is " + std::to_string(cl.rows()) + "x" +
                            std::to_string(cl.cols()) + ", layout expects " +
                            std::to_string(rows.size()) + "x" + std::to_string(cols.size()));
  }
  if (beta == 0.0) {
    cl.setZero();
  } else if (beta != 1.0) {
    cl *= beta;
  }

  const Index k_total = a.layout.cols();
  for (Index k0 = 0; k0 < k_total; k0 += panel) {
    const auto ks = iota(k0, std::min(k0 + panel, k_total));
    Dense ap = fetch(ctx, a, rows, ks);
    Dense bp = fetch(ctx, b, ks, cols);
    if (cl.size() > 0) cl.noalias() += alpha * ap * bp;
  }
}

BlockCyclicMatrix dist_transpose(comm::RankCtx& ctx, const BlockCyclicMatrix& a) {
  const auto& d = a.desc();
  BlockCyclicMatrix t(make_desc(d.n, d.m, d.nb, d.mb, d.grid));
  const auto rows = t.layout().rows_of(ctx.rank());
  const auto cols = t.layout().cols_of(ctx.rank());
  t.local() = fetch(ctx, a, cols, rows).transpose();
  return t;
}

void row_scale(BlockCyclicMatrix& a, std::span<const double> d) {
  if (static_cast<Index>(d.size()) != a.rows()) {
    throw DimensionMismatch("row_scale: " + std::to_string(d.size()) + " divisors for " +
                            std::to_string(a.rows()) + " rows");
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) {
      throw ZeroDivisor("row_scale: zero divisor for row " + std::to_string(i + 1),
                        static_cast<Index>(i + 1));
    }
  }
  Dense& l = a.local();
  for (Index li = 0; li < l.rows(); ++li) {
    l.row(li) /= d[static_cast<std::size_t>(a.global_row(li))];
  }
}

}  // namespace wallresp
