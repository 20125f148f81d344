#include "wallresp/dmat.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace wallresp {

namespace {

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

Index stripe_for(Index extent, int nranks) {
  return std::max<Index>(1, ceil_div(extent, nranks));
}

}  // namespace

Layout Layout::block_cyclic(const BlockCyclicDesc& desc) {
  Layout l;
  l.kind_ = Kind::BlockCyclic;
  l.m_ = desc.m;
  l.n_ = desc.n;
  l.mb_ = desc.mb;
  l.nb_ = desc.nb;
  l.grid_rows_ = desc.grid.rows;
  l.grid_cols_ = desc.grid.cols;
  l.nranks_ = desc.grid.size();
  return l;
}

Layout Layout::striped(Index m, Index n, bool row_wise, int nranks) {
  Layout l;
  l.kind_ = row_wise ? Kind::RowStriped : Kind::ColStriped;
  l.m_ = m;
  l.n_ = n;
  l.nranks_ = nranks;
  l.stripe_ = stripe_for(row_wise ? m : n, nranks);
  return l;
}

Layout Layout::replicated(Index m, Index n, int nranks) {
  Layout l;
  l.kind_ = Kind::Replicated;
  l.m_ = m;
  l.n_ = n;
  l.nranks_ = nranks;
  return l;
}

Layout Layout::root_only(Index m, Index n, int nranks) {
  Layout l;
  l.kind_ = Kind::RootOnly;
  l.m_ = m;
  l.n_ = n;
  l.nranks_ = nranks;
  return l;
}

bool Layout::owns_row(int rank, Index i) const {
  switch (kind_) {
    case Kind::BlockCyclic:
      return bc::owner(i, mb_, grid_rows_) == rank / grid_cols_;
    case Kind::RowStriped:
      return i / stripe_ == rank;
    case Kind::ColStriped:
    case Kind::Replicated:
      return true;
    case Kind::RootOnly:
      return rank == 0;
  }
  return false;
}

bool Layout::owns_col(int rank, Index j) const {
  switch (kind_) {
    case Kind::BlockCyclic:
      return bc::owner(j, nb_, grid_cols_) == rank % grid_cols_;
    case Kind::ColStriped:
      return j / stripe_ == rank;
    case Kind::RowStriped:
    case Kind::Replicated:
      return true;
    case Kind::RootOnly:
      return rank == 0;
  }
  return false;
}

int Layout::owner(Index i, Index j) const {
  switch (kind_) {
    case Kind::BlockCyclic:
      return bc::owner(i, mb_, grid_rows_) * grid_cols_ + bc::owner(j, nb_, grid_cols_);
    case Kind::RowStriped:
      return static_cast<int>(i / stripe_);
    case Kind::ColStriped:
      return static_cast<int>(j / stripe_);
    case Kind::Replicated:
    case Kind::RootOnly:
      return 0;
  }
  return 0;
}

Index Layout::local_row(Index i) const {
  switch (kind_) {
    case Kind::BlockCyclic:
      return bc::to_local(i, mb_, grid_rows_);
    case Kind::RowStriped:
      return i % stripe_;
    default:
      return i;
  }
}

Index Layout::local_col(Index j) const {
  switch (kind_) {
    case Kind::BlockCyclic:
      return bc::to_local(j, nb_, grid_cols_);
    case Kind::ColStriped:
      return j % stripe_;
    default:
      return j;
  }
}

namespace {

std::vector<Index> range(Index begin, Index end) {
  std::vector<Index> v;
  for (Index k = begin; k < end; ++k) v.push_back(k);
  return v;
}

}  // namespace

std::vector<Index> Layout::rows_of(int rank) const {
  switch (kind_) {
    case Kind::BlockCyclic: {
      const int pr = rank / grid_cols_;
      const Index cnt = bc::count(m_, mb_, pr, grid_rows_);
      std::vector<Index> v(static_cast<std::size_t>(cnt));
      for (Index l = 0; l < cnt; ++l) v[static_cast<std::size_t>(l)] = bc::to_global(l, mb_, pr, grid_rows_);
      return v;
    }
    case Kind::RowStriped:
      return range(std::min<Index>(rank * stripe_, m_), std::min<Index>((rank + 1) * stripe_, m_));
    case Kind::ColStriped:
    case Kind::Replicated:
      return range(0, m_);
    case Kind::RootOnly:
      return rank == 0 ? range(0, m_) : std::vector<Index>{};
  }
  return {};
}

std::vector<Index> Layout::cols_of(int rank) const {
  switch (kind_) {
    case Kind::BlockCyclic: {
      const int pc = rank % grid_cols_;
      const Index cnt = bc::count(n_, nb_, pc, grid_cols_);
      std::vector<Index> v(static_cast<std::size_t>(cnt));
      for (Index l = 0; l < cnt; ++l) v[static_cast<std::size_t>(l)] = bc::to_global(l, nb_, pc, grid_cols_);
      return v;
    }
    case Kind::ColStriped:
      return range(std::min<Index>(rank * stripe_, n_), std::min<Index>((rank + 1) * stripe_, n_));
    case Kind::RowStriped:
    case Kind::Replicated:
      return range(0, n_);
    case Kind::RootOnly:
      return rank == 0 ? range(0, n_) : std::vector<Index>{};
  }
  return {};
}

Index Layout::local_rows(int rank) const {
  switch (kind_) {
    case Kind::BlockCyclic:
      return bc::count(m_, mb_, rank / grid_cols_, grid_rows_);
    case Kind::RowStriped:
      return std::max<Index>(0, std::min<Index>((rank + 1) * stripe_, m_) - std::min<Index>(rank * stripe_, m_));
    case Kind::RootOnly:
      return rank == 0 ? m_ : 0;
    default:
      return m_;
  }
}

Index Layout::local_cols(int rank) const {
  switch (kind_) {
    case Kind::BlockCyclic:
      return bc::count(n_, nb_, rank % grid_cols_, grid_cols_);
    case Kind::ColStriped:
      return std::max<Index>(0, std::min<Index>((rank + 1) * stripe_, n_) - std::min<Index>(rank * stripe_, n_));
    case Kind::RootOnly:
      return rank == 0 ? n_ : 0;
    default:
      return n_;
  }
}

BlockCyclicMatrix::BlockCyclicMatrix(const BlockCyclicDesc& desc, double fill) : desc_(desc) {
  const auto [ml, nl] = local_extent(desc, desc.grid.my_row, desc.grid.my_col);
  local_ = Dense::Constant(ml, nl, fill);
}

Layout StripedMatrix::layout(int nranks) const {
  return distrib ? Layout::striped(dim[0], dim[1], row_wise, nranks)
                 : Layout::replicated(dim[0], dim[1], nranks);
}

MatrixRef view(const StripedMatrix& s, int nranks) { return MatrixRef(s.layout(nranks), s.loc_mat); }
MatrixMut view(StripedMatrix& s, int nranks) { return MatrixMut(s.layout(nranks), s.loc_mat); }

BlockCyclicMatrix create_block_cyclic(Index m, Index n, Index mb, Index nb,
                                      const ProcessGrid& grid, double fill) {
  return BlockCyclicMatrix(make_desc(m, n, mb, nb, grid), fill);
}

StripedMatrix create_striped(Index m, Index n, bool row_wise, int nranks, int rank, bool distrib) {
  if (m < 0 || n < 0) throw std::invalid_argument("matrix dimensions must be non-negative");
  StripedMatrix s;
  s.distrib = distrib;
  s.row_wise = row_wise;
  s.dim = {m, n};
  const Index extent = row_wise ? m : n;
  if (distrib) {
    const Index step = stripe_for(extent, nranks);
    s.ind_start = std::min<Index>(rank * step, extent) + 1;
    s.ind_end = std::min<Index>((rank + 1) * step, extent);
  } else {
    s.ind_start = 1;
    s.ind_end = extent;
  }
  s.step = s.ind_end - s.ind_start + 1;
  s.loc_mat = row_wise ? Dense::Zero(s.step, n) : Dense::Zero(m, s.step);
  return s;
}

namespace {

comm::Bytes encode_request(std::span<const Index> rows, std::span<const Index> cols) {
  std::vector<Index> flat;
  flat.reserve(rows.size() + cols.size() + 1);
  flat.push_back(static_cast<Index>(rows.size()));
  flat.insert(flat.end(), rows.begin(), rows.end());
  flat.insert(flat.end(), cols.begin(), cols.end());
  return comm::to_bytes(flat);
}

struct Request {
  std::vector<Index> rows;
  std::vector<Index> cols;
};

Request decode_request(const comm::Bytes& b) {
  auto flat = comm::from_bytes<Index>(b);
  Request r;
  const auto nr = static_cast<std::size_t>(flat.at(0));
  r.rows.assign(flat.begin() + 1, flat.begin() + 1 + static_cast<std::ptrdiff_t>(nr));
  r.cols.assign(flat.begin() + 1 + static_cast<std::ptrdiff_t>(nr), flat.end());
  return r;
}

std::vector<Index> select_rows(const Layout& l, int rank, std::span<const Index> rows) {
  std::vector<Index> pos;
  for (std::size_t p = 0; p < rows.size(); ++p) {
    if (l.owns_row(rank, rows[p])) pos.push_back(static_cast<Index>(p));
  }
  return pos;
}

std::vector<Index> select_cols(const Layout& l, int rank, std::span<const Index> cols) {
  std::vector<Index> pos;
  for (std::size_t p = 0; p < cols.size(); ++p) {
    if (l.owns_col(rank, cols[p])) pos.push_back(static_cast<Index>(p));
  }
  return pos;
}

void check_indices(std::span<const Index> idx, Index extent, const char* what) {
  for (Index v : idx) {
    if (v < 0 || v >= extent) {
      throw std::out_of_range(std::string("fetch: ") + what + " index " + std::to_string(v) +
                              " outside [0," + std::to_string(extent) + ")");
    }
  }
}

}  // namespace

Dense fetch(comm::RankCtx& ctx, const MatrixRef& a, std::span<const Index> rows,
            std::span<const Index> cols) {
  const Layout& l = a.layout;
  if (l.nranks() != ctx.size()) {
    throw std::invalid_argument("fetch: layout spans " + std::to_string(l.nranks()) +
                                " ranks but the context has " + std::to_string(ctx.size()));
  }
  check_indices(rows, l.rows(), "row");
  check_indices(cols, l.cols(), "column");
  const Dense& src = *a.local;
  Dense result(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));

  if (!l.partitioned()) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        result(static_cast<Index>(r), static_cast<Index>(c)) = src(rows[r], cols[c]);
      }
    }
    return result;
  }

  const int me = ctx.rank();
  const int nranks = ctx.size();
  auto requests = ctx.allgather(encode_request(rows, cols));

  std::vector<comm::Bytes> out(static_cast<std::size_t>(nranks));
  for (int q = 0; q < nranks; ++q) {
    if (q == me) continue;
    Request req = decode_request(requests[static_cast<std::size_t>(q)]);
    auto rp = select_rows(l, me, req.rows);
    auto cp = select_cols(l, me, req.cols);
    std::vector<double> buf;
    buf.reserve(rp.size() * cp.size());
    for (Index c : cp) {
      const Index lc = l.local_col(req.cols[static_cast<std::size_t>(c)]);
      for (Index r : rp) buf.push_back(src(l.local_row(req.rows[static_cast<std::size_t>(r)]), lc));
    }
    out[static_cast<std::size_t>(q)] = comm::to_bytes(buf);
  }
  auto in = ctx.alltoallv(std::move(out));

  for (int r = 0; r < nranks; ++r) {
    auto rp = select_rows(l, r, rows);
    auto cp = select_cols(l, r, cols);
    if (rp.empty() || cp.empty()) continue;
    if (r == me) {
      for (Index c : cp) {
        const Index lc = l.local_col(cols[static_cast<std::size_t>(c)]);
        for (Index p : rp) result(p, c) = src(l.local_row(rows[static_cast<std::size_t>(p)]), lc);
      }
      continue;
    }
    const auto& b = in[static_cast<std::size_t>(r)];
    if (b.size() != rp.size() * cp.size() * sizeof(double)) {
      throw comm::CollectiveError("fetch: rank " + std::to_string(r) + " sent " +
                                  std::to_string(b.size()) + " bytes, expected " +
                                  std::to_string(rp.size() * cp.size() * sizeof(double)));
    }
    const auto* v = reinterpret_cast<const double*>(b.data());
    std::size_t k = 0;
    for (Index c : cp) {
      for (Index p : rp) result(p, c) = v[k++];
    }
  }
  return result;
}

Dense redistribute(comm::RankCtx& ctx, const MatrixRef& a, const Layout& target) {
  if (target.rows() != a.layout.rows() || target.cols() != a.layout.cols()) {
    throw DimensionMismatch("redistribute: source is " + std::to_string(a.layout.rows()) + "x" +
                            std::to_string(a.layout.cols()) + ", target is " +
                            std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  }
  const auto rows = target.rows_of(ctx.rank());
  const auto cols = target.cols_of(ctx.rank());
  return fetch(ctx, a, rows, cols);
}

StripedMatrix redistribute_bc_to_striped(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                                         bool row_wise) {
  StripedMatrix s = create_striped(a.rows(), a.cols(), row_wise, ctx.size(), ctx.rank());
  s.loc_mat = redistribute(ctx, a, s.layout(ctx.size()));
  return s;
}

StripedMatrix to_replicated(comm::RankCtx& ctx, const MatrixRef& a) {
  StripedMatrix s =
      create_striped(a.layout.rows(), a.layout.cols(), true, ctx.size(), ctx.rank(), false);
  s.loc_mat = redistribute(ctx, a, s.layout(ctx.size()));
  return s;
}

BlockCyclicMatrix to_block_cyclic(comm::RankCtx& ctx, const MatrixRef& a,
                                  const BlockCyclicDesc& desc) {
  BlockCyclicMatrix m(desc);
  m.local() = redistribute(ctx, a, m.layout());
  return m;
}

std::optional<Dense> gather_to_root(comm::RankCtx& ctx, const MatrixRef& a, Index cap) {
  const Index m = a.layout.rows();
  const Index n = a.layout.cols();
  if (n > 0 && m > cap / n) {
    throw std::length_error("gather_to_root: " + std::to_string(m) + "x" + std::to_string(n) +
                            " matrix exceeds the single-rank cap of " + std::to_string(cap) +
                            " elements");
  }
  Dense full = redistribute(ctx, a, Layout::root_only(m, n, ctx.size()));
  if (!ctx.is_root()) return std::nullopt;
  return full;
}

Dense scatter_from_root(comm::RankCtx& ctx, const Dense& full, const Layout& target) {
  static const Dense kEmpty;
  const Layout src = Layout::root_only(target.rows(), target.cols(), ctx.size());
  if (ctx.is_root() && (full.rows() != target.rows() || full.cols() != target.cols())) {
    throw DimensionMismatch("scatter_from_root: root holds " + std::to_string(full.rows()) + "x" +
                            std::to_string(full.cols()) + ", target is " +
                            std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  }
  return redistribute(ctx, MatrixRef(src, ctx.is_root() ? full : kEmpty), target);
}

BlockCyclicMatrix scatter_from_root(comm::RankCtx& ctx, const Dense& full,
                                    const BlockCyclicDesc& desc) {
  BlockCyclicMatrix m(desc);
  m.local() = scatter_from_root(ctx, full, m.layout());
  return m;
}

BlockCyclicMatrix copy_block(comm::RankCtx& ctx, const BlockCyclicMatrix& a, Index row0,
                             Index col0, const BlockCyclicDesc& desc) {
  if (row0 < 0 || col0 < 0 || row0 + desc.m > a.rows() || col0 + desc.n > a.cols()) {
    throw DimensionMismatch("copy_block: block " + std::to_string(desc.m) + "x" +
                            std::to_string(desc.n) + " at (" + std::to_string(row0) + "," +
                            std::to_string(col0) + ") exceeds " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  BlockCyclicMatrix out(desc);
  auto rows = out.layout().rows_of(ctx.rank());
  auto cols = out.layout().cols_of(ctx.rank());
  for (auto& r : rows) r += row0;
  for (auto& c : cols) c += col0;
  out.local() = fetch(ctx, a, rows, cols);
  return out;
}

BlockCyclicMatrix hconcat(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                          const BlockCyclicMatrix& b, const BlockCyclicDesc& desc) {
  if (a.rows() != b.rows() || desc.m != a.rows() || desc.n != a.cols() + b.cols()) {
    throw DimensionMismatch("hconcat: [" + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " | " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + "] into " + std::to_string(desc.m) + "x" +
                            std::to_string(desc.n));
  }
  BlockCyclicMatrix out(desc);
  const auto rows = out.layout().rows_of(ctx.rank());
  const auto cols = out.layout().cols_of(ctx.rank());
  std::vector<Index> left, right;
  for (Index c : cols) {
    if (c < a.cols()) {
      left.push_back(c);
    } else {
      right.push_back(c - a.cols());
    }
  }
  Dense l = fetch(ctx, a, rows, left);
  Dense r = fetch(ctx, b, rows, right);
  out.local().leftCols(l.cols()) = l;
  out.local().rightCols(r.cols()) = r;
  return out;
}

BlockCyclicDesc like(const BlockCyclicDesc& d, Index m, Index n) {
  return make_desc(m, n, d.mb, d.nb, d.grid);
}

}  // namespace wallresp
