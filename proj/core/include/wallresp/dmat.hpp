#pragma once

// Distributed matrix containers and the data movement between them.
//
// Every layout used here assigns each rank a Cartesian block of the global
// index space (a set of rows times a set of columns), stored densely in
// ascending global order. For the partitioned layouts (block-cyclic, row-
// or column-striped, root-only) those blocks are disjoint and cover the
// matrix; a replicated layout gives every rank everything. `fetch` moves an
// arbitrary rows x cols selection to the requesting rank and is the single
// primitive behind redistribution, transposition, gather and scatter.
//
// Global indices in this header are 0-based; the grid.hpp mapping
// operations keep the 1-based contract.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wallresp/comm.hpp"
#include "wallresp/grid.hpp"
#include "wallresp/types.hpp"

namespace wallresp {

class Layout {
 public:
  enum class Kind { BlockCyclic, RowStriped, ColStriped, Replicated, RootOnly };

  static Layout block_cyclic(const BlockCyclicDesc& desc);
  static Layout striped(Index m, Index n, bool row_wise, int nranks);
  static Layout replicated(Index m, Index n, int nranks);
  static Layout root_only(Index m, Index n, int nranks);

  Kind kind() const { return kind_; }
  Index rows() const { return m_; }
  Index cols() const { return n_; }
  int nranks() const { return nranks_; }
  bool partitioned() const { return kind_ != Kind::Replicated; }

  bool owns_row(int rank, Index i) const;
  bool owns_col(int rank, Index j) const;
  int owner(Index i, Index j) const;

  /// Local position of global row i (resp. column j) on the rank owning it.
  Index local_row(Index i) const;
  Index local_col(Index j) const;

  std::vector<Index> rows_of(int rank) const;
  std::vector<Index> cols_of(int rank) const;
  Index local_rows(int rank) const;
  Index local_cols(int rank) const;

  /// Chunk length along the striped dimension (ceil(D/P), at least 1).
  Index stripe() const { return stripe_; }

 private:
  Kind kind_ = Kind::Replicated;
  Index m_ = 0;
  Index n_ = 0;
  int nranks_ = 1;
  Index mb_ = 1;
  Index nb_ = 1;
  int grid_rows_ = 1;
  int grid_cols_ = 1;
  Index stripe_ = 1;
};

/// Globally M x N matrix stored as per-rank block-cyclic tiles.
class BlockCyclicMatrix {
 public:
  BlockCyclicMatrix() = default;
  explicit BlockCyclicMatrix(const BlockCyclicDesc& desc, double fill = 0.0);

  const BlockCyclicDesc& desc() const { return desc_; }
  Index rows() const { return desc_.m; }
  Index cols() const { return desc_.n; }
  Layout layout() const { return Layout::block_cyclic(desc_); }

  Dense& local() { return local_; }
  const Dense& local() const { return local_; }

  /// Global index of local row / column (0-based both ways).
  Index global_row(Index li) const {
    return bc::to_global(li, desc_.mb, desc_.grid.my_row, desc_.grid.rows);
  }
  Index global_col(Index lj) const {
    return bc::to_global(lj, desc_.nb, desc_.grid.my_col, desc_.grid.cols);
  }

  /// Calls f(i, j, value&) for every locally owned element (0-based globals).
  template <class F>
  void for_each_owned(F&& f) {
    for (Index lj = 0; lj < local_.cols(); ++lj) {
      const Index j = global_col(lj);
      for (Index li = 0; li < local_.rows(); ++li) f(global_row(li), j, local_(li, lj));
    }
  }
  template <class F>
  void for_each_owned(F&& f) const {
    for (Index lj = 0; lj < local_.cols(); ++lj) {
      const Index j = global_col(lj);
      for (Index li = 0; li < local_.rows(); ++li) f(global_row(li), j, local_(li, lj));
    }
  }

  std::size_t local_bytes() const { return static_cast<std::size_t>(local_.size()) * 8; }

 private:
  BlockCyclicDesc desc_;
  Dense local_;
};

/// Row- or column-contiguous distributed matrix. With distrib == false every
/// rank holds the full matrix. ind_start / ind_end are 1-based and inclusive
/// along the striped dimension; an empty chunk has ind_end = ind_start - 1.
struct StripedMatrix {
  Dense loc_mat;
  bool distrib = true;
  bool row_wise = true;
  Index ind_start = 1;
  Index ind_end = 0;
  Index step = 0;
  std::array<Index, 2> dim{0, 0};

  Index rows() const { return dim[0]; }
  Index cols() const { return dim[1]; }
  Layout layout(int nranks) const;
  std::size_t local_bytes() const { return static_cast<std::size_t>(loc_mat.size()) * 8; }
};

/// Non-owning view of a rank's part of a distributed matrix.
struct MatrixRef {
  Layout layout;
  const Dense* local = nullptr;

  MatrixRef(Layout l, const Dense& d) : layout(l), local(&d) {}
  MatrixRef(const BlockCyclicMatrix& a) : layout(a.layout()), local(&a.local()) {}  // NOLINT
};

/// Mutable view; used for the output operand of dist_gemm.
struct MatrixMut {
  Layout layout;
  Dense* local = nullptr;

  MatrixMut(Layout l, Dense& d) : layout(l), local(&d) {}
  MatrixMut(BlockCyclicMatrix& a) : layout(a.layout()), local(&a.local()) {}  // NOLINT
};

MatrixRef view(const StripedMatrix& s, int nranks);
MatrixMut view(StripedMatrix& s, int nranks);

BlockCyclicMatrix create_block_cyclic(Index m, Index n, Index mb, Index nb,
                                      const ProcessGrid& grid, double fill = 0.0);

/// Chunk of the calling rank: [r*s+1, min((r+1)*s, D)] with s = ceil(D/P).
StripedMatrix create_striped(Index m, Index n, bool row_wise, int nranks, int rank,
                             bool distrib = true);

/// Collective. Returns A(rows, cols) on the calling rank; each rank may ask
/// for a different selection, including an empty one.
Dense fetch(comm::RankCtx& ctx, const MatrixRef& a, std::span<const Index> rows,
            std::span<const Index> cols);

/// Collective. Local part of `a` under `target` for the calling rank.
Dense redistribute(comm::RankCtx& ctx, const MatrixRef& a, const Layout& target);

StripedMatrix redistribute_bc_to_striped(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                                         bool row_wise);
StripedMatrix to_replicated(comm::RankCtx& ctx, const MatrixRef& a);
BlockCyclicMatrix to_block_cyclic(comm::RankCtx& ctx, const MatrixRef& a,
                                  const BlockCyclicDesc& desc);

/// Default cap on gather_to_root: 2^26 elements (512 MiB of doubles).
inline constexpr Index kDefaultGatherCap = Index{1} << 26;

/// Collective. The full matrix on rank 0, nullopt elsewhere. Refuses
/// (std::length_error on every rank) when M*N exceeds `cap`.
std::optional<Dense> gather_to_root(comm::RankCtx& ctx, const MatrixRef& a,
                                    Index cap = kDefaultGatherCap);

/// Collective. Distributes `full` (read on rank 0 only) to `target`.
Dense scatter_from_root(comm::RankCtx& ctx, const Dense& full, const Layout& target);
BlockCyclicMatrix scatter_from_root(comm::RankCtx& ctx, const Dense& full,
                                    const BlockCyclicDesc& desc);

/// Copy of the global block A[row0:row0+m, col0:col0+n] with a new descriptor.
BlockCyclicMatrix copy_block(comm::RankCtx& ctx, const BlockCyclicMatrix& a, Index row0,
                             Index col0, const BlockCyclicDesc& desc);

/// [a | b] with the given descriptor (dims must be a.rows x (a.cols + b.cols)).
BlockCyclicMatrix hconcat(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                          const BlockCyclicMatrix& b, const BlockCyclicDesc& desc);

/// Descriptor of the same shape family on the rank's grid.
BlockCyclicDesc like(const BlockCyclicDesc& d, Index m, Index n);

}  // namespace wallresp
