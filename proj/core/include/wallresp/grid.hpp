#pragma once

#include <optional>
#include <utility>

#include "wallresp/types.hpp"

namespace wallresp {

/// Logical P_r x P_c arrangement of ranks. Rank r sits at
/// (r / cols, r % cols), i.e. row-major rank ordering.
struct ProcessGrid {
  int rows = 1;
  int cols = 1;
  int my_row = 0;
  int my_col = 0;

  int size() const { return rows * cols; }
  int rank_of(int row, int col) const { return row * cols + col; }
  bool operator==(const ProcessGrid&) const = default;
};

/// Block-cyclic distribution descriptor (ScaLAPACK style).
struct BlockCyclicDesc {
  Index m = 0;
  Index n = 0;
  Index mb = 64;
  Index nb = 64;
  ProcessGrid grid;

  bool operator==(const BlockCyclicDesc&) const = default;
};

inline constexpr Index kDefaultBlockSize = 64;

struct GridCoord {
  int row = 0;
  int col = 0;
  bool operator==(const GridCoord&) const = default;
};

struct LocalIndex {
  bool owned = false;
  Index li = 0;
  Index lj = 0;
};

/// Picks the most square P_r x P_c = P with P_r <= P_c. `rows` forces P_r
/// (it must divide P).
ProcessGrid make_grid(int nranks, int rank, std::optional<int> rows = std::nullopt);

/// Validates and returns a descriptor; throws std::invalid_argument.
BlockCyclicDesc make_desc(Index m, Index n, Index mb, Index nb, const ProcessGrid& grid);

// The four operations below use 1-based global and local indices, as in the
// Fortran mapping routines they mirror. Out-of-range input throws
// std::out_of_range.

GridCoord owner_of(Index i, Index j, const BlockCyclicDesc& d);
LocalIndex global_to_local(Index i, Index j, const BlockCyclicDesc& d);
std::pair<Index, Index> local_extent(const BlockCyclicDesc& d, int pr, int pc);
std::pair<Index, Index> local_to_global(Index li, Index lj, const BlockCyclicDesc& d);

namespace bc {

// 0-based helpers used by the distributed kernels.

/// Number of indices in [0, n) owned by process coordinate `p` (NUMROC).
Index count(Index n, Index block, int p, int nprocs);
inline int owner(Index g, Index block, int nprocs) {
  return static_cast<int>((g / block) % nprocs);
}
inline Index to_local(Index g, Index block, int nprocs) {
  return (g / (block * nprocs)) * block + g % block;
}
inline Index to_global(Index l, Index block, int p, int nprocs) {
  return ((l / block) * nprocs + p) * block + l % block;
}

}  // namespace bc
}  // namespace wallresp
