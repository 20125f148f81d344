#include "wallresp/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wallresp {

ProcessGrid make_grid(int nranks, int rank, std::optional<int> rows) {
  if (nranks < 1) throw std::invalid_argument("process grid needs at least one rank");
  if (rank < 0 || rank >= nranks) {
    throw std::out_of_range("rank " + std::to_string(rank) + " outside [0," +
                            std::to_string(nranks) + ")");
  }
  int pr = 0;
  if (rows) {
    pr = *rows;
    if (pr < 1 || nranks % pr != 0) {
      throw std::invalid_argument("grid rows " + std::to_string(pr) + " does not divide " +
                                  std::to_string(nranks) + " ranks");
    }
  } else {
    pr = static_cast<int>(std::sqrt(static_cast<double>(nranks)));
    while (pr * pr > nranks) --pr;
    while (nranks % pr != 0) --pr;
  }
  ProcessGrid g;
  g.rows = pr;
  g.cols = nranks / pr;
  g.my_row = rank / g.cols;
  g.my_col = rank % g.cols;
  return g;
}

BlockCyclicDesc make_desc(Index m, Index n, Index mb, Index nb, const ProcessGrid& grid) {
  if (m < 0 || n < 0) throw std::invalid_argument("matrix dimensions must be non-negative");
  if (mb < 1 || nb < 1) throw std::invalid_argument("block sizes must be >= 1");
  if (grid.rows < 1 || grid.cols < 1) throw std::invalid_argument("empty process grid");
  return BlockCyclicDesc{m, n, mb, nb, grid};
}

namespace bc {

Index count(Index n, Index block, int p, int nprocs) {
  const Index nblocks = n / block;
  Index c = (nblocks / nprocs) * block;
  const Index extra = nblocks % nprocs;
  if (p < extra) {
    c += block;
  } else if (p == extra) {
    c += n % block;
  }
  return c;
}

}  // namespace bc

namespace {

void check_global(Index i, Index j, const BlockCyclicDesc& d) {
  if (i < 1 || i > d.m || j < 1 || j > d.n) {
    throw std::out_of_range("global index (" + std::to_string(i) + "," + std::to_string(j) +
                            ") outside " + std::to_string(d.m) + "x" + std::to_string(d.n));
  }
}

}  // namespace

GridCoord owner_of(Index i, Index j, const BlockCyclicDesc& d) {
  check_global(i, j, d);
  return {bc::owner(i - 1, d.mb, d.grid.rows), bc::owner(j - 1, d.nb, d.grid.cols)};
}

LocalIndex global_to_local(Index i, Index j, const BlockCyclicDesc& d) {
  const GridCoord o = owner_of(i, j, d);
  if (o.row != d.grid.my_row || o.col != d.grid.my_col) return {};
  return {true, bc::to_local(i - 1, d.mb, d.grid.rows) + 1,
          bc::to_local(j - 1, d.nb, d.grid.cols) + 1};
}

std::pair<Index, Index> local_extent(const BlockCyclicDesc& d, int pr, int pc) {
  if (pr < 0 || pr >= d.grid.rows || pc < 0 || pc >= d.grid.cols) {
    throw std::out_of_range("grid coordinate outside process grid");
  }
  return {bc::count(d.m, d.mb, pr, d.grid.rows), bc::count(d.n, d.nb, pc, d.grid.cols)};
}

std::pair<Index, Index> local_to_global(Index li, Index lj, const BlockCyclicDesc& d) {
  const auto [ml, nl] = local_extent(d, d.grid.my_row, d.grid.my_col);
  if (li < 1 || li > ml || lj < 1 || lj > nl) {
    throw std::out_of_range("local index (" + std::to_string(li) + "," + std::to_string(lj) +
                            ") outside local extent " + std::to_string(ml) + "x" +
                            std::to_string(nl));
  }
  return {bc::to_global(li - 1, d.mb, d.grid.my_row, d.grid.rows) + 1,
          bc::to_global(lj - 1, d.nb, d.grid.my_col, d.grid.cols) + 1};
}

}  // namespace wallresp
