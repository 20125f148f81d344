#include <gtest/gtest.h>

#include <set>

#include "wallresp/grid.hpp"

using namespace wallresp;

namespace {

BlockCyclicDesc grid9(int pr, int pc) {
  ProcessGrid g{2, 3, pr, pc};
  return make_desc(9, 9, 2, 2, g);
}

}  // namespace

TEST(Grid, MakeGridPicksSquarestFactorization) {
  EXPECT_EQ(make_grid(1, 0).rows, 1);
  EXPECT_EQ(make_grid(2, 0).cols, 2);
  auto g4 = make_grid(4, 3);
  EXPECT_EQ(g4.rows, 2);
  EXPECT_EQ(g4.cols, 2);
  EXPECT_EQ(g4.my_row, 1);
  EXPECT_EQ(g4.my_col, 1);
  auto g6 = make_grid(6, 5);
  EXPECT_EQ(g6.rows, 2);
  EXPECT_EQ(g6.cols, 3);
  EXPECT_EQ(g6.my_row, 1);
  EXPECT_EQ(g6.my_col, 2);
  EXPECT_EQ(make_grid(5, 0).rows, 1);
  EXPECT_EQ(make_grid(6, 0, 3).rows, 3);
  EXPECT_THROW(make_grid(6, 0, 4), std::invalid_argument);
  EXPECT_THROW(make_grid(0, 0), std::invalid_argument);
}

TEST(Grid, MakeDescValidates) {
  ProcessGrid g;
  EXPECT_THROW(make_desc(-1, 3, 2, 2, g), std::invalid_argument);
  EXPECT_THROW(make_desc(3, 3, 0, 2, g), std::invalid_argument);
  EXPECT_NO_THROW(make_desc(0, 3, 2, 2, g));
}

TEST(Grid, OwnerOfKnownCells) {
  EXPECT_EQ(owner_of(1, 7, grid9(0, 0)), (GridCoord{0, 0}));
  EXPECT_EQ(owner_of(3, 5, grid9(0, 0)), (GridCoord{1, 2}));
  ProcessGrid one;
  auto d = make_desc(5, 5, 2, 2, one);
  for (Index i = 1; i <= 5; ++i) {
    for (Index j = 1; j <= 5; ++j) EXPECT_EQ(owner_of(i, j, d), (GridCoord{0, 0}));
  }
  EXPECT_THROW(owner_of(0, 1, grid9(0, 0)), std::out_of_range);
  EXPECT_THROW(owner_of(1, 10, grid9(0, 0)), std::out_of_range);
}

TEST(Grid, GlobalToLocal) {
  auto l = global_to_local(9, 9, grid9(0, 1));
  EXPECT_TRUE(l.owned);
  EXPECT_EQ(l.li, 5);
  EXPECT_EQ(l.lj, 3);
  auto o = global_to_local(1, 1, grid9(0, 0));
  EXPECT_TRUE(o.owned);
  EXPECT_EQ(o.li, 1);
  EXPECT_EQ(o.lj, 1);
  EXPECT_FALSE(global_to_local(1, 1, grid9(1, 2)).owned);
}

TEST(Grid, LocalExtentAndInverse) {
  EXPECT_EQ(local_extent(grid9(0, 0), 0, 0), (std::pair<Index, Index>{5, 4}));
  EXPECT_EQ(local_extent(grid9(0, 0), 1, 2), (std::pair<Index, Index>{4, 2}));
  ProcessGrid one;
  EXPECT_EQ(local_extent(make_desc(7, 3, 2, 2, one), 0, 0), (std::pair<Index, Index>{7, 3}));
  EXPECT_EQ(local_to_global(1, 3, grid9(0, 0)), (std::pair<Index, Index>{1, 7}));
  EXPECT_EQ(local_to_global(5, 3, grid9(0, 1)), (std::pair<Index, Index>{9, 9}));
  EXPECT_THROW(local_to_global(6, 1, grid9(0, 0)), std::out_of_range);
}

TEST(Grid, PartitionAndBijection) {
  for (Index mb : {1, 2, 3, 7}) {
    Index total = 0;
    std::set<std::pair<Index, Index>> seen;
    for (int pr = 0; pr < 2; ++pr) {
      for (int pc = 0; pc < 3; ++pc) {
        ProcessGrid g{2, 3, pr, pc};
        auto d = make_desc(11, 8, mb, mb, g);
        auto [ml, nl] = local_extent(d, pr, pc);
        total += ml * nl;
        for (Index li = 1; li <= ml; ++li) {
          for (Index lj = 1; lj <= nl; ++lj) {
            auto [i, j] = local_to_global(li, lj, d);
            EXPECT_TRUE(seen.insert({i, j}).second);
            auto back = global_to_local(i, j, d);
            EXPECT_TRUE(back.owned);
            EXPECT_EQ(back.li, li);
            EXPECT_EQ(back.lj, lj);
          }
        }
      }
    }
    EXPECT_EQ(total, 88);
    EXPECT_EQ(seen.size(), 88u);
  }
}
