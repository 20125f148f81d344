#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "oracles.hpp"
#include "wallresp/error.hpp"
#include "wallresp/pario.hpp"

using namespace wallresp;
using namespace wallresp::testing;
namespace pio = wallresp::pario;

namespace {

std::string tmp_path(const std::string& name) {
  return ::testing::TempDir() + "wallresp_pario_" + name + ".swrm";
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Dense grid9_values() {
  Dense a(9, 9);
  for (Index i = 0; i < 9; ++i) {
    for (Index j = 0; j < 9; ++j) a(i, j) = 10.0 * (i + 1) + (j + 1);
  }
  return a;
}

void write_matrix(int p, const std::string& path, const Dense& full, Index nb, std::uint64_t limit) {
  comm::run(p, [&](comm::RankCtx& ctx) {
    pio::write_distributed(ctx, path, distribute(ctx, full, nb), limit);
  });
}

Dense read_matrix(int p, const std::string& path, bool row_wise, std::uint64_t limit) {
  return comm::run(p, [&](comm::RankCtx& ctx) {
    return gather_all(ctx, pio::read_striped(ctx, path, row_wise, limit));
  })[0];
}

}  // namespace

TEST(Chunks, GreedySplit) {
  auto plan = pio::plan_chunks(20, 7);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].count, 7u);
  EXPECT_EQ(plan[1].count, 7u);
  EXPECT_EQ(plan[2].count, 6u);
  EXPECT_EQ(plan[2].offset, 14u);
  EXPECT_TRUE(pio::plan_chunks(0, 7).empty());
}

TEST(Chunks, ByteCapBinds) {
  EXPECT_EQ(pio::call_cap((1ULL << 31) - 1, 8), 268435455u);
  auto plan = pio::plan_chunks(2147483648ULL, (1ULL << 31) - 1);
  for (const auto& c : plan) EXPECT_LE(c.count, 268435455u);
  EXPECT_EQ(plan.size(), 9u);
  EXPECT_EQ(pio::call_cap(0, 8), 1u);
}

TEST(Header, EncodeDecode) {
  pio::MatrixFileHeader h;
  h.m = 9;
  h.n = 4;
  auto bytes = h.encode();
  ASSERT_EQ(bytes.size(), pio::kHeaderBytes);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(bytes.data()), 4), "SWRM");
  auto back = pio::MatrixFileHeader::decode(bytes);
  EXPECT_EQ(back.m, 9u);
  EXPECT_EQ(back.n, 4u);
  EXPECT_EQ(back.record_bytes(), 32u + 9 * 4 * 8);
}

TEST(Write, SingleRankIsRowMajor) {
  const auto path = tmp_path("rowmajor");
  const Dense a = random_matrix(5, 3, 1);
  write_matrix(1, path, a, 2, 1000);
  auto bytes = slurp(path);
  ASSERT_EQ(bytes.size(), pio::kHeaderBytes + 15 * 8);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 3; ++j) {
      double v;
      std::memcpy(&v, bytes.data() + pio::kHeaderBytes + 8 * (i * 3 + j), 8);
      EXPECT_EQ(v, a(i, j));
    }
  }
}

TEST(Write, ChunkLimitDoesNotChangeContent) {
  const auto p1 = tmp_path("chunk7");
  const auto p2 = tmp_path("chunkbig");
  write_matrix(6, p1, grid9_values(), 2, 7);
  write_matrix(6, p2, grid9_values(), 2, 1000000000);
  EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST(Write, DataCallsFollowChunkLimit) {
  // 5x4 matrix on one rank: 20 owned elements
  const auto path = tmp_path("calls");
  auto stats = comm::run(1, [&](comm::RankCtx& ctx) {
    const auto before = ctx.stats().file_data_calls;
    auto st = pio::write_distributed(ctx, path, distribute(ctx, random_matrix(5, 4, 2), 2), 7);
    EXPECT_EQ(ctx.stats().file_data_calls - before, st.data_calls);
    return st;
  });
  EXPECT_EQ(stats[0].data_calls, 3u);
  EXPECT_EQ(stats[0].calls, 3u);
}

TEST(Write, EqualCallCountsAcrossRanks) {
  const auto path = tmp_path("equal");
  auto stats = comm::run(6, [&](comm::RankCtx& ctx) {
    pio::write_distributed(ctx, path, distribute(ctx, grid9_values(), 2), 3);
    return ctx.stats();
  });
  for (const auto& s : stats) {
    EXPECT_EQ(s.collectives, stats[0].collectives);
    EXPECT_EQ(s.file_calls, stats[0].file_calls);
  }
}

TEST(Read, RoundTripAcrossRankCounts) {
  const Dense a = random_matrix(11, 7, 3);
  for (int pw : {1, 2, 4, 6}) {
    const auto path = tmp_path("rt" + std::to_string(pw));
    write_matrix(pw, path, a, 3, 5);
    for (int pr : {1, 2, 4, 6}) {
      EXPECT_EQ(read_matrix(pr, path, true, 4), a);
      EXPECT_EQ(read_matrix(pr, path, false, 4), a);
    }
  }
}

TEST(Read, SequentialWholeFileAgrees) {
  const auto path = tmp_path("seq");
  const Dense a = random_matrix(6, 6, 4);
  write_matrix(4, path, a, 2, 100);
  const Dense whole = read_matrix(1, path, true, 1ULL << 28);
  EXPECT_EQ(read_matrix(4, path, false, 3), whole);
}

TEST(Read, BadHeadersNameTheField) {
  const auto path = tmp_path("bad");
  write_matrix(1, path, random_matrix(3, 3, 5), 2, 100);
  const auto good = slurp(path);
  auto expect_error = [&](std::size_t byte, char value, const std::string& field) {
    auto b = good;
    b[byte] = value;
    spit(path, b);
    try {
      read_matrix(2, path, true, 100);
      ADD_FAILURE() << field;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  expect_error(0, 'X', "magic");
  expect_error(4, 9, "version");
  expect_error(8, 9, "dtype");
  expect_error(12, 9, "order");
  auto t = good;
  t.resize(t.size() - 8);
  spit(path, t);
  EXPECT_THROW(read_matrix(2, path, true, 100), FormatError);
}

TEST(Read, MissingFileIsIoError) {
  EXPECT_THROW(read_matrix(2, tmp_path("does_not_exist"), true, 10), IoError);
}

TEST(ResponseFile, RecordsRoundTrip) {
  const auto path = tmp_path("response");
  SolverConfig cfg;
  cfg.n_wu = cfg.n_wv = 3;
  cfg.n_pu = cfg.n_pv = 2;
  cfg.n_harm = 1;
  cfg.nb = 2;
  comm::run(4, [&](comm::RankCtx& ctx) {
    auto r = solve_wall_response(ctx, cfg);
    pio::write_response(ctx, path, r, 5);
    auto recs = pio::scan_records(ctx, path);
    ASSERT_EQ(recs.size(), pio::response_record_names().size());
    const Dense g = gather_all(ctx, pio::read_striped(ctx, path, true, 5, recs[0].offset));
    ASSERT_EQ(g.cols(), 1);
    for (Index i = 0; i < g.rows(); ++i) EXPECT_EQ(g(i, 0), r.gamma[static_cast<std::size_t>(i)]);
    const BlockCyclicMatrix* mats[] = {&r.a_ye, &r.a_ey, &r.d_ee, &r.s_ww_inv};
    for (std::size_t k = 0; k < 4; ++k) {
      const Dense back = gather_all(ctx, pio::read_striped(ctx, path, k % 2 == 0, 3, recs[k + 1].offset));
      EXPECT_EQ(back, gather_all(ctx, *mats[k]));
    }
  });
}
