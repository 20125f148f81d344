#include <algorithm>

#include "wallresp/grid.hpp"
#include "wallresp/pipeline.hpp"

namespace wallresp {

std::uint64_t matrix_bytes(Index m, Index n) {
  return std::uint64_t{8} * static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n);
}

MemoryPrediction predict_matrices(std::vector<MatrixFootprint> shapes, Index nb, int nranks) {
  const ProcessGrid g = make_grid(nranks, 0);
  MemoryPrediction p;
  p.per_rank_bytes.assign(static_cast<std::size_t>(nranks), 0);
  for (auto& f : shapes) {
    f.bytes = matrix_bytes(f.rows, f.cols);
    f.max_rank_bytes = 0;
    for (int pr = 0; pr < g.rows; ++pr) {
      const Index lr = bc::count(f.rows, nb, pr, g.rows);
      for (int pc = 0; pc < g.cols; ++pc) {
        const std::uint64_t b = matrix_bytes(lr, bc::count(f.cols, nb, pc, g.cols));
        f.max_rank_bytes = std::max(f.max_rank_bytes, b);
        if (f.allocated) p.per_rank_bytes[static_cast<std::size_t>(g.rank_of(pr, pc))] += b;
      }
    }
    if (f.allocated) p.total_bytes += f.bytes;
  }
  p.max_rank_bytes = *std::max_element(p.per_rank_bytes.begin(), p.per_rank_bytes.end());
  p.matrices = std::move(shapes);
  return p;
}

MemoryPrediction predict_memory(const SolverConfig& cfg, int nranks) {
  cfg.validate();
  const auto s = ProblemSizes::of(cfg);
  std::vector<MatrixFootprint> m = {
      {"a_pp", s.npot_p, s.npot_p},  {"a_wp", s.npot_w, s.npot_p},
      {"a_ww", s.npot_w, s.npot_w},  {"b_rw", s.npot_w, s.npot_w},
      {"a_pe", s.npot_p, s.nd_bez},  {"a_ep", s.nd_bez, s.npot_p},
      {"a_ew", s.nd_bez, s.nd_w},    {"a_pwe", s.npot_p, s.nd_w + s.nd_bez},
      {"a_ee", s.nd_bez, s.nd_bez},  {"a_we", s.npot_w, s.nd_bez},
      {"s_ww", s.nd_w, s.nd_w},      {"gamma", s.nd_w, 1},
      {"a_ye", s.nd_w, s.nd_bez},    {"a_ey", s.nd_bez, s.nd_w},
      {"d_ee", s.nd_bez, s.nd_bez},  {"s_ww_inv", s.nd_w, s.nd_w},
      {"dima_w", s.ntri_w, s.ntri_w, 0, 0, false},
      {"dima_p", s.ntri_p, s.ntri_p, 0, 0, false},
  };
  return predict_matrices(std::move(m), cfg.nb, nranks);
}

}  // namespace wallresp
