#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wallresp/assemble.hpp"
#include "wallresp/comm.hpp"
#include "wallresp/dmat.hpp"
#include "wallresp/linalg.hpp"

namespace wallresp {

struct SolverConfig {
  Index n_wu = 8;
  Index n_wv = 8;
  Index n_pu = 6;
  Index n_pv = 6;
  Index n_harm = 2;
  Index n_bnd = 2;
  double eta = 1.0;
  Index nb = kDefaultBlockSize;
  double h = 0.1;
  double ridge = 1e-8;
  std::uint64_t chunk_limit = std::uint64_t{1} << 28;
  double wall_major = 3.0;
  double wall_minor = 1.2;
  double plasma_major = 3.0;
  double plasma_minor = 0.8;
  /// Vertex jitter amplitude applied to both meshes (0 keeps the exact torus).
  double jitter = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Problem dimensions implied by a config (ncoil = 0, so nd_w = npot_w).
struct ProblemSizes {
  Index ntri_w, npot_w, ntri_p, npot_p, nd_w, nd_bez;
  static ProblemSizes of(const SolverConfig& cfg);
};

struct Meshes {
  TriMesh wall;
  TriMesh plasma;
};
Meshes make_meshes(const SolverConfig& cfg);

struct ResponseSet {
  std::vector<double> gamma;
  BlockCyclicMatrix a_ye;      // nd_w x nd_bez
  BlockCyclicMatrix a_ey;      // nd_bez x nd_w
  BlockCyclicMatrix d_ee;      // nd_bez x nd_bez
  BlockCyclicMatrix s_ww;      // nd_w x nd_w eigenvectors
  BlockCyclicMatrix s_ww_inv;  // nd_w x nd_w
  BlockCyclicMatrix a_ee;      // nd_bez x nd_bez, used by update_response
};

struct StageTiming {
  std::string name;
  double seconds = 0.0;                 // max over ranks
  std::uint64_t peak_bytes_per_rank = 0;  // max over ranks of resident matrix bytes
};

struct SolveReport {
  std::vector<StageTiming> stages;
  AssemblyStats assembly_ww;
  double ridge_pp = 0.0;
  double ridge_ww = 0.0;
};

/// Stage names of solve_wall_response in execution order.
const std::vector<std::string>& stage_names();

/// The full response chain. Collective; every rank returns its share of
/// the distributed outputs and the replicated gamma. Failures inside a stage
/// surface as StageError carrying the stage name.
ResponseSet solve_wall_response(comm::RankCtx& ctx, const SolverConfig& cfg,
                                SolveReport* report = nullptr);

/// cholesky_solve(a_pp, [a_wp^T | a_pe]); npot_p x (nd_w + nd_bez).
BlockCyclicMatrix build_a_pwe(comm::RankCtx& ctx, const BlockCyclicMatrix& a_pp,
                              const BlockCyclicMatrix& a_wp, const BlockCyclicMatrix& a_pe);

struct Products {
  BlockCyclicMatrix a_ee;  // a_ep * X_e
  BlockCyclicMatrix a_ew;  // a_ew - a_ep * X_w
  BlockCyclicMatrix a_we;  // a_wp * X_e
  BlockCyclicMatrix m_ww;  // a_ww - a_wp * X_w
};

/// X_w, X_e are the first nd_w and the remaining columns of a_pwe.
Products compute_products(comm::RankCtx& ctx, const BlockCyclicMatrix& a_ep,
                          BlockCyclicMatrix a_ew, const BlockCyclicMatrix& a_wp,
                          BlockCyclicMatrix a_ww, const BlockCyclicMatrix& a_pwe);

/// a_ye = row_scale(S^T a_we, gamma), a_ey = a_ew' S, d_ee = a_ey a_ye,
/// s_ww_inv = S^-1. A zero gamma throws ZeroDivisor naming the mode.
ResponseSet compute_response(comm::RankCtx& ctx, EigResult eig, const BlockCyclicMatrix& a_ew,
                             const BlockCyclicMatrix& a_we);

/// response_m_e = a_ee + a_ey * response_m_a, replicated on every rank.
StripedMatrix update_response(comm::RankCtx& ctx, const StripedMatrix& a_ee,
                              const StripedMatrix& a_ey, const StripedMatrix& response_m_a);

struct MatrixFootprint {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::uint64_t bytes = 0;
  std::uint64_t max_rank_bytes = 0;
  bool allocated = true;  // false for matrices the matrix-free path never forms
};

struct MemoryPrediction {
  std::uint64_t total_bytes = 0;
  std::vector<std::uint64_t> per_rank_bytes;
  std::uint64_t max_rank_bytes = 0;
  std::vector<MatrixFootprint> matrices;
};

/// 8 bytes per element.
std::uint64_t matrix_bytes(Index m, Index n);

/// Fills bytes and per-rank figures for the given shapes (name, rows, cols,
/// allocated) distributed block-cyclically with nb x nb blocks.
MemoryPrediction predict_matrices(std::vector<MatrixFootprint> shapes, Index nb, int nranks);

/// Persistent-matrix footprint of the pipeline on P ranks with cfg.nb
/// blocking. Per-rank numbers use exact block-cyclic local extents, so they
/// sum to the total.
MemoryPrediction predict_memory(const SolverConfig& cfg, int nranks);

}  // namespace wallresp
