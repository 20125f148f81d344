#include <chrono>
#include <cmath>
#include <functional>
#include <string>

#include "wallresp/error.hpp"
#include "wallresp/pipeline.hpp"

namespace wallresp {

void SolverConfig::validate() const {
  auto positive = [](Index v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(n_wu, "n_wu");
  positive(n_wv, "n_wv");
  positive(n_pu, "n_pu");
  positive(n_pv, "n_pv");
  positive(n_harm, "n_harm");
  positive(n_bnd, "n_bnd");
  positive(nb, "nb");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(h > 0.0)) throw ConfigError("h must be positive");
  if (!(ridge >= 0.0)) throw ConfigError("ridge must be non-negative");
  if (chunk_limit < 1) throw ConfigError("chunk_limit must be >= 1");
  if (!(wall_minor > 0.0 && wall_major > wall_minor)) {
    throw ConfigError("wall radii need 0 < minor < major");
  }
  if (!(plasma_minor > 0.0 && plasma_major > plasma_minor)) {
    throw ConfigError("plasma radii need 0 < minor < major");
  }
  if (!(jitter >= 0.0)) throw ConfigError("jitter must be non-negative");
}

ProblemSizes ProblemSizes::of(const SolverConfig& cfg) {
  ProblemSizes s{};
  s.ntri_w = 2 * cfg.n_wu * cfg.n_wv;
  s.npot_w = cfg.n_wu * cfg.n_wv;
  s.ntri_p = 2 * cfg.n_pu * cfg.n_pv;
  s.npot_p = cfg.n_pu * cfg.n_pv;
  s.nd_w = s.npot_w;
  s.nd_bez = 2 * cfg.n_harm * cfg.n_bnd;
  return s;
}

Meshes make_meshes(const SolverConfig& cfg) {
  Meshes m{generate_torus_mesh(cfg.n_wu, cfg.n_wv, cfg.wall_major, cfg.wall_minor),
           generate_torus_mesh(cfg.n_pu, cfg.n_pv, cfg.plasma_major, cfg.plasma_minor)};
  if (cfg.jitter > 0.0) {
    m.wall = jitter_mesh(m.wall, cfg.jitter, cfg.seed);
    m.plasma = jitter_mesh(m.plasma, cfg.jitter, cfg.seed + 1);
  }
  return m;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "matrix_pp",      "matrix_wp",      "matrix_ww",      "matrix_rw",
      "matrix_pe",      "matrix_ep",      "matrix_ew",      "a_pwe_rhs",
      "cholesky_solver", "a_ee_computing", "a_ew_computing", "a_we_computing",
      "matrix_multiplication", "eigensolver", "a_ye_computing", "a_ey_computing",
      "d_ee_computing", "s_ww_inverse"};
  return names;
}

BlockCyclicMatrix build_a_pwe(comm::RankCtx& ctx, const BlockCyclicMatrix& a_pp,
                              const BlockCyclicMatrix& a_wp, const BlockCyclicMatrix& a_pe) {
  BlockCyclicMatrix a_pw = dist_transpose(ctx, a_wp);
  BlockCyclicMatrix rhs =
      hconcat(ctx, a_pw, a_pe, like(a_pp.desc(), a_pp.rows(), a_pw.cols() + a_pe.cols()));
  return cholesky_solve(ctx, a_pp, rhs);
}

namespace {

struct Split {
  BlockCyclicMatrix x_w;
  BlockCyclicMatrix x_e;
};

Split split_a_pwe(comm::RankCtx& ctx, const BlockCyclicMatrix& a_pwe, Index nd_w) {
  const Index m = a_pwe.rows();
  return {copy_block(ctx, a_pwe, 0, 0, like(a_pwe.desc(), m, nd_w)),
          copy_block(ctx, a_pwe, 0, nd_w, like(a_pwe.desc(), m, a_pwe.cols() - nd_w))};
}

bool has_nonfinite(const BlockCyclicMatrix& a) { return !a.local().allFinite(); }

class StageRunner {
 public:
  StageRunner(comm::RankCtx& ctx, SolveReport* report) : ctx_(ctx), report_(report) {}

  void track(std::initializer_list<const BlockCyclicMatrix*> ms) {
    resident_.insert(resident_.end(), ms.begin(), ms.end());
  }

  void operator()(const std::string& name, const std::function<void()>& body,
                  std::initializer_list<const BlockCyclicMatrix*> outputs) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const comm::CollectiveError&) {
      throw;
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    bool bad = false;
    for (const auto* m : outputs) bad = bad || has_nonfinite(*m);
    if (ctx_.allreduce_or(bad)) throw StageError(name, "non-finite values in stage output");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::uint64_t bytes = 0;
    for (const auto* m : resident_) bytes += m->local_bytes();
    const double max_secs = ctx_.allreduce_max(secs);
    const std::uint64_t max_bytes = ctx_.allreduce_max(bytes);
    if (report_) report_->stages.push_back({name, max_secs, max_bytes});
  }

 private:
  comm::RankCtx& ctx_;
  SolveReport* report_;
  std::vector<const BlockCyclicMatrix*> resident_;
};

}  // namespace

Products compute_products(comm::RankCtx& ctx, const BlockCyclicMatrix& a_ep,
                          BlockCyclicMatrix a_ew, const BlockCyclicMatrix& a_wp,
                          BlockCyclicMatrix a_ww, const BlockCyclicMatrix& a_pwe) {
  const Index nd_w = a_ww.cols();
  Split x = split_a_pwe(ctx, a_pwe, nd_w);
  Products p;
  p.a_ee = BlockCyclicMatrix(like(a_ep.desc(), a_ep.rows(), x.x_e.cols()));
  dist_gemm(ctx, 1.0, a_ep, x.x_e, 0.0, p.a_ee);
  p.a_ew = std::move(a_ew);
  dist_gemm(ctx, -1.0, a_ep, x.x_w, 1.0, p.a_ew);
  p.a_we = BlockCyclicMatrix(like(a_wp.desc(), a_wp.rows(), x.x_e.cols()));
  dist_gemm(ctx, 1.0, a_wp, x.x_e, 0.0, p.a_we);
  p.m_ww = std::move(a_ww);
  dist_gemm(ctx, -1.0, a_wp, x.x_w, 1.0, p.m_ww);
  return p;
}

namespace {

BlockCyclicMatrix response_a_ye(comm::RankCtx& ctx, const EigResult& eig,
                                const BlockCyclicMatrix& a_we) {
  BlockCyclicMatrix st = dist_transpose(ctx, eig.s);
  BlockCyclicMatrix a_ye(like(a_we.desc(), st.rows(), a_we.cols()));
  dist_gemm(ctx, 1.0, st, a_we, 0.0, a_ye);
  try {
    row_scale(a_ye, eig.gamma);
  } catch (const ZeroDivisor& e) {
    throw ZeroDivisor("eigenvalue gamma of mode " + std::to_string(e.row()) + " is zero",
                      e.row());
  }
  return a_ye;
}

BlockCyclicMatrix product(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                          const BlockCyclicMatrix& b) {
  BlockCyclicMatrix c(like(a.desc(), a.rows(), b.cols()));
  dist_gemm(ctx, 1.0, a, b, 0.0, c);
  return c;
}

}  // namespace

ResponseSet compute_response(comm::RankCtx& ctx, EigResult eig, const BlockCyclicMatrix& a_ew,
                             const BlockCyclicMatrix& a_we) {
  ResponseSet r;
  r.a_ye = response_a_ye(ctx, eig, a_we);
  r.a_ey = product(ctx, a_ew, eig.s);
  r.d_ee = product(ctx, r.a_ey, r.a_ye);
  r.s_ww_inv = invert(ctx, eig.s);
  r.gamma = std::move(eig.gamma);
  r.s_ww = std::move(eig.s);
  return r;
}

ResponseSet solve_wall_response(comm::RankCtx& ctx, const SolverConfig& cfg,
                                SolveReport* report) {
  cfg.validate();
  const Meshes meshes = make_meshes(cfg);
  const auto sz = ProblemSizes::of(cfg);
  const PairKernel kernel = surrogate_kernel(cfg.h);
  auto desc = [&](Index m, Index n) { return make_desc(m, n, cfg.nb, cfg.nb, ctx.grid()); };

  SolveReport local_report;
  SolveReport& rep = report ? *report : local_report;
  rep.stages.clear();
  StageRunner stage(ctx, &rep);

  BlockCyclicMatrix a_pp, a_wp, a_ww, b_rw, a_pe, a_ep, a_ew, a_pw, rhs, a_pwe, a_ee, a_we;
  ResponseSet out;
  EigResult eig;
  stage.track({&a_pp, &a_wp, &a_ww, &b_rw, &a_pe, &a_ep, &a_ew, &a_pw, &rhs, &a_pwe, &a_ee,
               &a_we, &eig.s, &out.a_ye, &out.a_ey, &out.d_ee, &out.s_ww_inv});

  stage("matrix_pp", [&] {
    a_pp = BlockCyclicMatrix(desc(sz.npot_p, sz.npot_p));
    assemble_pairwise(meshes.plasma, meshes.plasma, kernel, true, a_pp);
    rep.ridge_pp = add_ridge(ctx, a_pp, cfg.ridge);
  }, {&a_pp});
  stage("matrix_wp", [&] {
    a_wp = BlockCyclicMatrix(desc(sz.npot_w, sz.npot_p));
    assemble_pairwise(meshes.wall, meshes.plasma, kernel, true, a_wp);
  }, {&a_wp});
  stage("matrix_ww", [&] {
    a_ww = BlockCyclicMatrix(desc(sz.npot_w, sz.npot_w));
    rep.assembly_ww = assemble_pairwise(meshes.wall, meshes.wall, kernel, true, a_ww);
  }, {&a_ww});
  stage("matrix_rw", [&] {
    b_rw = BlockCyclicMatrix(desc(sz.npot_w, sz.npot_w));
    const std::vector<double> eta(static_cast<std::size_t>(sz.ntri_w), cfg.eta);
    assemble_resistance(ctx, meshes.wall, eta, b_rw);
  }, {&b_rw});
  stage("matrix_pe", [&] {
    a_pe = BlockCyclicMatrix(desc(sz.npot_p, sz.nd_bez));
    assemble_harmonic(meshes.plasma, cfg.n_harm, cfg.n_bnd, a_pe);
  }, {&a_pe});
  stage("matrix_ep", [&] { a_ep = dist_transpose(ctx, a_pe); }, {&a_ep});
  stage("matrix_ew", [&] {
    BlockCyclicMatrix h(desc(sz.npot_w, sz.nd_bez));
    assemble_harmonic(meshes.wall, cfg.n_harm, cfg.n_bnd, h);
    a_ew = dist_transpose(ctx, h);
  }, {&a_ew});
  stage("a_pwe_rhs", [&] {
    a_pw = dist_transpose(ctx, a_wp);
    rhs = hconcat(ctx, a_pw, a_pe, desc(sz.npot_p, sz.nd_w + sz.nd_bez));
    a_pw = BlockCyclicMatrix();
  }, {&rhs});
  stage("cholesky_solver", [&] {
    a_pwe = cholesky_solve(ctx, a_pp, rhs);
    rhs = BlockCyclicMatrix();
  }, {&a_pwe});

  Split x;
  stage("a_ee_computing", [&] {
    x = split_a_pwe(ctx, a_pwe, sz.nd_w);
    a_ee = product(ctx, a_ep, x.x_e);
  }, {&a_ee});
  stage("a_ew_computing", [&] { dist_gemm(ctx, -1.0, a_ep, x.x_w, 1.0, a_ew); }, {&a_ew});
  stage("a_we_computing", [&] { a_we = product(ctx, a_wp, x.x_e); }, {&a_we});
  stage("matrix_multiplication", [&] {
    dist_gemm(ctx, -1.0, a_wp, x.x_w, 1.0, a_ww);
    x = Split{};
    rep.ridge_ww = add_ridge(ctx, a_ww, cfg.ridge);
  }, {&a_ww});
  stage("eigensolver", [&] { eig = generalized_eig(ctx, a_ww, b_rw); }, {&eig.s});
  for (double g : eig.gamma) {
    if (!std::isfinite(g)) throw StageError("eigensolver", "non-finite eigenvalue");
  }
  stage("a_ye_computing", [&] { out.a_ye = response_a_ye(ctx, eig, a_we); }, {&out.a_ye});
  stage("a_ey_computing", [&] { out.a_ey = product(ctx, a_ew, eig.s); }, {&out.a_ey});
  stage("d_ee_computing", [&] { out.d_ee = product(ctx, out.a_ey, out.a_ye); }, {&out.d_ee});
  stage("s_ww_inverse", [&] { out.s_ww_inv = invert(ctx, eig.s); }, {&out.s_ww_inv});

  out.gamma = std::move(eig.gamma);
  out.s_ww = std::move(eig.s);
  out.a_ee = std::move(a_ee);
  return out;
}

StripedMatrix update_response(comm::RankCtx& ctx, const StripedMatrix& a_ee,
                              const StripedMatrix& a_ey, const StripedMatrix& response_m_a) {
  const int p = ctx.size();
  StripedMatrix out = to_replicated(ctx, view(a_ee, p));
  dist_gemm(ctx, 1.0, view(a_ey, p), view(response_m_a, p), 1.0, view(out, p));
  return out;
}

}  // namespace wallresp
