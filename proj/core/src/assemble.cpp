#include <cmath>
#include <stdexcept>
#include <string>

#include "wallresp/assemble.hpp"
#include "wallresp/error.hpp"
#include "wallresp/linalg.hpp"

namespace wallresp {

double induct_kernel_surrogate(const TriMesh& a, Index i, const TriMesh& b, Index i1, double h) {
  const Vec3 d = a.centroid[static_cast<std::size_t>(i)] - b.centroid[static_cast<std::size_t>(i1)];
  return 1.0 / std::sqrt(d.squaredNorm() + h * h);
}

PairKernel surrogate_kernel(double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("surrogate kernel: regularization length must be positive, got " +
                                std::to_string(h));
  }
  return {[h](const TriMesh& a, Index i, const TriMesh& b, Index i1) {
            return induct_kernel_surrogate(a, i, b, i1, h);
          },
          true};
}

namespace {

// Owned corners of each triangle: (corner, local index) pairs.
struct Corner {
  int k;
  Index local;
};

std::vector<std::vector<Corner>> owned_corners(const TriMesh& m, Index block, int p, int nprocs) {
  std::vector<std::vector<Corner>> out(m.ipot.size());
  for (std::size_t i = 0; i < m.ipot.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const Index g = m.ipot[i][k];
      if (bc::owner(g, block, nprocs) == p) out[i].push_back({k, bc::to_local(g, block, nprocs)});
    }
  }
  return out;
}

}  // namespace

AssemblyStats assemble_pairwise(const TriMesh& a, const TriMesh& b, const PairKernel& kernel,
                                bool edge_weighted, BlockCyclicMatrix& out) {
  if (out.rows() != a.npot || out.cols() != b.npot) {
    throw DimensionMismatch("assemble_pairwise: output is " + std::to_string(out.rows()) + "x" +
                            std::to_string(out.cols()) + ", meshes need " +
                            std::to_string(a.npot) + "x" + std::to_string(b.npot));
  }
  const auto& d = out.desc();
  const auto rows = owned_corners(a, d.mb, d.grid.my_row, d.grid.rows);
  const auto cols = owned_corners(b, d.nb, d.grid.my_col, d.grid.cols);
  Dense& loc = out.local();
  AssemblyStats st;

  for (Index i = 0; i < a.ntri(); ++i) {
    const auto& ri = rows[static_cast<std::size_t>(i)];
    if (ri.empty()) continue;
    for (Index i1 = 0; i1 < b.ntri(); ++i1) {
      const auto& ci = cols[static_cast<std::size_t>(i1)];
      if (ci.empty()) continue;
      ++st.pairs_visited;
      const double sum = kernel.eval(a, i, b, i1) + kernel.eval(b, i1, a, i);
      st.kernel_evals += 2;
      for (const auto& r : ri) {
        for (const auto& c : ci) {
          double w = 0.5;
          if (edge_weighted) {
            w *= a.edge[static_cast<std::size_t>(i)][r.k].dot(b.edge[static_cast<std::size_t>(i1)][c.k]);
          }
          loc(r.local, c.local) += w * sum;
        }
      }
    }
  }
  return st;
}

void assemble_harmonic(const TriMesh& mesh, Index n_harm, Index n_bnd, BlockCyclicMatrix& out) {
  if (n_harm < 1 || n_bnd < 1) {
    throw std::invalid_argument("assemble_harmonic: n_harm and n_bnd must be positive");
  }
  if (out.rows() != mesh.npot || out.cols() != 2 * n_harm * n_bnd) {
    throw DimensionMismatch("assemble_harmonic: output is " + std::to_string(out.rows()) + "x" +
                            std::to_string(out.cols()) + ", expected " +
                            std::to_string(mesh.npot) + "x" + std::to_string(2 * n_harm * n_bnd));
  }
  out.for_each_owned([&](Index j, Index c, double& v) {
    const Index per = 2 * n_harm;
    const Index bnd = c / per;
    const Index m = (c % per) / 2 + 1;
    const double t = static_cast<double>(m) * mesh.theta[static_cast<std::size_t>(j)];
    const double w = std::cos(static_cast<double>(bnd) * mesh.phi[static_cast<std::size_t>(j)]);
    v = (c % 2 == 0 ? std::cos(t) : std::sin(t)) * w;
  });
}

void assemble_resistance(comm::RankCtx& ctx, const TriMesh& mesh, std::span<const double> eta,
                         BlockCyclicMatrix& out, bool verify_spd) {
  if (static_cast<Index>(eta.size()) != mesh.ntri()) {
    throw DimensionMismatch("assemble_resistance: " + std::to_string(eta.size()) +
                            " resistivities for " + std::to_string(mesh.ntri()) + " triangles");
  }
  if (out.rows() != mesh.npot || out.cols() != mesh.npot) {
    throw DimensionMismatch("assemble_resistance: output is " + std::to_string(out.rows()) + "x" +
                            std::to_string(out.cols()) + ", expected " +
                            std::to_string(mesh.npot) + "x" + std::to_string(mesh.npot));
  }
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (!(eta[i] > 0.0)) {
      throw std::invalid_argument("assemble_resistance: eta of triangle " + std::to_string(i) +
                                  " is not positive");
    }
  }
  const auto& d = out.desc();
  const auto rows = owned_corners(mesh, d.mb, d.grid.my_row, d.grid.rows);
  const auto cols = owned_corners(mesh, d.nb, d.grid.my_col, d.grid.cols);
  Dense& loc = out.local();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double s = eta[i] * mesh.area[i] / 12.0;
    for (const auto& r : rows[i]) {
      for (const auto& c : cols[i]) loc(r.local, c.local) += (r.k == c.k ? 2.0 : 1.0) * s;
    }
  }
  if (verify_spd) {
    BlockCyclicMatrix l = out;
    try {
      cholesky_factor(ctx, l);
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(
          "resistance matrix is not positive definite (degenerate geometry?): " +
              std::string(e.what()),
          e.pivot());
    }
  }
}

double add_ridge(comm::RankCtx& ctx, BlockCyclicMatrix& a, double scale) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("add_ridge: matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  double local_trace = 0.0;
  a.for_each_owned([&](Index i, Index j, double& v) {
    if (i == j) local_trace += v;
  });
  const double one[] = {local_trace};
  const double trace = ctx.allreduce_sum(one).at(0);
  const double mu = a.rows() > 0 ? scale * trace / static_cast<double>(a.rows()) : 0.0;
  a.for_each_owned([&](Index i, Index j, double& v) {
    if (i == j) v += mu;
  });
  return mu;
}

}  // namespace wallresp
