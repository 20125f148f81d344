#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "wallresp/comm.hpp"
#include "wallresp/dmat.hpp"
#include "wallresp/types.hpp"

namespace wallresp {

/// Triangulated surface. Potentials coincide with vertices, so `ipot` equals
/// `tri2vert`; both are kept because the assembly loops are written against
/// the potential map. Potential indices are stored 0-based: the global
/// matrix row of corner (i, k) is ipot[i][k] + 1 in 1-based terms.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<Index, 3>> tri2vert;
  std::vector<std::array<Index, 3>> ipot;
  /// edge[i][k] = vertex[k+2] - vertex[k+1] (corner indices mod 3); the three
  /// edges of a triangle sum to zero.
  std::vector<std::array<Vec3, 3>> edge;
  std::vector<Vec3> centroid;
  std::vector<double> area;
  /// Poloidal and toroidal angle of each potential point.
  std::vector<double> theta;
  std::vector<double> phi;
  Index npot = 0;

  Index ntri() const { return static_cast<Index>(tri2vert.size()); }
};

/// Builds a mesh from explicit geometry. Angles default to
/// theta = atan2(z, hypot(x, y)), phi = atan2(y, x).
TriMesh make_mesh(std::vector<Vec3> vertices, std::vector<std::array<Index, 3>> triangles,
                  std::vector<double> theta = {}, std::vector<double> phi = {});

/// Periodic n_u (poloidal) x n_v (toroidal) torus: 2*n_u*n_v triangles and
/// n_u*n_v potentials. Vertex (iu, iv) has potential index iu*n_v + iv.
TriMesh generate_torus_mesh(Index n_u, Index n_v, double major_radius, double minor_radius);

/// Displaces every vertex by a uniform random vector in [-amp, amp]^3 and
/// recomputes derived geometry. Deterministic for a given seed.
TriMesh jitter_mesh(const TriMesh& mesh, double amplitude, std::uint64_t seed);

/// Plain-text dump: vertex list then triangle list (0-based potentials).
void write_mesh(std::ostream& os, const TriMesh& mesh);

/// Pairwise interaction kernel k(meshA, i, meshB, i1).
struct PairKernel {
  std::function<double(const TriMesh&, Index, const TriMesh&, Index)> eval;
  bool symmetric = false;
};

/// Inverse multiquadric of the centroid distance, 1/sqrt(|c_i - c_i1|^2 + h^2).
double induct_kernel_surrogate(const TriMesh& a, Index i, const TriMesh& b, Index i1, double h);
PairKernel surrogate_kernel(double h);

struct AssemblyStats {
  std::uint64_t kernel_evals = 0;    // individual kernel calls
  std::uint64_t pairs_visited = 0;   // (i, i1) triangle pairs with an owned entry
};

/// Matrix-free pairwise assembly into `out` (meshA.npot x meshB.npot).
/// Each rank loops over all triangle pairs, filters by ownership of the
/// target rows and columns, and only then evaluates the kernel (twice per
/// pair, averaged as 0.5*(k(A,i,B,i1) + k(B,i1,A,i))). With `edge_weighted`
/// the contribution is scaled by edge_A(i,k) . edge_B(i1,k1). The dense
/// ntri x ntri kernel matrix is never formed.
AssemblyStats assemble_pairwise(const TriMesh& a, const TriMesh& b, const PairKernel& kernel,
                                bool edge_weighted, BlockCyclicMatrix& out);

/// Column index of the cos column for boundary element `bnd` and harmonic
/// m (1-based); the sin column follows it.
inline Index harmonic_column(Index bnd, Index m, Index n_harm) {
  return 2 * (bnd * n_harm + (m - 1));
}

/// npot x (2*n_harm*n_bnd) surrogate boundary coupling:
/// cos(m*theta_j)*w_b(phi_j) and sin(m*theta_j)*w_b(phi_j) with
/// w_b(phi) = cos(b*phi).
void assemble_harmonic(const TriMesh& mesh, Index n_harm, Index n_bnd, BlockCyclicMatrix& out);

/// npot x npot lumped-mass resistance surrogate,
/// sum_i eta_i * area_i * (1 + delta_kk1) / 12. `eta` holds one value per
/// triangle. Throws NotPositiveDefinite if the result fails Cholesky.
void assemble_resistance(comm::RankCtx& ctx, const TriMesh& mesh, std::span<const double> eta,
                         BlockCyclicMatrix& out, bool verify_spd = true);

/// Adds mu*I with mu = scale * trace(A) / n and returns mu. Collective.
double add_ridge(comm::RankCtx& ctx, BlockCyclicMatrix& a, double scale);

}  // namespace wallresp
