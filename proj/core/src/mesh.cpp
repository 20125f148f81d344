#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "wallresp/assemble.hpp"

namespace wallresp {

namespace {

void finish_geometry(TriMesh& m) {
  const auto nt = static_cast<std::size_t>(m.ntri());
  m.ipot = m.tri2vert;
  m.edge.resize(nt);
  m.centroid.resize(nt);
  m.area.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    std::array<Vec3, 3> v;
    for (int k = 0; k < 3; ++k) v[k] = m.vertices[static_cast<std::size_t>(m.tri2vert[i][k])];
    for (int k = 0; k < 3; ++k) m.edge[i][k] = v[(k + 2) % 3] - v[(k + 1) % 3];
    m.centroid[i] = (v[0] + v[1] + v[2]) / 3.0;
    m.area[i] = 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm();
  }
}

}  // namespace

TriMesh make_mesh(std::vector<Vec3> vertices, std::vector<std::array<Index, 3>> triangles,
                  std::vector<double> theta, std::vector<double> phi) {
  const auto nv = static_cast<Index>(vertices.size());
  std::vector<bool> used(vertices.size(), false);
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (Index v : triangles[i]) {
      if (v < 0 || v >= nv) {
        throw std::invalid_argument("mesh: triangle " + std::to_string(i) + " references vertex " +
                                    std::to_string(v) + " of " + std::to_string(nv));
      }
      used[static_cast<std::size_t>(v)] = true;
    }
  }
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (!used[v]) {
      throw std::invalid_argument("mesh: vertex " + std::to_string(v) +
                                  " is not referenced by any triangle");
    }
  }
  if ((!theta.empty() && theta.size() != vertices.size()) ||
      (!phi.empty() && phi.size() != vertices.size())) {
    throw std::invalid_argument("mesh: angle arrays must have one entry per vertex");
  }
  if (theta.empty()) {
    for (const auto& p : vertices) theta.push_back(std::atan2(p.z(), std::hypot(p.x(), p.y())));
  }
  if (phi.empty()) {
    for (const auto& p : vertices) phi.push_back(std::atan2(p.y(), p.x()));
  }

  TriMesh m;
  m.vertices = std::move(vertices);
  m.tri2vert = std::move(triangles);
  m.theta = std::move(theta);
  m.phi = std::move(phi);
  m.npot = nv;
  finish_geometry(m);
  return m;
}

TriMesh generate_torus_mesh(Index n_u, Index n_v, double major_radius, double minor_radius) {
  if (n_u < 1 || n_v < 1) {
    throw std::invalid_argument("torus mesh: n_u and n_v must be positive, got " +
                                std::to_string(n_u) + "x" + std::to_string(n_v));
  }
  if (!(minor_radius > 0.0) || !(major_radius > minor_radius)) {
    throw std::invalid_argument("torus mesh: need 0 < minor radius < major radius");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<Vec3> verts;
  std::vector<double> theta, phi;
  for (Index iu = 0; iu < n_u; ++iu) {
    for (Index iv = 0; iv < n_v; ++iv) {
      const double t = two_pi * static_cast<double>(iu) / static_cast<double>(n_u);
      const double p = two_pi * static_cast<double>(iv) / static_cast<double>(n_v);
      const double r = major_radius + minor_radius * std::cos(t);
      verts.emplace_back(r * std::cos(p), r * std::sin(p), minor_radius * std::sin(t));
      theta.push_back(t);
      phi.push_back(p);
    }
  }
  auto idx = [&](Index iu, Index iv) { return (iu % n_u) * n_v + (iv % n_v); };
  std::vector<std::array<Index, 3>> tris;
  tris.reserve(static_cast<std::size_t>(2 * n_u * n_v));
  for (Index iu = 0; iu < n_u; ++iu) {
    for (Index iv = 0; iv < n_v; ++iv) {
      const Index v00 = idx(iu, iv), v10 = idx(iu + 1, iv);
      const Index v11 = idx(iu + 1, iv + 1), v01 = idx(iu, iv + 1);
      tris.push_back({v00, v10, v11});
      tris.push_back({v00, v11, v01});
    }
  }
  return make_mesh(std::move(verts), std::move(tris), std::move(theta), std::move(phi));
}

TriMesh jitter_mesh(const TriMesh& mesh, double amplitude, std::uint64_t seed) {
  TriMesh m = mesh;
  if (amplitude == 0.0) return m;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (auto& v : m.vertices) {
    const double dx = u(rng), dy = u(rng), dz = u(rng);
    v += Vec3(dx, dy, dz);
  }
  finish_geometry(m);
  return m;
}

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  const auto old = os.precision(17);
  os << "vertices " << mesh.vertices.size() << "\n";
  for (const auto& v : mesh.vertices) os << v.x() << ' ' << v.y() << ' ' << v.z() << "\n";
  os << "triangles " << mesh.tri2vert.size() << "\n";
  for (const auto& t : mesh.tri2vert) os << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  os.precision(old);
}

}  // namespace wallresp
