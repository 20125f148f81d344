#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace wallresp {

/// Global and local matrix indices. 64-bit so that production sizes
/// (500,000 triangles, 250,000 potentials) and their squares fit.
using Index = std::int64_t;

/// Dense local storage for tiles, panels and root-side reference copies.
using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

}  // namespace wallresp
