#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "smpc/mpc.hpp"

namespace fx {

using smpc::ConstraintSpec;
using smpc::DisturbanceModel;
using smpc::LinearSystem;

inline LinearSystem dcdc() {
  LinearSystem s;
  s.A.resize(2, 2);
  s.A << 1.0, 0.0075, -0.143, 0.996;
  s.B.resize(2, 1);
  s.B << 4.798, 0.115;
  s.Bw = Eigen::MatrixXd::Identity(2, 2);
  return s;
}

inline DisturbanceModel dcdc_noise(double scale = 1.0) {
  return DisturbanceModel::truncated_gaussian(Eigen::MatrixXd::Identity(2, 2) / 625.0 * scale * scale,
                                              0.02 * scale * scale, 8);
}

inline Eigen::MatrixXd Q() { return Eigen::Vector2d(1.0, 10.0).asDiagonal(); }
inline Eigen::MatrixXd R() { return Eigen::MatrixXd::Identity(1, 1); }

/// x1 <= 2 at 0.8, no inputs.
inline ConstraintSpec single_row() {
  ConstraintSpec c;
  c.H.resize(1, 2);
  c.H << 1, 0;
  c.h = Eigen::VectorXd::Constant(1, 2.0);
  c.eps = Eigen::VectorXd::Constant(1, 0.2);
  c.G.resize(0, 1);
  c.g.resize(0);
  c.eps_u = 0.05;
  c.eps_T = 0.05;
  c.T = 8;
  return c;
}

/// |x1| <= 2, |x2| <= 3 at 0.8, |u| <= 0.2.
inline ConstraintSpec box_rows() {
  ConstraintSpec c;
  c.H.resize(4, 2);
  c.H << 1, 0, -1, 0, 0, 1, 0, -1;
  c.h.resize(4);
  c.h << 2, 2, 3, 3;
  c.eps = Eigen::VectorXd::Constant(4, 0.2);
  c.G.resize(2, 1);
  c.G << 1, -1;
  c.g = Eigen::VectorXd::Constant(2, 0.2);
  c.eps_u = 0.05;
  c.eps_T = 0.05;
  c.T = 8;
  return c;
}

/// Random bounded full-dimensional polytope: a box cut by random halfspaces
/// that keep the origin strictly inside.
inline smpc::Polytope random_polytope(std::mt19937_64& rng, int dim, int extra_rows) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), r(0.3, 2.0);
  Eigen::MatrixXd F(2 * dim + extra_rows, dim);
  Eigen::VectorXd f(F.rows());
  for (int i = 0; i < dim; ++i) {
    F.row(2 * i).setZero();
    F(2 * i, i) = 1.0;
    f[2 * i] = r(rng);
    F.row(2 * i + 1).setZero();
    F(2 * i + 1, i) = -1.0;
    f[2 * i + 1] = r(rng);
  }
  for (int k = 0; k < extra_rows; ++k) {
    for (int i = 0; i < dim; ++i) F(2 * dim + k, i) = u(rng);
    f[2 * dim + k] = r(rng) * 0.8;
  }
  return smpc::Polytope(F, f);
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = u(rng);
  return M;
}

}  // namespace fx
