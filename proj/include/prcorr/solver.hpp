#ifndef PRCORR_SOLVER_HPP
#define PRCORR_SOLVER_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "prcorr/ingest.hpp"

namespace prcorr {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NavSolution {
  EcefPoint pos;
  double clock_bias_m = 0.0;  // receiver clock offset expressed in meters
  int iterations = 0;
  bool converged = false;
};

// Geometry byproducts of a WLS solve at the final iterate.
struct GeometrySolve {
  Eigen::MatrixXd geometry;        // M x 4, rows [a_x a_y a_z 1]
  Eigen::VectorXd weights;         // M, diagonal of W (1 / pr_sigma_m)
  Eigen::VectorXd h_row;           // last row of (WG)^+ W
  std::vector<int> svids;          // row order
  Eigen::VectorXd residuals;       // post-fit pseudorange residuals
};

// Row n = [(x~ - x_n)/r, (y~ - y_n)/r, (z~ - z_n)/r, 1].
Eigen::MatrixXd geometry_matrix(const EcefPoint& approx,
                                const std::vector<EcefPoint>& sats);

// Gauss-Newton iteration, stop at |dX| < 1e-4 m or 20 iterations.
std::pair<NavSolution, GeometrySolve> wls_solve(const MeasurementSet& epoch,
                                                const NavSolution& init = {});

// Eq. of first-order state error: -(WG)^+ W * eps.
Eigen::Vector4d wls_state_error_predict(const GeometrySolve& geom,
                                        const Eigen::VectorXd& eps);

// (WG)^+ W as a 4 x M matrix (normal equations, SVD fallback).
Eigen::MatrixXd weighted_pseudoinverse(const Eigen::MatrixXd& geometry,
                                       const Eigen::VectorXd& weights);

}  // namespace prcorr

#endif
