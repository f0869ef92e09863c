#include "prcorr/solver.hpp"

#include <cmath>
#include <limits>

namespace prcorr {

Eigen::MatrixXd geometry_matrix(const EcefPoint& approx,
                                const std::vector<EcefPoint>& sats) {
  const Eigen::Vector3d p = approx.vec();
  Eigen::MatrixXd g(static_cast<Eigen::Index>(sats.size()), 4);
  for (Eigen::Index n = 0; n < g.rows(); ++n) {
    const Eigen::Vector3d d = p - sats[static_cast<std::size_t>(n)].vec();
    const double r = d.norm();
    if (r < 1e-6) {
      throw SolverError("geometry_matrix: receiver coincides with satellite " +
                        std::to_string(n));
    }
    g.row(n) << d.x() / r, d.y() / r, d.z() / r, 1.0;
  }
  return g;
}

Eigen::MatrixXd weighted_pseudoinverse(const Eigen::MatrixXd& geometry,
                                       const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd a = weights.asDiagonal() * geometry;  // W G, M x 4
  const Eigen::Matrix4d ata = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(ata);
  const double emin = eig.eigenvalues().minCoeff();
  const double emax = eig.eigenvalues().maxCoeff();
  // Condition of A is sqrt of the normal-matrix condition.
  if (emin <= 0.0 || std::sqrt(emax / emin) > 1e12) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s(0) <= 0.0 || s(0) / s(s.size() - 1) > 1e12) {
      throw SolverError("wls: singular satellite geometry (condition > 1e12)");
    }
    return svd.solve(Eigen::MatrixXd(weights.asDiagonal())).eval();
  }
  return ata.ldlt().solve(a.transpose() * weights.asDiagonal().toDenseMatrix());
}

std::pair<NavSolution, GeometrySolve> wls_solve(const MeasurementSet& epoch,
                                                const NavSolution& init) {
  const Eigen::Index m = static_cast<Eigen::Index>(epoch.obs.size());
  if (m < 4) {
    throw SolverError("wls: underdetermined epoch, " + std::to_string(m) +
                      " satellites (need >= 4)");
  }

  std::vector<EcefPoint> sats;
  Eigen::VectorXd rho(m), w(m);
  std::vector<int> svids;
  sats.reserve(epoch.obs.size());
  for (Eigen::Index n = 0; n < m; ++n) {
    const auto& o = epoch.obs[static_cast<std::size_t>(n)];
    sats.push_back(o.sat_pos);
    rho(n) = o.pr_m;
    w(n) = 1.0 / o.pr_sigma_m;
    svids.push_back(o.svid);
  }

  Eigen::Vector3d pos = init.pos.vec();
  double clk = init.clock_bias_m;
  NavSolution sol;
  GeometrySolve geom;
  double last_dx = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= 20; ++iter) {
    const Eigen::MatrixXd g = geometry_matrix(EcefPoint::from(pos), sats);
    Eigen::VectorXd drho(m);
    for (Eigen::Index n = 0; n < m; ++n) {
      drho(n) = rho(n) - (pos - sats[static_cast<std::size_t>(n)].vec()).norm() - clk;
    }
    // pinv is (WG)^+ W, so it applies directly to the raw residuals.
    const Eigen::MatrixXd pinv = weighted_pseudoinverse(g, w);
    const Eigen::Vector4d dx = pinv * drho;
    pos += dx.head<3>();
    clk += dx(3);
    sol.iterations = iter;
    const double prev_dx = last_dx;
    last_dx = dx.norm();
    // Iterate past the 1e-4 accuracy requirement down to numerical noise so
    // algebraic invariants (common-bias absorption) hold tightly. Near the
    // fixed point the step bottoms out at the rounding error of a 2.6e7 m
    // range (a few nm) and stops shrinking; treat that stall as converged.
    if (last_dx < 1e-10 || (last_dx < 1e-4 && last_dx >= 0.5 * prev_dx)) break;
  }
  sol.converged = last_dx < 1e-4;

  // Byproducts at the final iterate.
  geom.geometry = geometry_matrix(EcefPoint::from(pos), sats);
  const Eigen::MatrixXd s = weighted_pseudoinverse(geom.geometry, w);
  geom.weights = w;
  geom.h_row = s.row(3).transpose();
  geom.svids = svids;
  geom.residuals.resize(m);
  for (Eigen::Index n = 0; n < m; ++n) {
    geom.residuals(n) =
        rho(n) - (pos - sats[static_cast<std::size_t>(n)].vec()).norm() - clk;
  }
  sol.pos = EcefPoint::from(pos);
  sol.clock_bias_m = clk;
  return {sol, geom};
}

Eigen::Vector4d wls_state_error_predict(const GeometrySolve& geom,
                                        const Eigen::VectorXd& eps) {
  if (eps.size() != geom.geometry.rows()) {
    throw SolverError("wls_state_error_predict: eps dimension mismatch");
  }
  const Eigen::MatrixXd s = weighted_pseudoinverse(geom.geometry, geom.weights);
  return -(s * eps);
}

}  // namespace prcorr
