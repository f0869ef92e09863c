#include "prcorr/estimators.hpp"

#include <cmath>

namespace prcorr {

namespace {

using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;

Mat8 transition_matrix(double dt) {
  Mat8 f = Mat8::Identity();
  f(0, 3) = dt;
  f(1, 4) = dt;
  f(2, 5) = dt;
  f(6, 7) = dt;
  return f;
}

Mat8 process_noise(double dt, const EstimatorConfig& cfg) {
  Mat8 q = Mat8::Zero();
  const double d3 = dt * dt * dt / 3.0;
  const double d2 = dt * dt / 2.0;
  for (int i = 0; i < 3; ++i) {
    q(i, i) = cfg.process_noise_vel * d3;
    q(i, i + 3) = q(i + 3, i) = cfg.process_noise_vel * d2;
    q(i + 3, i + 3) = cfg.process_noise_vel * dt;
  }
  q(6, 6) = cfg.process_noise_clk * d3;
  q(6, 7) = q(7, 6) = cfg.process_noise_clk * d2;
  q(7, 7) = cfg.process_noise_clk * dt;
  return q;
}

void check_pd(const Mat8& p, std::size_t epoch_index) {
  Eigen::SelfAdjointEigenSolver<Mat8> eig(p);
  if (eig.eigenvalues().minCoeff() <= -1e-9) {
    throw SolverError("ekf: covariance not positive definite at epoch " +
                      std::to_string(epoch_index));
  }
}

void measurement_update(const MeasurementSet& epoch, Vec8& x, Mat8& p,
                        std::size_t epoch_index) {
  const Eigen::Index m = static_cast<Eigen::Index>(epoch.obs.size());
  if (m < 4) {
    throw SolverError("ekf: epoch " + std::to_string(epoch_index) +
                      " has fewer than 4 satellites");
  }
  Eigen::MatrixXd h(m, 8);
  Eigen::VectorXd innov(m);
  Eigen::VectorXd rdiag(m);
  const Eigen::Vector3d pos = x.head<3>();
  for (Eigen::Index n = 0; n < m; ++n) {
    const auto& o = epoch.obs[static_cast<std::size_t>(n)];
    const Eigen::Vector3d d = pos - o.sat_pos.vec();
    const double r = d.norm();
    h.row(n).setZero();
    h.row(n).head<3>() = (d / r).transpose();
    h(n, 6) = 1.0;
    innov(n) = o.pr_m - (r + x(6));
    rdiag(n) = o.pr_sigma_m * o.pr_sigma_m;
  }
  const Eigen::MatrixXd s = h * p * h.transpose() + Eigen::MatrixXd(rdiag.asDiagonal());
  const Eigen::MatrixXd k = p * h.transpose() * s.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  x += k * innov;
  const Mat8 ikh = Mat8::Identity() - k * h;
  p = ikh * p * ikh.transpose() + k * Eigen::MatrixXd(rdiag.asDiagonal()) * k.transpose();
  p = 0.5 * (p + p.transpose()).eval();
  check_pd(p, epoch_index);
}

}  // namespace

std::vector<FilterState> ForwardPass::states() const {
  std::vector<FilterState> out;
  out.reserve(steps.size());
  for (const auto& s : steps) {
    FilterState fs;
    fs.time_ms = s.time_ms;
    fs.state = s.x_upd;
    fs.covariance = s.p_upd;
    out.push_back(fs);
  }
  return out;
}

ForwardPass ekf_forward(const std::vector<MeasurementSet>& trace,
                        const EstimatorConfig& config) {
  if (trace.empty()) {
    throw SolverError("ekf: empty trace");
  }
  // Initialize position/clock from a WLS fix on the first epoch.
  const auto [wls0, geom0] = wls_solve(trace.front());
  Vec8 x = Vec8::Zero();
  x.head<3>() = wls0.pos.vec();
  x(6) = wls0.clock_bias_m;
  Mat8 p = Mat8::Zero();
  const double ps = config.init_pos_sigma_m;
  p.diagonal() << ps * ps, ps * ps, ps * ps, 100.0, 100.0, 100.0, ps * ps, 1.0;

  ForwardPass fwd;
  fwd.steps.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    ForwardPass::Step step;
    step.time_ms = trace[i].time_ms;
    if (i == 0) {
      step.transition = Mat8::Identity();
    } else {
      const double dt =
          static_cast<double>(trace[i].time_ms - trace[i - 1].time_ms) / 1000.0;
      step.transition = transition_matrix(dt);
      x = step.transition * x;
      p = step.transition * p * step.transition.transpose() + process_noise(dt, config);
    }
    step.x_pred = x;
    step.p_pred = p;
    measurement_update(trace[i], x, p, i);
    step.x_upd = x;
    step.p_upd = p;
    fwd.steps.push_back(step);
  }
  return fwd;
}

std::vector<FilterState> rts_smooth_states(const ForwardPass& forward) {
  if (forward.steps.empty()) {
    throw SolverError("rts: empty forward pass");
  }
  const auto& steps = forward.steps;
  std::vector<FilterState> out(steps.size());
  Vec8 xs = steps.back().x_upd;
  Mat8 ps = steps.back().p_upd;
  out.back() = {steps.back().time_ms, xs, ps};
  for (std::size_t k = steps.size() - 1; k-- > 0;) {
    const auto& next = steps[k + 1];
    const auto& cur = steps[k];
    // C = P_upd F' P_pred(next)^-1
    const Mat8 c =
        next.p_pred.ldlt().solve(next.transition * cur.p_upd).transpose();
    xs = cur.x_upd + c * (xs - next.x_pred);
    ps = cur.p_upd + c * (ps - next.p_pred) * c.transpose();
    ps = 0.5 * (ps + ps.transpose()).eval();
    out[k] = {cur.time_ms, xs, ps};
  }
  return out;
}

SmoothedTrack rts_smooth(const ForwardPass& forward, const EstimatorConfig&) {
  SmoothedTrack track;
  for (const auto& s : rts_smooth_states(forward)) {
    track.points.push_back(
        {s.time_ms, EcefPoint::from(s.state.head<3>()), s.state(6)});
  }
  return track;
}

std::vector<NavSolution> mhe_solve(const std::vector<MeasurementSet>& trace,
                                   int window, const EstimatorConfig& config) {
  if (window < 1) {
    throw SolverError("mhe: window must be >= 1");
  }
  std::vector<NavSolution> out;
  out.reserve(trace.size());

  // Warm starts from per-epoch WLS.
  std::vector<NavSolution> wls(trace.size());
  NavSolution prev;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    wls[i] = wls_solve(trace[i], prev).first;
    prev = wls[i];
  }

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::size_t lo = (i + 1 >= static_cast<std::size_t>(window))
                               ? i + 1 - static_cast<std::size_t>(window)
                               : 0;
    const std::size_t w = i - lo + 1;
    const Eigen::Index nx = static_cast<Eigen::Index>(4 * w);

    Eigen::VectorXd x(nx);
    for (std::size_t j = 0; j < w; ++j) {
      x.segment<3>(static_cast<Eigen::Index>(4 * j)) = wls[lo + j].pos.vec();
      x(static_cast<Eigen::Index>(4 * j + 3)) = wls[lo + j].clock_bias_m;
    }

    Eigen::Index n_meas = 0;
    for (std::size_t j = 0; j < w; ++j) {
      if (trace[lo + j].obs.size() < 4) {
        throw SolverError("mhe: underdetermined epoch in window");
      }
      n_meas += static_cast<Eigen::Index>(trace[lo + j].obs.size());
    }
    const Eigen::Index n_prior = (w >= 3) ? static_cast<Eigen::Index>(3 * (w - 2)) : 0;

    NavSolution sol;
    for (int iter = 1; iter <= 20; ++iter) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_meas + n_prior, nx);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(n_meas + n_prior);
      Eigen::Index row = 0;
      for (std::size_t j = 0; j < w; ++j) {
        const Eigen::Vector3d pj = x.segment<3>(static_cast<Eigen::Index>(4 * j));
        const double bj = x(static_cast<Eigen::Index>(4 * j + 3));
        for (const auto& o : trace[lo + j].obs) {
          const Eigen::Vector3d d = pj - o.sat_pos.vec();
          const double r = d.norm();
          const double wt = 1.0 / o.pr_sigma_m;
          a.block<1, 3>(row, static_cast<Eigen::Index>(4 * j)) = wt * (d / r).transpose();
          a(row, static_cast<Eigen::Index>(4 * j + 3)) = wt;
          b(row) = wt * (o.pr_m - r - bj);
          ++row;
        }
      }
      // Second-difference position prior (constant-velocity smoothness).
      for (std::size_t j = 0; j + 2 < w; ++j) {
        const double dt01 =
            static_cast<double>(trace[lo + j + 1].time_ms - trace[lo + j].time_ms) / 1000.0;
        const double dt12 =
            static_cast<double>(trace[lo + j + 2].time_ms - trace[lo + j + 1].time_ms) / 1000.0;
        const double dt = 0.5 * (dt01 + dt12);
        const double sigma = std::sqrt(std::max(config.process_noise_vel, 1e-6) * dt * dt * dt);
        const double wt = 1.0 / sigma;
        for (int axis = 0; axis < 3; ++axis) {
          const Eigen::Index c0 = static_cast<Eigen::Index>(4 * j) + axis;
          const Eigen::Index c1 = static_cast<Eigen::Index>(4 * (j + 1)) + axis;
          const Eigen::Index c2 = static_cast<Eigen::Index>(4 * (j + 2)) + axis;
          a(row, c0) = wt;
          a(row, c1) = -2.0 * wt;
          a(row, c2) = wt;
          b(row) = -wt * (x(c0) - 2.0 * x(c1) + x(c2));
          ++row;
        }
      }
      const Eigen::VectorXd dx = (a.transpose() * a).ldlt().solve(a.transpose() * b);
      x += dx;
      sol.iterations = iter;
      if (dx.norm() < 1e-4) {
        sol.converged = true;
        break;
      }
    }
    sol.pos = EcefPoint::from(x.segment<3>(nx - 4));
    sol.clock_bias_m = x(nx - 1);
    out.push_back(sol);
  }
  return out;
}

}  // namespace prcorr
