#ifndef PRCORR_ESTIMATORS_HPP
#define PRCORR_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "prcorr/solver.hpp"

namespace prcorr {

// State: [pos(3) m, vel(3) m/s, clock_bias m, clock_drift m/s]
struct FilterState {
  std::int64_t time_ms = 0;
  Eigen::Matrix<double, 8, 1> state = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> covariance = Eigen::Matrix<double, 8, 8>::Identity();
};

struct SmoothedPoint {
  std::int64_t time_ms = 0;
  EcefPoint pos;
  double clock_bias_m = 0.0;
};

struct SmoothedTrack {
  std::vector<SmoothedPoint> points;
};

struct EstimatorConfig {
  double process_noise_vel = 1.0;   // velocity PSD, m^2/s^3
  double process_noise_clk = 0.1;   // clock drift PSD, m^2/s^3
  int mhe_window = 10;
  double init_pos_sigma_m = 100.0;
};

// Forward EKF pass with the per-epoch predicted/updated pairs kept for
// smoothing.
struct ForwardPass {
  struct Step {
    std::int64_t time_ms = 0;
    Eigen::Matrix<double, 8, 1> x_pred, x_upd;
    Eigen::Matrix<double, 8, 8> p_pred, p_upd, transition;
  };
  std::vector<Step> steps;

  std::vector<FilterState> states() const;
};

ForwardPass ekf_forward(const std::vector<MeasurementSet>& trace,
                        const EstimatorConfig& config = {});

SmoothedTrack rts_smooth(const ForwardPass& forward,
                         const EstimatorConfig& config = {});

// Backward Rauch recursion with covariances kept (rts_smooth is a projection
// of this onto position/clock).
std::vector<FilterState> rts_smooth_states(const ForwardPass& forward);

// Sliding-window batch least squares with a second-difference position prior
// (constant-velocity smoothness). window = 1 reduces to per-epoch WLS.
std::vector<NavSolution> mhe_solve(const std::vector<MeasurementSet>& trace,
                                   int window,
                                   const EstimatorConfig& config = {});

}  // namespace prcorr

#endif
