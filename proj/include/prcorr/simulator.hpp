#ifndef PRCORR_SIMULATOR_HPP
#define PRCORR_SIMULATOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prcorr/ingest.hpp"

namespace prcorr {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Trajectory {
  enum class Kind { Stationary, ConstantVelocity, Waypoints };
  Kind kind = Kind::Stationary;
  GeodeticPoint start{37.4, -122.1, 30.0};
  double vel_north_mps = 0.0;
  double vel_east_mps = 0.0;
  std::vector<TruthPoint> waypoints;  // for Kind::Waypoints
};

struct BiasSpec {
  // none: zero bias.
  // feature_linear: scale * (4 * cn0/50 + 2 * sin E)
  // elevation_multipath: scale * (10 exp(-E/25 deg) + 2 sin(2 pi svid/32 + 1)
  //                      + 1.5 g_ned_east), clamped to +-15 m
  enum class Kind { None, FeatureLinear, ElevationMultipath };
  Kind kind = Kind::None;
  double scale = 1.0;
};

struct ScenarioConfig {
  int n_sats = 8;
  double orbit_radius_m = 26560e3;
  double inclination_deg = 55.0;
  Trajectory trajectory;
  double epoch_interval_s = 1.0;
  int duration_epochs = 200;
  double noise_sigma_m = 0.0;
  double clock_bias_m = 0.0;
  double clock_drift_mps = 0.0;
  BiasSpec bias;
  std::uint64_t seed = 1;
  double mask_elevation_deg = 10.0;
  double min_start_elevation_deg = 25.0;
};

struct TruthSidecarRow {
  std::int64_t time_ms = 0;
  int svid = 0;
  double mu_m = 0.0;
  double v_m = 0.0;
  double clk_m = 0.0;
};

struct SimulatedTrace {
  std::vector<MeasurementSet> epochs;
  GroundTruthTrack truth;
  std::vector<TruthSidecarRow> sidecar;
};

SimulatedTrace simulate_trace(const ScenarioConfig& config);

bool visibility_filter(const EcefPoint& sat, const EcefPoint& receiver,
                       double mask_elevation_deg = 10.0);

// Satellite position on its circular orbit at time t (seconds).
struct SatOrbit {
  int svid = 0;
  double raan_rad = 0.0;
  double inclination_rad = 0.0;
  double phase_rad = 0.0;
};
EcefPoint propagate(const SatOrbit& orbit, double radius_m, double t_s);

ScenarioConfig parse_scenario_json(const std::string& text);

void write_truth_sidecar_csv(std::ostream& out, const std::vector<TruthSidecarRow>& rows);

}  // namespace prcorr

#endif
