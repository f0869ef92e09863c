#include "prcorr/simulator.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "json.hpp"
#include "prcorr/geo.hpp"

namespace prcorr {

namespace {

constexpr double kEarthMu = 3.986004418e14;  // m^3/s^2

GeodeticPoint truth_at(const Trajectory& traj, double t_s) {
  switch (traj.kind) {
    case Trajectory::Kind::Stationary:
      return traj.start;
    case Trajectory::Kind::ConstantVelocity: {
      const EcefPoint start = geodetic_to_ecef(traj.start);
      const Eigen::Matrix3d r = ecef_to_ned_matrix(traj.start);
      const Eigen::Vector3d ned(traj.vel_north_mps * t_s, traj.vel_east_mps * t_s, 0.0);
      return ecef_to_geodetic(EcefPoint::from(start.vec() + r.transpose() * ned));
    }
    case Trajectory::Kind::Waypoints: {
      const auto& wp = traj.waypoints;
      if (wp.size() < 2) throw SimError("waypoint trajectory needs >= 2 points");
      const double t_ms = t_s * 1000.0;
      if (t_ms <= static_cast<double>(wp.front().time_ms)) return wp.front().pos;
      if (t_ms >= static_cast<double>(wp.back().time_ms)) return wp.back().pos;
      for (std::size_t i = 0; i + 1 < wp.size(); ++i) {
        if (t_ms <= static_cast<double>(wp[i + 1].time_ms)) {
          const double a = (t_ms - static_cast<double>(wp[i].time_ms)) /
                           static_cast<double>(wp[i + 1].time_ms - wp[i].time_ms);
          GeodeticPoint p;
          p.lat_deg = wp[i].pos.lat_deg + a * (wp[i + 1].pos.lat_deg - wp[i].pos.lat_deg);
          p.lon_deg = wp[i].pos.lon_deg + a * (wp[i + 1].pos.lon_deg - wp[i].pos.lon_deg);
          p.alt_m = wp[i].pos.alt_m + a * (wp[i + 1].pos.alt_m - wp[i].pos.alt_m);
          return p;
        }
      }
      return wp.back().pos;
    }
  }
  throw SimError("unknown trajectory kind");
}

double bias_value(const BiasSpec& spec, double elevation_deg, double cn0_dbhz,
                  const NedVector& g_ned, int svid) {
  switch (spec.kind) {
    case BiasSpec::Kind::None:
      return 0.0;
    case BiasSpec::Kind::FeatureLinear:
      return spec.scale * (4.0 * cn0_dbhz / 50.0 + 2.0 * std::sin(deg2rad(elevation_deg)));
    case BiasSpec::Kind::ElevationMultipath: {
      const double v = spec.scale * (10.0 * std::exp(-elevation_deg / 25.0) +
                                     2.0 * std::sin(2.0 * M_PI * svid / 32.0 + 1.0) +
                                     1.5 * g_ned.east);
      return std::clamp(v, -15.0, 15.0);
    }
  }
  throw SimError("unknown bias kind");
}

}  // namespace

EcefPoint propagate(const SatOrbit& orbit, double radius_m, double t_s) {
  const double omega = std::sqrt(kEarthMu / (radius_m * radius_m * radius_m));
  const double nu = orbit.phase_rad + omega * t_s;
  const Eigen::Vector3d in_plane(radius_m * std::cos(nu), radius_m * std::sin(nu), 0.0);
  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(orbit.raan_rad, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(orbit.inclination_rad, Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  return EcefPoint::from(rot * in_plane);
}

bool visibility_filter(const EcefPoint& sat, const EcefPoint& receiver,
                       double mask_elevation_deg) {
  return elevation_azimuth(receiver, sat).elevation_deg > mask_elevation_deg;
}

SimulatedTrace simulate_trace(const ScenarioConfig& cfg) {
  if (cfg.n_sats < 4 || cfg.n_sats > 32) {
    throw SimError("n_sats must be in [4, 32]");
  }
  if (cfg.duration_epochs < 1 || cfg.epoch_interval_s <= 0.0) {
    throw SimError("invalid duration or epoch interval");
  }
  if (cfg.noise_sigma_m < 0.0) throw SimError("noise_sigma_m must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double t_end = (cfg.duration_epochs - 1) * cfg.epoch_interval_s;

  // Place each satellite so it stays above the mask over the whole run
  // (checked at start/mid/end; a pass is unimodal at these time scales).
  std::vector<SatOrbit> orbits;
  for (int svid = 1; svid <= cfg.n_sats; ++svid) {
    SatOrbit orbit;
    orbit.svid = svid;
    orbit.inclination_rad = deg2rad(cfg.inclination_deg);
    bool placed = false;
    for (int attempt = 0; attempt < 20000; ++attempt) {
      orbit.raan_rad = angle(rng);
      orbit.phase_rad = angle(rng);
      bool ok = true;
      for (double t : {0.0, 0.5 * t_end, t_end}) {
        const EcefPoint rx = geodetic_to_ecef(truth_at(cfg.trajectory, t));
        const EcefPoint sat = propagate(orbit, cfg.orbit_radius_m, t);
        const double need = (t == 0.0) ? cfg.min_start_elevation_deg
                                       : cfg.mask_elevation_deg + 2.0;
        if (elevation_azimuth(rx, sat).elevation_deg <= need) {
          ok = false;
          break;
        }
      }
      if (ok) {
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw SimError("could not place satellite " + std::to_string(svid) +
                     " above the elevation mask");
    }
    orbits.push_back(orbit);
  }

  const double pr_sigma = (cfg.noise_sigma_m > 0.0) ? cfg.noise_sigma_m : 1.0;

  SimulatedTrace out;
  for (int k = 0; k < cfg.duration_epochs; ++k) {
    const double t = k * cfg.epoch_interval_s;
    const std::int64_t time_ms = static_cast<std::int64_t>(std::llround(t * 1000.0));
    const GeodeticPoint truth_geo = truth_at(cfg.trajectory, t);
    const EcefPoint rx = geodetic_to_ecef(truth_geo);
    const double clk = cfg.clock_bias_m + cfg.clock_drift_mps * t;

    MeasurementSet epoch;
    epoch.time_ms = time_ms;
    for (const auto& orbit : orbits) {
      const EcefPoint sat = propagate(orbit, cfg.orbit_radius_m, t);
      const double el = elevation_azimuth(rx, sat).elevation_deg;
      if (el <= cfg.mask_elevation_deg) continue;

      const double zenith = 90.0 - el;
      const double cn0 = std::clamp(50.0 - 30.0 * zenith / 90.0 + gauss(rng), 20.0, 50.0);

      const Eigen::Vector3d d = rx.vec() - sat.vec();
      const double r = d.norm();
      const NedVector g_ned = ecef_vector_to_ned(d / r, truth_geo);

      const double mu = bias_value(cfg.bias, el, cn0, g_ned, orbit.svid);
      const double v = (cfg.noise_sigma_m > 0.0) ? cfg.noise_sigma_m * gauss(rng) : 0.0;

      SatObservation obs;
      obs.svid = orbit.svid;
      obs.pr_m = r + clk + mu + v;
      obs.cn0_dbhz = cn0;
      obs.sat_pos = sat;
      obs.pr_sigma_m = pr_sigma;
      epoch.obs.push_back(obs);

      out.sidecar.push_back({time_ms, orbit.svid, mu, v, clk});
    }
    if (epoch.obs.size() < 4) {
      throw SimError("epoch " + std::to_string(k) + " has only " +
                     std::to_string(epoch.obs.size()) + " visible satellites");
    }
    out.epochs.push_back(std::move(epoch));
    out.truth.points.push_back({time_ms, truth_geo});
  }
  return out;
}

ScenarioConfig parse_scenario_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SimError("scenario config parse error: " + std::string(e.what()));
  }
  ScenarioConfig cfg;
  cfg.n_sats = j.value("n_sats", cfg.n_sats);
  cfg.orbit_radius_m = j.value("orbit_radius_m", cfg.orbit_radius_m);
  cfg.inclination_deg = j.value("inclination_deg", cfg.inclination_deg);
  cfg.epoch_interval_s = j.value("epoch_interval_s", cfg.epoch_interval_s);
  cfg.duration_epochs = j.value("duration_epochs", cfg.duration_epochs);
  cfg.noise_sigma_m = j.value("noise_sigma_m", cfg.noise_sigma_m);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.mask_elevation_deg = j.value("mask_elevation_deg", cfg.mask_elevation_deg);
  cfg.min_start_elevation_deg = j.value("min_start_elevation_deg", cfg.min_start_elevation_deg);
  if (j.contains("clock")) {
    cfg.clock_bias_m = j["clock"].value("bias_m", 0.0);
    cfg.clock_drift_mps = j["clock"].value("drift_mps", 0.0);
  }
  if (j.contains("trajectory")) {
    const auto& tj = j["trajectory"];
    const std::string kind = tj.value("kind", "stationary");
    if (kind == "stationary") {
      cfg.trajectory.kind = Trajectory::Kind::Stationary;
    } else if (kind == "constant_velocity") {
      cfg.trajectory.kind = Trajectory::Kind::ConstantVelocity;
      cfg.trajectory.vel_north_mps = tj.value("vel_north_mps", 0.0);
      cfg.trajectory.vel_east_mps = tj.value("vel_east_mps", 0.0);
    } else if (kind == "waypoints") {
      cfg.trajectory.kind = Trajectory::Kind::Waypoints;
      for (const auto& p : tj.at("points")) {
        TruthPoint w;
        w.time_ms = p.at("time_ms").get<std::int64_t>();
        w.pos.lat_deg = p.at("lat_deg").get<double>();
        w.pos.lon_deg = p.at("lon_deg").get<double>();
        w.pos.alt_m = p.value("alt_m", 0.0);
        cfg.trajectory.waypoints.push_back(w);
      }
    } else {
      throw SimError("unknown trajectory kind: " + kind);
    }
    cfg.trajectory.start.lat_deg = tj.value("lat_deg", cfg.trajectory.start.lat_deg);
    cfg.trajectory.start.lon_deg = tj.value("lon_deg", cfg.trajectory.start.lon_deg);
    cfg.trajectory.start.alt_m = tj.value("alt_m", cfg.trajectory.start.alt_m);
  }
  if (j.contains("bias")) {
    const std::string kind = j["bias"].value("kind", "none");
    if (kind == "none") {
      cfg.bias.kind = BiasSpec::Kind::None;
    } else if (kind == "feature_linear") {
      cfg.bias.kind = BiasSpec::Kind::FeatureLinear;
    } else if (kind == "elevation_multipath") {
      cfg.bias.kind = BiasSpec::Kind::ElevationMultipath;
    } else {
      throw SimError("unknown bias kind: " + kind);
    }
    cfg.bias.scale = j["bias"].value("scale", 1.0);
  }
  return cfg;
}

void write_truth_sidecar_csv(std::ostream& out, const std::vector<TruthSidecarRow>& rows) {
  out << "time_ms,svid,mu_m,v_m,clk_m\n";
  for (const auto& r : rows) {
    out << r.time_ms << ',' << r.svid << ',' << format_double(r.mu_m) << ','
        << format_double(r.v_m) << ',' << format_double(r.clk_m) << '\n';
  }
}

}  // namespace prcorr
