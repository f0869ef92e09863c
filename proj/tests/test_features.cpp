#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "prcorr/features.hpp"
#include "prcorr/simulator.hpp"

using namespace prcorr;

namespace {

// Constellation on the 26560 km shell with chosen elevations; index 0 is at
// zenith.
MeasurementSet zenith_epoch(const EcefPoint& user) {
  const double r_orbit = 26560e3;
  // Geodetic up: elevation is measured against the NED horizontal plane.
  const Eigen::Vector3d up =
      ecef_to_ned_matrix(ecef_to_geodetic(user)).transpose() * Eigen::Vector3d(0.0, 0.0, -1.0);
  Eigen::Vector3d e1 = up.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d e2 = up.cross(e1).normalized();

  MeasurementSet epoch;
  epoch.time_ms = 1000;
  for (int n = 0; n < 6; ++n) {
    const double el = (n == 0) ? M_PI / 2.0 : 0.7;
    const double az = 2.0 * M_PI * n / 6.0;
    const Eigen::Vector3d dir = std::sin(el) * up +
                                std::cos(el) * (std::cos(az) * e1 + std::sin(az) * e2);
    const double b = 2.0 * user.vec().dot(dir);
    const double c = user.vec().squaredNorm() - r_orbit * r_orbit;
    const double t = (-b + std::sqrt(b * b - 4.0 * c)) / 2.0;
    SatObservation o;
    o.svid = (n == 0) ? 16 : n + 1;
    o.sat_pos = EcefPoint::from(user.vec() + t * dir);
    o.cn0_dbhz = (n == 0) ? 25.0 : 45.0;
    o.pr_sigma_m = 3.0;
    o.pr_m = (user.vec() - o.sat_pos.vec()).norm();
    epoch.obs.push_back(o);
  }
  return epoch;
}

}  // namespace

TEST_CASE("paper scaling constants and zenith geometry") {
  const EcefPoint user = geodetic_to_ecef({37.4, -122.1, 30.0});
  const auto epoch = zenith_epoch(user);
  const auto [nav, geom] = wls_solve(epoch);
  std::optional<NedVector> heading;
  const auto ef = extract_features(epoch, nav, geom, std::nullopt, heading);
  REQUIRE(ef.svids.size() == 6);

  // Zenith satellite: svid 16, cn0 25.
  CHECK(ef.svids[0] == 16);
  const auto& f = ef.features[0];
  CHECK(f[0] == doctest::Approx(0.5).epsilon(1e-12));   // 25 / 50
  CHECK(f[3] == doctest::Approx(0.5).epsilon(1e-12));   // 16 / 32
  CHECK(std::abs(f[1] - 1.0) < 1e-6);                   // sin 90
  CHECK(std::abs(f[2]) < 1e-6);                         // cos 90
  // g points receiver-minus-satellite, so straight down at zenith.
  CHECK(std::abs(f[10]) < 1e-6);
  CHECK(std::abs(f[11]) < 1e-6);
  CHECK(f[12] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("per-satellite invariants and common features") {
  const EcefPoint user = geodetic_to_ecef({37.4, -122.1, 30.0});
  const auto epoch = zenith_epoch(user);
  const auto [nav, geom] = wls_solve(epoch);
  const GeodeticPoint geo = ecef_to_geodetic(nav.pos);
  const Eigen::Matrix3d r_ned = ecef_to_ned_matrix(geo);
  std::optional<NedVector> heading;
  const auto ef = extract_features(epoch, nav, geom, std::nullopt, heading);

  for (std::size_t n = 0; n < ef.features.size(); ++n) {
    const auto& f = ef.features[n];
    // f2 Pythagorean identity.
    CHECK(std::abs(f[1] * f[1] + f[2] * f[2] - 1.0) < 1e-9);
    CHECK(f[3] > 0.0);
    CHECK(f[3] <= 1.0);
    for (int k = 4; k <= 9; ++k) {
      CHECK(f[static_cast<std::size_t>(k)] >= -1.0);
      CHECK(f[static_cast<std::size_t>(k)] <= 1.0);
    }
    // f5 is the unit receiver-minus-satellite vector in NED.
    const Eigen::Vector3d f5(f[10], f[11], f[12]);
    CHECK(std::abs(f5.norm() - 1.0) < 1e-9);
    const auto& o = epoch.obs[n];
    const Eigen::Vector3d expected =
        r_ned * (nav.pos.vec() - o.sat_pos.vec()).normalized();
    CHECK((f5 - expected).norm() < 1e-9);
    // f6 unit norm.
    const Eigen::Vector3d f6(f[13], f[14], f[15]);
    CHECK(std::abs(f6.norm() - 1.0) < 1e-9);
    // F4/F6 shared across the epoch.
    for (int k = 4; k <= 9; ++k) {
      CHECK(f[static_cast<std::size_t>(k)] == ef.features[0][static_cast<std::size_t>(k)]);
    }
    for (int k = 13; k <= 15; ++k) {
      CHECK(f[static_cast<std::size_t>(k)] == ef.features[0][static_cast<std::size_t>(k)]);
    }
  }

  // F4 reconstructs the WLS geodetic position.
  const auto& f = ef.features[0];
  const double lat = (geo.lat_deg < 0 ? -1.0 : 1.0) *
                     (std::abs(f[4] * 90.0) + f[5] * 60.0 / 60.0 + f[6] * 60.0 / 3600.0);
  CHECK(std::abs(lat - geo.lat_deg) < 1e-9);
}

TEST_CASE("heading tracks eastward motion and falls back when stationary") {
  SUBCASE("due-east motion gives f6 = (0, 1, 0)") {
    ScenarioConfig cfg;
    cfg.duration_epochs = 5;
    cfg.seed = 33;
    cfg.trajectory.kind = Trajectory::Kind::ConstantVelocity;
    cfg.trajectory.vel_east_mps = 5.0;
    const auto trace = simulate_trace(cfg);
    const auto features = extract_trace_features(trace.epochs);
    REQUIRE(features.size() == 5);
    for (std::size_t k = 0; k + 1 < features.size(); ++k) {
      const auto& f = features[k].features[0];
      CHECK(std::abs(f[13]) < 1e-4);
      CHECK(f[14] == doctest::Approx(1.0).epsilon(1e-4));
      CHECK(std::abs(f[15]) < 1e-4);
    }
    // Last epoch has no lookahead and holds the previous heading.
    const auto& last = features.back().features[0];
    CHECK(last[14] == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("stationary receiver defaults to north and holds it") {
    ScenarioConfig cfg;
    cfg.duration_epochs = 4;
    cfg.seed = 34;
    const auto trace = simulate_trace(cfg);
    const auto features = extract_trace_features(trace.epochs);
    for (const auto& ef : features) {
      for (const auto& f : ef.features) {
        CHECK(f[13] == 1.0);
        CHECK(f[14] == 0.0);
        CHECK(f[15] == 0.0);
      }
    }
  }
}

TEST_CASE("svid outside 1..32 is rejected") {
  const EcefPoint user = geodetic_to_ecef({37.4, -122.1, 30.0});
  auto epoch = zenith_epoch(user);
  const auto [nav, geom] = wls_solve(epoch);
  epoch.obs[0].svid = 33;
  std::optional<NedVector> heading;
  CHECK_THROWS_AS(
      static_cast<void>(extract_features(epoch, nav, geom, std::nullopt, heading)),
      SolverError);
}

TEST_CASE("sample assembly maps svids onto 32 slots") {
  EpochFeatures ef;
  ef.time_ms = 1000;
  ef.svids = {2, 7};
  FeatureVector fa{}, fb{};
  fa[0] = 0.9;
  fb[0] = 0.8;
  ef.features = {fa, fb};

  const auto samples = assemble_samples({ef}, {});
  REQUIRE(samples.size() == 1);
  const auto& s = samples[0];
  for (int slot = 0; slot < kSlots; ++slot) {
    const bool expected = (slot == 1 || slot == 6);
    CHECK(s.mask[static_cast<std::size_t>(slot)] == expected);
  }
  CHECK(s.slots[1][0] == 0.9);
  CHECK(s.slots[6][0] == 0.8);
  CHECK(s.slots[0][0] == 0.0);
}

TEST_CASE("assembly joins labels and h rows by epoch and svid") {
  ScenarioConfig cfg;
  cfg.duration_epochs = 130;
  cfg.noise_sigma_m = 2.0;
  cfg.seed = 35;
  const auto trace = simulate_trace(cfg);
  const auto features = extract_trace_features(trace.epochs);
  const auto aligned = align_truth(trace.epochs, trace.truth);
  const auto smoothed = rts_smooth(ekf_forward(trace.epochs));
  const auto labels = build_label_dataset(aligned.pairs, smoothed, 120);

  const auto samples = assemble_samples(features, labels);
  CHECK(samples.size() == 10);  // only labeled epochs survive
  for (const auto& s : samples) {
    double h_sum = 0.0;
    int visible = 0;
    for (int slot = 0; slot < kSlots; ++slot) {
      const auto i = static_cast<std::size_t>(slot);
      if (s.mask[i]) {
        ++visible;
        h_sum += s.h_slots[i];
      } else {
        CHECK(s.labels[i] == 0.0);
        CHECK(s.h_slots[i] == 0.0);
      }
    }
    CHECK(visible >= 4);
    CHECK(std::abs(h_sum - 1.0) < 1e-9);
  }

  // A label whose svid is not visible in the features is a consistency error.
  auto bad = labels;
  bad[0].svid = (bad[0].svid == 1) ? 2 : 1;
  bool visible_conflict = false;
  for (int sv : bad[0].visible_svids) visible_conflict |= (sv == bad[0].svid);
  if (!visible_conflict) {
    CHECK_THROWS_AS(static_cast<void>(assemble_samples(features, bad)), SolverError);
  }
}

TEST_CASE("features csv round trip is bit-exact") {
  ScenarioConfig cfg;
  cfg.duration_epochs = 12;
  cfg.noise_sigma_m = 1.5;
  cfg.seed = 36;
  const auto trace = simulate_trace(cfg);
  const auto features = extract_trace_features(trace.epochs);

  std::ostringstream out;
  write_features_csv(out, features);
  std::istringstream in(out.str());
  const auto parsed = read_features_csv(in);
  REQUIRE(parsed.size() == features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    CHECK(parsed[k].time_ms == features[k].time_ms);
    REQUIRE(parsed[k].svids == features[k].svids);
    for (std::size_t n = 0; n < features[k].features.size(); ++n) {
      for (int c = 0; c < kFeatureDim; ++c) {
        CHECK(parsed[k].features[n][static_cast<std::size_t>(c)] ==
              features[k].features[n][static_cast<std::size_t>(c)]);
      }
    }
  }
}

TEST_CASE("features csv parsing rejects malformed input") {
  std::istringstream bad_header("time_ms,svid\n");
  CHECK_THROWS_AS(static_cast<void>(read_features_csv(bad_header)), ParseError);
  std::istringstream short_row(
      "time_ms,svid,f1,f2a,f2b,f3,f4a,f4b,f4c,f4d,f4e,f4f,f5n,f5e,f5d,f6n,f6e,f6d\n"
      "1000,5,0.5,0.5\n");
  CHECK_THROWS_AS(static_cast<void>(read_features_csv(short_row)), ParseError);
}
