#include "prcorr/features.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "prcorr/ingest.hpp"

namespace prcorr {

EpochFeatures extract_features(const MeasurementSet& epoch, const NavSolution& nav,
                               const GeometrySolve& geom,
                               const std::optional<EcefPoint>& next_pos,
                               std::optional<NedVector>& heading_state) {
  const GeodeticPoint geo = ecef_to_geodetic(nav.pos);
  const Eigen::Matrix3d r_ned = ecef_to_ned_matrix(geo);

  // Common features: position DMS and heading.
  const Dms lat = degrees_to_dms(geo.lat_deg);
  const Dms lon = degrees_to_dms(geo.lon_deg);

  NedVector heading;
  if (next_pos) {
    const Eigen::Vector3d disp = next_pos->vec() - nav.pos.vec();
    if (disp.norm() >= 0.2) {
      const Eigen::Vector3d h = r_ned * disp.normalized();
      heading = {h.x(), h.y(), h.z()};
      heading_state = heading;
    } else if (heading_state) {
      heading = *heading_state;
    } else {
      heading = {1.0, 0.0, 0.0};
      heading_state = heading;
    }
  } else if (heading_state) {
    heading = *heading_state;
  } else {
    heading = {1.0, 0.0, 0.0};
    heading_state = heading;
  }

  EpochFeatures out;
  out.time_ms = epoch.time_ms;
  for (std::size_t n = 0; n < epoch.obs.size(); ++n) {
    const auto& o = epoch.obs[n];
    if (o.svid < 1 || o.svid > kSlots) {
      throw SolverError("extract_features: svid out of range");
    }
    const ElAz elaz = elevation_azimuth(nav.pos, o.sat_pos);
    const double e_rad = deg2rad(elaz.elevation_deg);

    const Eigen::Vector3d g = geom.geometry.row(static_cast<Eigen::Index>(n)).head<3>();
    const Eigen::Vector3d g_ned = r_ned * g;

    FeatureVector f{};
    f[0] = o.cn0_dbhz / 50.0;
    f[1] = std::sin(e_rad);
    f[2] = std::cos(e_rad);
    f[3] = static_cast<double>(o.svid) / 32.0;
    f[4] = lat.deg / 90.0;
    f[5] = lat.min / 60.0;
    f[6] = lat.sec / 60.0;
    f[7] = lon.deg / 180.0;
    f[8] = lon.min / 60.0;
    f[9] = lon.sec / 60.0;
    f[10] = g_ned.x();
    f[11] = g_ned.y();
    f[12] = g_ned.z();
    f[13] = heading.north;
    f[14] = heading.east;
    f[15] = heading.down;
    out.svids.push_back(o.svid);
    out.features.push_back(f);
  }
  return out;
}

std::vector<EpochFeatures> extract_trace_features(const std::vector<MeasurementSet>& trace) {
  // WLS pass first (the heading needs a one-epoch lookahead of positions).
  std::vector<NavSolution> navs(trace.size());
  std::vector<GeometrySolve> geoms(trace.size());
  NavSolution prev;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto [nav, geom] = wls_solve(trace[i], prev);
    prev = nav;
    navs[i] = nav;
    geoms[i] = std::move(geom);
  }

  std::vector<EpochFeatures> out;
  out.reserve(trace.size());
  std::optional<NedVector> heading_state;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::optional<EcefPoint> next;
    if (i + 1 < trace.size()) next = navs[i + 1].pos;
    out.push_back(extract_features(trace[i], navs[i], geoms[i], next, heading_state));
  }
  return out;
}

std::vector<FeatureSample> assemble_samples(const std::vector<EpochFeatures>& features,
                                            const std::vector<LabelRecord>& labels) {
  // Labels grouped per epoch.
  std::map<std::int64_t, std::vector<const LabelRecord*>> by_epoch;
  for (const auto& r : labels) by_epoch[r.time_ms].push_back(&r);

  std::vector<FeatureSample> out;
  out.reserve(features.size());
  for (const auto& ef : features) {
    FeatureSample s;
    s.time_ms = ef.time_ms;
    for (std::size_t n = 0; n < ef.svids.size(); ++n) {
      const int slot = ef.svids[n] - 1;
      s.slots[static_cast<std::size_t>(slot)] = ef.features[n];
      s.mask[static_cast<std::size_t>(slot)] = true;
    }
    if (!labels.empty()) {
      const auto it = by_epoch.find(ef.time_ms);
      if (it == by_epoch.end()) continue;  // epoch not labeled (e.g. discarded)
      for (const LabelRecord* r : it->second) {
        const int slot = r->svid - 1;
        if (slot < 0 || slot >= kSlots || !s.mask[static_cast<std::size_t>(slot)]) {
          throw SolverError("assemble_samples: label svid " + std::to_string(r->svid) +
                            " not visible in feature epoch " + std::to_string(ef.time_ms));
        }
        s.labels[static_cast<std::size_t>(slot)] = r->label_m;
        for (std::size_t k = 0; k < r->visible_svids.size(); ++k) {
          const int hs = r->visible_svids[k] - 1;
          if (hs < 0 || hs >= kSlots || !s.mask[static_cast<std::size_t>(hs)]) {
            throw SolverError("assemble_samples: h-row svid mismatch at epoch " +
                              std::to_string(ef.time_ms));
          }
          s.h_slots[static_cast<std::size_t>(hs)] = r->h_row(static_cast<Eigen::Index>(k));
        }
      }
    }
    out.push_back(s);
  }
  return out;
}

void write_features_csv(std::ostream& out, const std::vector<EpochFeatures>& features) {
  out << "time_ms,svid,f1,f2a,f2b,f3,f4a,f4b,f4c,f4d,f4e,f4f,f5n,f5e,f5d,f6n,f6e,f6d\n";
  for (const auto& ef : features) {
    for (std::size_t n = 0; n < ef.svids.size(); ++n) {
      out << ef.time_ms << ',' << ef.svids[n];
      for (double v : ef.features[n]) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

std::vector<EpochFeatures> read_features_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty features file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_ms,svid,f1,f2a,f2b,f3,f4a,f4b,f4c,f4d,f4e,f4f,f5n,f5e,f5d,f6n,f6e,f6d") {
    throw ParseError("bad features header: '" + line + "'");
  }
  std::map<std::int64_t, EpochFeatures> by_epoch;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::int64_t t;
    int svid;
    char c;
    if (!(ss >> t >> c >> svid) || c != ',') {
      throw ParseError("line " + std::to_string(line_no) + ": bad features row");
    }
    FeatureVector f{};
    for (int k = 0; k < kFeatureDim; ++k) {
      if (!(ss >> c >> f[static_cast<std::size_t>(k)]) || c != ',') {
        throw ParseError("line " + std::to_string(line_no) + ": bad feature value " +
                         std::to_string(k + 1));
      }
    }
    auto& ef = by_epoch[t];
    ef.time_ms = t;
    ef.svids.push_back(svid);
    ef.features.push_back(f);
  }
  std::vector<EpochFeatures> out;
  out.reserve(by_epoch.size());
  for (auto& [t, ef] : by_epoch) out.push_back(std::move(ef));
  return out;
}

}  // namespace prcorr
