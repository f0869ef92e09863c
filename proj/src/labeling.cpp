#include "prcorr/labeling.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "prcorr/ingest.hpp"

namespace prcorr {

Eigen::VectorXd estimate_pr_errors(const MeasurementSet& epoch,
                                   const EcefPoint& truth_pos,
                                   const NavSolution& wls) {
  Eigen::VectorXd eps(static_cast<Eigen::Index>(epoch.obs.size()));
  for (Eigen::Index n = 0; n < eps.size(); ++n) {
    const auto& o = epoch.obs[static_cast<std::size_t>(n)];
    const double r = (truth_pos.vec() - o.sat_pos.vec()).norm();
    eps(n) = o.pr_m - r - wls.clock_bias_m;
  }
  return eps;
}

double smoothed_label(const EcefPoint& sat_pos, const EcefPoint& smoothed_pos,
                      const EcefPoint& truth_pos) {
  return (smoothed_pos.vec() - sat_pos.vec()).norm() -
         (truth_pos.vec() - sat_pos.vec()).norm();
}

std::vector<LabelRecord> build_label_dataset(const std::vector<AlignedEpoch>& aligned,
                                             const SmoothedTrack& smoothed,
                                             int discard) {
  if (aligned.size() != smoothed.points.size()) {
    throw SolverError("build_label_dataset: aligned/smoothed length mismatch");
  }
  if (aligned.size() <= static_cast<std::size_t>(discard)) {
    throw SolverError("build_label_dataset: trace shorter than discard window (" +
                      std::to_string(aligned.size()) + " <= " + std::to_string(discard) + ")");
  }

  std::vector<LabelRecord> out;
  NavSolution prev;
  for (std::size_t k = 0; k < aligned.size(); ++k) {
    const auto& [epoch, truth_geo] = aligned[k];
    const auto [nav, geom] = wls_solve(epoch, prev);
    prev = nav;
    if (k < static_cast<std::size_t>(discard)) continue;

    const auto& sm = smoothed.points[k];
    if (sm.time_ms != epoch.time_ms) {
      throw SolverError("build_label_dataset: smoothed track timestamp mismatch at epoch " +
                        std::to_string(k));
    }
    const EcefPoint truth_pos = geodetic_to_ecef(truth_geo);
    for (std::size_t n = 0; n < epoch.obs.size(); ++n) {
      LabelRecord rec;
      rec.time_ms = epoch.time_ms;
      rec.svid = epoch.obs[n].svid;
      rec.label_m = smoothed_label(epoch.obs[n].sat_pos, sm.pos, truth_pos);
      if (std::abs(rec.label_m) >= 1000.0) {
        throw SolverError("build_label_dataset: label " + std::to_string(rec.label_m) +
                          " m exceeds sanity bound at epoch " + std::to_string(k));
      }
      rec.visible_svids = geom.svids;
      rec.h_row = geom.h_row;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

void write_label_csv(std::ostream& out, const std::vector<LabelRecord>& records) {
  out << "time_ms,svid,label_m\n";
  for (const auto& r : records) {
    out << r.time_ms << ',' << r.svid << ',' << format_double(r.label_m) << '\n';
  }
}

void write_hrow_csv(std::ostream& out, const std::vector<LabelRecord>& records) {
  out << "time_ms,svid,h_value\n";
  std::int64_t last_time = -1;
  for (const auto& r : records) {
    if (r.time_ms == last_time) continue;  // h-row is shared per epoch
    last_time = r.time_ms;
    for (std::size_t n = 0; n < r.visible_svids.size(); ++n) {
      out << r.time_ms << ',' << r.visible_svids[n] << ','
          << format_double(r.h_row(static_cast<Eigen::Index>(n))) << '\n';
    }
  }
}

std::vector<LabelRecord> read_label_dataset(std::istream& labels_in, std::istream& hrows_in) {
  auto parse_rows = [](std::istream& in, const std::string& header) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty sidecar file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw ParseError("bad sidecar header: '" + line + "'");
    std::vector<std::tuple<std::int64_t, int, double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::int64_t t;
      int svid;
      double v;
      std::istringstream ss(line);
      char c1, c2;
      if (!(ss >> t >> c1 >> svid >> c2 >> v) || c1 != ',' || c2 != ',') {
        throw ParseError("line " + std::to_string(line_no) + ": bad sidecar row");
      }
      rows.emplace_back(t, svid, v);
    }
    return rows;
  };

  const auto label_rows = parse_rows(labels_in, "time_ms,svid,label_m");
  const auto h_rows = parse_rows(hrows_in, "time_ms,svid,h_value");

  // Group h-rows per epoch, preserving order.
  std::map<std::int64_t, std::pair<std::vector<int>, std::vector<double>>> h_by_epoch;
  for (const auto& [t, svid, v] : h_rows) {
    h_by_epoch[t].first.push_back(svid);
    h_by_epoch[t].second.push_back(v);
  }

  std::vector<LabelRecord> out;
  for (const auto& [t, svid, v] : label_rows) {
    const auto it = h_by_epoch.find(t);
    if (it == h_by_epoch.end()) {
      throw ParseError("label at time " + std::to_string(t) + " has no h-row epoch");
    }
    LabelRecord rec;
    rec.time_ms = t;
    rec.svid = svid;
    rec.label_m = v;
    rec.visible_svids = it->second.first;
    rec.h_row = Eigen::Map<const Eigen::VectorXd>(it->second.second.data(),
                                                  static_cast<Eigen::Index>(it->second.second.size()));
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace prcorr
