#include "prcorr/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace prcorr {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& field, int line_no, int col) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || field.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ", column " +
                     std::to_string(col + 1) + ": not a number: '" + field + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& field, int line_no, int col) {
  std::int64_t v = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || field.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ", column " +
                     std::to_string(col + 1) + ": not an integer: '" + field + "'");
  }
  return v;
}

void expect_header(std::istream& in, const std::string& expected) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("line 1: empty input, expected header '" + expected + "'");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) {
    throw ParseError("line 1: bad header, expected '" + expected + "' got '" + line + "'");
  }
}

}  // namespace

std::vector<MeasurementSet> parse_epochs_csv(std::istream& in) {
  expect_header(in, "time_ms,svid,pr_m,cn0_dbhz,sat_x_m,sat_y_m,sat_z_m,pr_sigma_m");

  // Groups keep file order within an epoch; epochs sorted by time.
  std::map<std::int64_t, MeasurementSet> groups;
  std::set<std::pair<std::int64_t, int>> seen;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 8) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 8 fields, got " +
                       std::to_string(fields.size()));
    }
    const std::int64_t t = parse_int(fields[0], line_no, 0);
    const std::int64_t svid = parse_int(fields[1], line_no, 1);
    if (svid < 1 || svid > 32) {
      throw ParseError("line " + std::to_string(line_no) + ": svid " +
                       std::to_string(svid) + " out of range [1,32]");
    }
    SatObservation o;
    o.svid = static_cast<int>(svid);
    o.pr_m = parse_number(fields[2], line_no, 2);
    o.cn0_dbhz = parse_number(fields[3], line_no, 3);
    o.sat_pos.x = parse_number(fields[4], line_no, 4);
    o.sat_pos.y = parse_number(fields[5], line_no, 5);
    o.sat_pos.z = parse_number(fields[6], line_no, 6);
    o.pr_sigma_m = parse_number(fields[7], line_no, 7);
    if (o.pr_m <= 1e6) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": pseudorange " + fields[2] + " below sanity bound 1e6 m");
    }
    if (o.pr_sigma_m <= 0.0) {
      throw ParseError("line " + std::to_string(line_no) + ": pr_sigma_m must be > 0");
    }
    if (!seen.insert({t, o.svid}).second) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate observation (time_ms=" +
                       std::to_string(t) + ", svid=" + std::to_string(o.svid) + ")");
    }
    auto& g = groups[t];
    g.time_ms = t;
    g.obs.push_back(o);
  }

  std::vector<MeasurementSet> out;
  out.reserve(groups.size());
  for (auto& [t, g] : groups) out.push_back(std::move(g));
  return out;
}

void write_epochs_csv(std::ostream& out, const std::vector<MeasurementSet>& epochs) {
  out << "time_ms,svid,pr_m,cn0_dbhz,sat_x_m,sat_y_m,sat_z_m,pr_sigma_m\n";
  for (const auto& e : epochs) {
    for (const auto& o : e.obs) {
      out << e.time_ms << ',' << o.svid << ',' << format_double(o.pr_m) << ','
          << format_double(o.cn0_dbhz) << ',' << format_double(o.sat_pos.x) << ','
          << format_double(o.sat_pos.y) << ',' << format_double(o.sat_pos.z) << ','
          << format_double(o.pr_sigma_m) << '\n';
    }
  }
}

GroundTruthTrack parse_ground_truth_csv(std::istream& in) {
  expect_header(in, "time_ms,lat_deg,lon_deg,alt_m");
  GroundTruthTrack track;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                       std::to_string(fields.size()));
    }
    TruthPoint p;
    p.time_ms = parse_int(fields[0], line_no, 0);
    p.pos.lat_deg = parse_number(fields[1], line_no, 1);
    p.pos.lon_deg = parse_number(fields[2], line_no, 2);
    p.pos.alt_m = parse_number(fields[3], line_no, 3);
    if (p.pos.lat_deg < -90.0 || p.pos.lat_deg > 90.0) {
      throw ParseError("line " + std::to_string(line_no) + ": latitude out of [-90,90]");
    }
    if (p.pos.lon_deg <= -180.0 || p.pos.lon_deg > 180.0) {
      throw ParseError("line " + std::to_string(line_no) + ": longitude out of (-180,180]");
    }
    if (!track.points.empty() && p.time_ms <= track.points.back().time_ms) {
      throw ParseError("line " + std::to_string(line_no) + ": time_ms not strictly increasing");
    }
    track.points.push_back(p);
  }
  return track;
}

void write_ground_truth_csv(std::ostream& out, const GroundTruthTrack& track) {
  out << "time_ms,lat_deg,lon_deg,alt_m\n";
  for (const auto& p : track.points) {
    out << p.time_ms << ',' << format_double(p.pos.lat_deg) << ','
        << format_double(p.pos.lon_deg) << ',' << format_double(p.pos.alt_m) << '\n';
  }
}

Alignment align_truth(const std::vector<MeasurementSet>& epochs,
                      const GroundTruthTrack& truth, std::int64_t tolerance_ms) {
  if (epochs.empty() || truth.points.empty()) {
    throw ParseError("align_truth: empty epochs or truth track");
  }
  Alignment out;
  const auto& pts = truth.points;
  for (const auto& e : epochs) {
    // First truth point with time >= epoch time.
    auto it = std::lower_bound(pts.begin(), pts.end(), e.time_ms,
                               [](const TruthPoint& p, std::int64_t t) { return p.time_ms < t; });
    GeodeticPoint pos;
    bool paired = false;
    if (it != pts.end() && it != pts.begin() && it->time_ms != e.time_ms) {
      const auto& lo = *(it - 1);
      const auto& hi = *it;
      if (e.time_ms - lo.time_ms <= tolerance_ms || hi.time_ms - e.time_ms <= tolerance_ms) {
        const double a = static_cast<double>(e.time_ms - lo.time_ms) /
                         static_cast<double>(hi.time_ms - lo.time_ms);
        pos.lat_deg = lo.pos.lat_deg + a * (hi.pos.lat_deg - lo.pos.lat_deg);
        pos.lon_deg = lo.pos.lon_deg + a * (hi.pos.lon_deg - lo.pos.lon_deg);
        pos.alt_m = lo.pos.alt_m + a * (hi.pos.alt_m - lo.pos.alt_m);
        paired = true;
      }
    } else {
      const TruthPoint* nearest = nullptr;
      if (it != pts.end()) nearest = &*it;
      if (it != pts.begin()) {
        const TruthPoint* lo = &*(it - 1);
        if (!nearest || std::llabs(lo->time_ms - e.time_ms) < std::llabs(nearest->time_ms - e.time_ms)) {
          nearest = lo;
        }
      }
      if (nearest && std::llabs(nearest->time_ms - e.time_ms) <= tolerance_ms) {
        pos = nearest->pos;
        paired = true;
      }
    }
    if (paired) {
      out.pairs.push_back({e, pos});
    } else {
      ++out.dropped;
    }
  }
  if (out.pairs.empty()) {
    throw ParseError("align_truth: no epoch within tolerance of the truth track");
  }
  return out;
}

std::vector<MeasurementSet> load_epochs_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return parse_epochs_csv(in);
}

GroundTruthTrack load_ground_truth_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return parse_ground_truth_csv(in);
}

}  // namespace prcorr
