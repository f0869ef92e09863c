#include "prcorr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "prcorr/geo.hpp"

namespace prcorr {

std::vector<double> horizontal_errors(const std::vector<TrackPoint>& track,
                                      const GroundTruthTrack& truth) {
  std::map<std::int64_t, const GeodeticPoint*> by_time;
  for (const auto& p : truth.points) by_time[p.time_ms] = &p.pos;
  std::vector<double> out;
  out.reserve(track.size());
  for (const auto& p : track) {
    const auto it = by_time.find(p.time_ms);
    if (it == by_time.end()) {
      throw GeoError("horizontal_errors: no truth point at time " +
                     std::to_string(p.time_ms));
    }
    GeodeticPoint a = p.pos;
    GeodeticPoint b = *it->second;
    a.alt_m = b.alt_m = 0.0;
    out.push_back(vincenty_distance(a, b));
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw GeoError("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  if (lo == hi) return values[lo];
  const double a = rank - static_cast<double>(lo);
  return values[lo] + a * (values[hi] - values[lo]);
}

double score(const std::vector<double>& errors) {
  return 0.5 * (percentile(errors, 0.50) + percentile(errors, 0.95));
}

std::vector<std::pair<double, double>> ecdf(std::vector<double> errors) {
  if (errors.empty()) throw GeoError("ecdf: empty sample");
  std::sort(errors.begin(), errors.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(errors.size());
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    out.emplace_back(errors[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

EvalReport evaluate(const std::vector<TrackPoint>& track, const GroundTruthTrack& truth) {
  EvalReport r;
  r.errors_m = horizontal_errors(track, truth);
  r.p50 = percentile(r.errors_m, 0.50);
  r.p95 = percentile(r.errors_m, 0.95);
  r.score = 0.5 * (r.p50 + r.p95);
  r.ecdf = ecdf(r.errors_m);
  return r;
}

void write_track_csv(std::ostream& out, const std::vector<TrackPoint>& track) {
  out << "time_ms,lat_deg,lon_deg,alt_m,clk_m\n";
  for (const auto& p : track) {
    out << p.time_ms << ',' << format_double(p.pos.lat_deg) << ','
        << format_double(p.pos.lon_deg) << ',' << format_double(p.pos.alt_m) << ','
        << format_double(p.clock_bias_m) << '\n';
  }
}

std::vector<TrackPoint> parse_track_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty track file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_ms,lat_deg,lon_deg,alt_m,clk_m") {
    throw ParseError("bad track header: '" + line + "'");
  }
  std::vector<TrackPoint> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    TrackPoint p;
    char c1, c2, c3, c4;
    if (!(ss >> p.time_ms >> c1 >> p.pos.lat_deg >> c2 >> p.pos.lon_deg >> c3 >>
          p.pos.alt_m >> c4 >> p.clock_bias_m) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw ParseError("line " + std::to_string(line_no) + ": bad track row");
    }
    out.push_back(p);
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::json j;
  j["count"] = report.errors_m.size();
  j["p50_m"] = report.p50;
  j["p95_m"] = report.p95;
  j["score_m"] = report.score;
  j["errors_m"] = report.errors_m;
  nlohmann::json e = nlohmann::json::array();
  for (const auto& [err, frac] : report.ecdf) e.push_back({err, frac});
  j["ecdf"] = e;
  return j.dump(2) + "\n";
}

}  // namespace prcorr
