#ifndef PRCORR_EVAL_HPP
#define PRCORR_EVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "prcorr/ingest.hpp"

namespace prcorr {

struct TrackPoint {
  std::int64_t time_ms = 0;
  GeodeticPoint pos;
  double clock_bias_m = 0.0;
};

struct EvalReport {
  std::vector<double> errors_m;  // per-epoch horizontal error
  double p50 = 0.0;
  double p95 = 0.0;
  double score = 0.0;            // (p50 + p95) / 2
  std::vector<std::pair<double, double>> ecdf;
};

// Vincenty distance between estimate and truth per epoch, matched on exact
// timestamps (altitude ignored).
std::vector<double> horizontal_errors(const std::vector<TrackPoint>& track,
                                      const GroundTruthTrack& truth);

// Percentile by linear interpolation between closest ranks.
double percentile(std::vector<double> values, double q);
double score(const std::vector<double>& errors);
std::vector<std::pair<double, double>> ecdf(std::vector<double> errors);

EvalReport evaluate(const std::vector<TrackPoint>& track, const GroundTruthTrack& truth);

// track CSV: time_ms,lat_deg,lon_deg,alt_m,clk_m
void write_track_csv(std::ostream& out, const std::vector<TrackPoint>& track);
std::vector<TrackPoint> parse_track_csv(std::istream& in);
std::string report_json(const EvalReport& report);

}  // namespace prcorr

#endif
