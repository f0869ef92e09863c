#ifndef PRCORR_INGEST_HPP
#define PRCORR_INGEST_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prcorr/geo.hpp"

namespace prcorr {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SatObservation {
  int svid = 0;               // GPS PRN, 1..32
  double pr_m = 0.0;          // corrected pseudorange
  double cn0_dbhz = 0.0;
  EcefPoint sat_pos;          // satellite position at transmit time
  double pr_sigma_m = 1.0;    // 1-sigma pseudorange uncertainty
};

struct MeasurementSet {
  std::int64_t time_ms = 0;
  std::vector<SatObservation> obs;
};

struct TruthPoint {
  std::int64_t time_ms = 0;
  GeodeticPoint pos;
};

struct GroundTruthTrack {
  std::vector<TruthPoint> points;
};

// epochs CSV: time_ms,svid,pr_m,cn0_dbhz,sat_x_m,sat_y_m,sat_z_m,pr_sigma_m
std::vector<MeasurementSet> parse_epochs_csv(std::istream& in);
void write_epochs_csv(std::ostream& out, const std::vector<MeasurementSet>& epochs);

// truth CSV: time_ms,lat_deg,lon_deg,alt_m
GroundTruthTrack parse_ground_truth_csv(std::istream& in);
void write_ground_truth_csv(std::ostream& out, const GroundTruthTrack& track);

struct AlignedEpoch {
  MeasurementSet epoch;
  GeodeticPoint truth;
};

struct Alignment {
  std::vector<AlignedEpoch> pairs;
  int dropped = 0;
};

// Pairs each epoch with the nearest-in-time truth point (linear interpolation
// when bracketed). Epochs farther than tolerance_ms from any truth are dropped.
Alignment align_truth(const std::vector<MeasurementSet>& epochs,
                      const GroundTruthTrack& truth,
                      std::int64_t tolerance_ms = 500);

// Shared CSV helpers (17 significant digits, bit-exact round trip).
std::string format_double(double v);
std::vector<MeasurementSet> load_epochs_csv(const std::string& path);
GroundTruthTrack load_ground_truth_csv(const std::string& path);

}  // namespace prcorr

#endif
