#ifndef PRCORR_FEATURES_HPP
#define PRCORR_FEATURES_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "prcorr/labeling.hpp"
#include "prcorr/solver.hpp"

namespace prcorr {

inline constexpr int kFeatureDim = 16;
inline constexpr int kSlots = 32;  // GPS PRN 1..32

// Fixed column order:
//   0      cn0 / 50
//   1,2    sin E, cos E
//   3      svid / 32
//   4..9   lat deg/90, lat min/60, lat sec/60, lon deg/180, lon min/60, lon sec/60
//   10..12 unit geometry vector in NED
//   13..15 heading unit vector in NED
using FeatureVector = std::array<double, kFeatureDim>;

struct EpochFeatures {
  std::int64_t time_ms = 0;
  std::vector<int> svids;
  std::vector<FeatureVector> features;  // parallel to svids
};

struct FeatureSample {
  std::int64_t time_ms = 0;
  std::array<FeatureVector, kSlots> slots{};  // zero vector when not visible
  std::array<bool, kSlots> mask{};            // slot i <-> svid i+1
  std::array<double, kSlots> labels{};        // zero when not visible
  std::array<double, kSlots> h_slots{};       // epoch h-row mapped to slots
};

// Heading fed in from the previous epoch's pass; returns the heading used so
// the caller can chain epochs. next_pos absent (last epoch) or displacement
// < 0.2 m holds the previous heading; no previous heading defaults to north.
EpochFeatures extract_features(const MeasurementSet& epoch, const NavSolution& nav,
                               const GeometrySolve& geom,
                               const std::optional<EcefPoint>& next_pos,
                               std::optional<NedVector>& heading_state);

// Full sequential pass: per-epoch WLS plus the one-epoch heading lookahead.
std::vector<EpochFeatures> extract_trace_features(const std::vector<MeasurementSet>& trace);

std::vector<FeatureSample> assemble_samples(const std::vector<EpochFeatures>& features,
                                            const std::vector<LabelRecord>& labels);

// Feature sidecar CSV.
void write_features_csv(std::ostream& out, const std::vector<EpochFeatures>& features);
std::vector<EpochFeatures> read_features_csv(std::istream& in);

}  // namespace prcorr

#endif
