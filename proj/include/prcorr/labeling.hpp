#ifndef PRCORR_LABELING_HPP
#define PRCORR_LABELING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "prcorr/estimators.hpp"
#include "prcorr/solver.hpp"

namespace prcorr {

struct LabelRecord {
  std::int64_t time_ms = 0;
  int svid = 0;
  double label_m = 0.0;               // smoothed bias label r_bar - r
  std::vector<int> visible_svids;     // epoch's svid order
  Eigen::VectorXd h_row;              // matching visible_svids order
};

// Per-satellite pseudorange error estimate rho - |truth - sat| - clk_hat.
Eigen::VectorXd estimate_pr_errors(const MeasurementSet& epoch,
                                   const EcefPoint& truth_pos,
                                   const NavSolution& wls);

// |x_bar - sat| - |x - sat|
double smoothed_label(const EcefPoint& sat_pos, const EcefPoint& smoothed_pos,
                      const EcefPoint& truth_pos);

// One record per visible satellite per retained epoch (the first `discard`
// epochs are dropped for smoother warm-up). `aligned` pairs epochs with
// truth; `smoothed` must cover the same timestamps.
std::vector<LabelRecord> build_label_dataset(const std::vector<AlignedEpoch>& aligned,
                                             const SmoothedTrack& smoothed,
                                             int discard = 120);

// Sidecar files: labels `time_ms,svid,label_m`, h-rows `time_ms,svid,h_value`.
void write_label_csv(std::ostream& out, const std::vector<LabelRecord>& records);
void write_hrow_csv(std::ostream& out, const std::vector<LabelRecord>& records);
std::vector<LabelRecord> read_label_dataset(std::istream& labels_in, std::istream& hrows_in);

}  // namespace prcorr

#endif
