#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dpgp {

/// Public inputs X and private outputs y, clipped to [clip_low, clip_high].
///
/// `offset` is what was subtracted from y when centering; add it back to
/// anything predicted from this dataset to return to original units.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double clip_low = 0.0;
  double clip_high = 1.0;
  double offset = 0.0;
  std::string label;
  std::size_t rejected_rows = 0;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dims() const { return X.cols(); }
  // Sensitivity: the width of the clipping interval.
  double d() const { return clip_high - clip_low; }

  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

}  // namespace dpgp
