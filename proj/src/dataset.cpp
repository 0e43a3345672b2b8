#include "dpgp/dataset.hpp"

#include <stdexcept>

namespace dpgp {

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = rows[i];
    if (r < 0 || r >= X.rows()) throw std::out_of_range("dataset row index out of range");
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(r);
    out.y[static_cast<Eigen::Index>(i)] = y[r];
  }
  out.clip_low = clip_low;
  out.clip_high = clip_high;
  out.offset = offset;
  out.label = label;
  return out;
}

}  // namespace dpgp
