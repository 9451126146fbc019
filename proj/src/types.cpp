#include "oasd/types.hpp"
#include "oasd/parallel.hpp"

#include <cmath>
#include <sstream>

namespace oasd {

void Dataset::validate() const {
  const Index rows = y.size();
  if (d.size() != rows || x.rows() != rows) {
    throw Error(ErrorKind::Data, "dataset columns have inconsistent lengths");
  }
  for (Index i = 0; i < rows; ++i) {
    bool finite = std::isfinite(y[i]) && std::isfinite(d[i]);
    for (Index k = 0; finite && k < x.cols(); ++k) {
      finite = std::isfinite(x(i, k));
    }
    if (!finite) {
      std::ostringstream msg;
      msg << "non-finite value in row " << i;
      throw Error(ErrorKind::Data, msg.str());
    }
  }
}

IntervalU IntervalU::make(double y1, double y2) {
  if (!(y1 < y2) || !std::isfinite(y1) || !std::isfinite(y2)) {
    std::ostringstream msg;
    msg << "interval requires finite y1 < y2, got (" << y1 << ", " << y2 << ")";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
  return IntervalU{y1, y2};
}

std::size_t default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace oasd
