#pragma once

#include <cmath>

#include "mguq/common.hpp"

namespace mguq {

// Equally spaced score grid {i/m : i = 0..m} with nearest-value assignment,
// ties toward the lower value. m=4 gives the default 5 level sets.
struct LevelSetGrid {
  int m = 4;

  int bin_count() const { return m + 1; }
  double value(int i) const { return static_cast<double>(i) / m; }

  int index_of(double score) const {
    double x = score * m;
    int i = static_cast<int>(std::floor(x));
    if (x - i > 0.5) ++i;
    if (i < 0) i = 0;
    if (i > m) i = m;
    return i;
  }

  double round(double score) const { return value(index_of(score)); }
};

}  // namespace mguq
