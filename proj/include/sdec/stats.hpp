#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace sdec {

struct Quantiles {
  double min = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;

  // Median of an even-sized sample is the mean of the two middle values.
  static Quantiles of(std::vector<double> values) {
    Quantiles q;
    q.count = values.size();
    if (values.empty()) return q;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    q.min = values.front();
    q.max = values.back();
    q.median = (n % 2 == 1) ? values[n / 2]
                            : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return q;
  }
};

}  // namespace sdec
