#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace cxrprior {

// Neumaier's variant of Kahan summation, accumulated in index order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

// Mean that does not depend on the order of `values`: they are summed in
// sorted order. Returns 0 for an empty input.
inline double order_invariant_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return compensated_sum(sorted) / static_cast<double>(sorted.size());
}

}  // namespace cxrprior
