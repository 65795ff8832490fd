#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mguq {

// Thrown for malformed inputs: bad config keys, schema violations, out-of-range
// values. Anything else (I/O, numerical failures) uses std::runtime_error.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Neumaier-compensated accumulator. Bin biases are asserted to ~1e-10 at
// 50k+ terms, which plain summation cannot guarantee.
class StableSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

uint64_t fnv1a64(std::string_view s);

// Derives an independent stream seed from (seed, tag, index).
uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t index = 0);

}  // namespace mguq
