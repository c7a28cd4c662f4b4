#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace pacomm {

// A log-likelihood vector holds ln P(observation | label v) per label.
// Two vectors are equivalent iff they differ by a constant; the canonical
// representative has max entry 0.  -inf entries encode hard exclusion.
using Llv = std::vector<double>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double max_entry(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  return m;
}

// Shift so the max entry is 0.  Idempotent.  Throws if every entry is -inf.
inline void canonicalize_in_place(Llv& v) {
  const double m = max_entry(v);
  if (m == kNegInf) throw std::invalid_argument("canonicalize: all entries are -inf");
  for (double& x : v) {
    if (x != kNegInf) x -= m;
  }
}

inline Llv canonicalize(Llv v) {
  canonicalize_in_place(v);
  return v;
}

// Null vector: equivalent to the zero vector (all entries equal and finite).
inline bool is_null(std::span<const double> v, double tol = 0.0) {
  for (double x : v) {
    if (x == kNegInf) return false;
    if (std::fabs(x - v[0]) > tol) return false;
  }
  return true;
}

inline bool equivalent(std::span<const double> a, std::span<const double> b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  Llv ca(a.begin(), a.end()), cb(b.begin(), b.end());
  canonicalize_in_place(ca);
  canonicalize_in_place(cb);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (ca[i] == kNegInf && cb[i] == kNegInf) continue;
    if (std::fabs(ca[i] - cb[i]) > tol) return false;
  }
  return true;
}

// ln sum_i exp(x_i) over terms supplied incrementally; -inf terms drop out.
class LogSumExp {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x > peak_) {
      if (peak_ != kNegInf) sum_ = sum_ * std::exp(peak_ - x) + 1.0;
      else sum_ = 1.0;
      peak_ = x;
    } else {
      sum_ += std::exp(x - peak_);
    }
  }
  double value() const { return peak_ == kNegInf ? kNegInf : peak_ + std::log(sum_); }

 private:
  double peak_ = kNegInf;
  double sum_ = 0.0;
};

// Euclidean distance between two equal-length vectors; -inf coordinates
// match -inf at distance 0, otherwise contribute +inf.
inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == kNegInf && b[i] == kNegInf) continue;
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) return std::numeric_limits<double>::infinity();
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace pacomm
