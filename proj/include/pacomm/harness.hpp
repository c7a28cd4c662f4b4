#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pacomm/rng.hpp"

namespace pacomm {

struct Bin {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const Bin&, const Bin&) = default;
};

// Arrival-time bins with endpoints ceil(factor^k), clipped to [1, T] and
// deduplicated; the last bin absorbs T.  The bins partition [1, T].
inline std::vector<Bin> geometric_bins(int T, double factor) {
  if (T < 1) throw std::invalid_argument("geometric_bins: T must be at least 1");
  if (!(factor > 1.0)) throw std::invalid_argument("geometric_bins: factor must exceed 1");
  std::vector<int> endpoints;
  for (double x = 1.0;; x *= factor) {
    const int e = static_cast<int>(std::ceil(x));
    if (e >= T) {
      endpoints.push_back(T);
      break;
    }
    endpoints.push_back(e);
  }
  endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());
  std::vector<Bin> bins;
  if (endpoints.size() == 1) return {{1, T}};
  for (std::size_t i = 0; i + 1 < endpoints.size(); ++i) {
    const bool last = i + 2 == endpoints.size();
    bins.push_back({endpoints[i], last ? endpoints[i + 1] : endpoints[i + 1] - 1});
  }
  return bins;
}

// Scoring of one estimated labeling against the truth, adjusted for label
// symmetry: the error-minimizing permutation from the given group is applied
// to the estimate (ties broken uniformly at random among the minimizers).
// When a partition of the labels into sides is supplied, errors are split
// into big (sides differ) and small (same side, labels differ).
struct ScoreResult {
  std::vector<std::uint8_t> errors;
  std::vector<std::uint8_t> big_errors;    // empty without a partition
  std::vector<std::uint8_t> small_errors;  // empty without a partition
  std::vector<int> permutation;            // the permutation applied to the estimate
  double error_rate = 0.0;
  double big_rate = 0.0;
  double small_rate = 0.0;
};

inline ScoreResult error_metrics(std::span<const int> true_labels,
                                 std::span<const int> est_labels,
                                 const std::vector<std::vector<int>>& symmetry, RngStream& rng,
                                 std::span<const int> partition = {}) {
  if (true_labels.size() != est_labels.size())
    throw std::invalid_argument("error_metrics: label vectors differ in length");
  if (symmetry.empty()) throw std::invalid_argument("error_metrics: symmetry group is empty");
  bool has_identity = false;
  for (const auto& perm : symmetry) {
    bool id = true;
    for (std::size_t v = 0; v < perm.size(); ++v) id = id && perm[v] == static_cast<int>(v);
    has_identity = has_identity || id;
  }
  if (!has_identity) throw std::invalid_argument("error_metrics: symmetry must contain identity");

  const std::size_t n = true_labels.size();
  long long best_err = -1;
  std::vector<std::size_t> minimizers;
  for (std::size_t pi = 0; pi < symmetry.size(); ++pi) {
    const auto& perm = symmetry[pi];
    long long err = 0;
    for (std::size_t i = 0; i < n; ++i) err += perm[est_labels[i]] != true_labels[i];
    if (best_err < 0 || err < best_err) {
      best_err = err;
      minimizers.assign(1, pi);
    } else if (err == best_err) {
      minimizers.push_back(pi);
    }
  }
  const auto& perm =
      symmetry[minimizers[minimizers.size() == 1 ? 0 : rng.uniform_below(minimizers.size())]];

  ScoreResult out;
  out.permutation = perm;
  out.errors.resize(n);
  const bool split = !partition.empty();
  if (split) {
    out.big_errors.resize(n);
    out.small_errors.resize(n);
  }
  long long big = 0, small = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int est = perm[est_labels[i]];
    const int truth = true_labels[i];
    out.errors[i] = est != truth;
    if (split && est != truth) {
      if (partition[est] != partition[truth]) {
        out.big_errors[i] = 1;
        ++big;
      } else {
        out.small_errors[i] = 1;
        ++small;
      }
    }
  }
  out.error_rate = n == 0 ? 0.0 : static_cast<double>(best_err) / n;
  if (split && n > 0) {
    out.big_rate = static_cast<double>(big) / n;
    out.small_rate = static_cast<double>(small) / n;
  }
  return out;
}

// Aggregated per-bin error counts across trials, one row per (bin, algorithm).
struct BinRow {
  int lo = 0;
  int hi = 0;
  std::string algorithm;
  long long errors = 0;
  long long n = 0;
  long long big_errors = 0;
  long long small_errors = 0;

  double error_rate() const { return n == 0 ? 0.0 : static_cast<double>(errors) / n; }
  double std_error() const {
    if (n == 0) return 0.0;
    const double p = error_rate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  }
  bool low_sample() const { return n < 30; }  // flagged: stderr unreliable
};

struct ErrorReport {
  std::vector<Bin> bins;
  std::vector<BinRow> rows;
  // per-trial error counts over all scored vertices, keyed by algorithm
  std::map<std::string, std::vector<long long>> per_graph_errors;
  std::map<std::string, std::vector<long long>> per_graph_n;
  bool has_partition = false;

  std::vector<double> per_graph_fraction(const std::string& algo) const {
    std::vector<double> out;
    const auto it = per_graph_errors.find(algo);
    const auto jt = per_graph_n.find(algo);
    if (it == per_graph_errors.end() || jt == per_graph_n.end()) return out;
    out.reserve(it->second.size());
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      out.push_back(jt->second[i] == 0
                        ? 0.0
                        : static_cast<double>(it->second[i]) / static_cast<double>(jt->second[i]));
    }
    return out;
  }
};

}  // namespace pacomm
