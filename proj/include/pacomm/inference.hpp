#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pacomm/graph.hpp"
#include "pacomm/llv.hpp"
#include "pacomm/model.hpp"
#include "pacomm/processes.hpp"

namespace pacomm {

enum class Algo { DT, CApprox, CExact, Z, Joint, MP };

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::DT: return "DT";
    case Algo::CApprox: return "C";
    case Algo::CExact: return "C-exact";
    case Algo::Z: return "Z";
    case Algo::Joint: return "joint";
    case Algo::MP: return "MP";
  }
  return "?";
}

struct LabelEstimate {
  int vertex = 0;
  int label = 0;  // 0-based
  Llv llv;        // canonical posterior log-likelihood vector
  Algo algo = Algo::DT;
};

// MAP decision: argmax_v ln rho_v + llv_v, ties to the smallest label.
inline int map_label(std::span<const double> rho, std::span<const double> llv) {
  if (rho.size() != llv.size()) throw std::invalid_argument("map_label: length mismatch");
  int best = -1;
  double best_score = kNegInf;
  for (std::size_t v = 0; v < llv.size(); ++v) {
    const double score = std::log(rho[v]) + llv[v];
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(v);
    }
  }
  if (best < 0) throw std::invalid_argument("map_label: no finite coordinate");
  return best;
}

// Degree-thresholding log likelihood, from the number of children alone:
//   Lambda(v) = -d0(tau) theta_v ln(T/tau') + |children| ln(1 - (tau'/T)^theta_v)
// with tau' = max(tau, t_o).  The binomial coefficient term is constant in v
// and omitted.  Degenerate ln(0) yields -inf coordinates rather than throwing.
inline Llv lambda_DT(const PAGraph& g, int tau, const RateTable& rates) {
  if (tau < 1 || tau > g.T) throw std::out_of_range("lambda_DT: vertex outside [1, T]");
  const int tau_eff = std::max(tau, g.t_o);
  const int n = static_cast<int>(g.children_of(tau).size());
  const double d0 = g.initial_degree(tau);
  const double log_ratio = std::log(static_cast<double>(g.T) / tau_eff);
  Llv out(rates.r);
  for (int v = 0; v < rates.r; ++v) {
    const double th = rates.theta_v[v];
    double val = -d0 * th * log_ratio;
    if (n > 0) {
      const double x = std::exp(-th * log_ratio);  // (tau'/T)^theta_v
      val += (x < 1.0) ? n * std::log1p(-x) : kNegInf;
    }
    out[v] = val;
  }
  return out;
}

enum class CMode { Approx, Exact };

// Children-based log likelihood.
// Approx (the integral form):
//   lambda(v) = |children| ln theta_v
//               + theta_v (d0 ln(tau'/T) + sum_{t in children} ln(t/T)).
// Exact (the product form along the degree path y):
//   Lambda(v) = |children| ln theta_v + sum_{t not a child} ln(1 - y_{t-1} theta_v / (t-1));
// a non-positive factor hard-excludes that label (-inf), since the observed
// path is impossible under it.
inline Llv lambda_C(const PAGraph& g, int tau, const RateTable& rates, CMode mode) {
  if (tau < 1 || tau > g.T) throw std::out_of_range("lambda_C: vertex outside [1, T]");
  const int tau_eff = std::max(tau, g.t_o);
  const auto& kids = g.children_of(tau);
  const double n = static_cast<double>(kids.size());
  const double d0 = g.initial_degree(tau);
  Llv out(rates.r);

  if (mode == CMode::Approx) {
    double time_sum = d0 * std::log(static_cast<double>(tau_eff) / g.T);
    for (int t : kids) time_sum += std::log(static_cast<double>(t) / g.T);
    for (int v = 0; v < rates.r; ++v) {
      out[v] = n * std::log(rates.theta_v[v]) + rates.theta_v[v] * time_sum;
    }
    return out;
  }

  for (int v = 0; v < rates.r; ++v) out[v] = n * std::log(rates.theta_v[v]);
  std::size_t next = 0;
  int y = g.initial_degree(tau);
  for (int t = tau_eff + 1; t <= g.T; ++t) {
    int arrived = 0;
    while (next < kids.size() && kids[next] == t) {
      ++arrived;
      ++next;
    }
    if (arrived == 0) {
      for (int v = 0; v < rates.r; ++v) {
        const double factor = 1.0 - y * rates.theta_v[v] / (t - 1);
        out[v] = (factor > 0.0) ? out[v] + std::log(factor) : kNegInf;
      }
    }
    y += arrived;
  }
  return out;
}

// Log likelihood from a Z trajectory: Lambda(v) = (Z - m) ln theta_v - A theta_v.
inline Llv lambda_Z(const ZPath& path, std::span<const double> theta_star) {
  const double n = static_cast<double>(path.jump_times.size());
  const double area = path.area();
  Llv out(theta_star.size());
  for (std::size_t v = 0; v < theta_star.size(); ++v) {
    out[v] = n * std::log(theta_star[v]) - area * theta_star[v];
  }
  return out;
}

struct JointResult {
  std::vector<int> labels;       // over V, 0-based, lexicographically smallest argmax
  std::vector<int> dropped_ts;   // times whose likelihood term was dropped for all b
  double best_score = 0.0;
};

// Joint approximate ML/MAP over label assignments b for a fixed vertex set V,
// from the attachments of arrivals t_bar+1 .. T:
//   score(b) = sum_{t=t_bar}^{T-1} ln sum_u rho_u
//                [prod_{tau in V} (Y_t^tau theta_{u,b_tau} / (m t))^{A_{t+1}^tau}]
//                (1 - sum_tau Y_t^tau theta_{u,b_tau} / (m t))^{A_{t+1}^{V^c}}.
// If the bracketed base can be non-positive at some (t, u), that t is dropped
// for every b (an artifact of the eta = eta* approximation, seen at small t).
// Cost Theta(r^|V| |V| T); meant for small V.
inline JointResult joint_estimate(const PAGraph& g, std::vector<int> V, int t_bar,
                                  const RateTable& rates, std::span<const double> rho,
                                  bool use_prior) {
  std::sort(V.begin(), V.end());
  V.erase(std::unique(V.begin(), V.end()), V.end());
  if (V.empty()) throw std::invalid_argument("joint_estimate: V must be non-empty");
  if (V.front() < 1 || V.back() > g.T) throw std::invalid_argument("joint_estimate: vertex outside [1, T]");
  if (t_bar < std::max(V.back(), g.t_o) || t_bar >= g.T)
    throw std::invalid_argument("joint_estimate: need max(V, t_o) <= t_bar < T");
  const int r = rates.r;
  const int k = static_cast<int>(V.size());
  const int steps = g.T - t_bar;  // t = t_bar .. T-1

  // degrees Y_t^tau and attachment counts A_{t+1}^tau, laid out step-major
  std::vector<double> deg(static_cast<std::size_t>(steps) * k);
  std::vector<int> att(static_cast<std::size_t>(steps) * k, 0);
  std::vector<int> att_rest(steps, g.m);
  std::vector<int> vindex(g.T + 1, -1);
  for (int j = 0; j < k; ++j) vindex[V[j]] = j;
  for (int j = 0; j < k; ++j) {
    const DegreePath path = degree_path(g, V[j]);
    for (int i = 0; i < steps; ++i) deg[static_cast<std::size_t>(i) * k + j] = path.at(t_bar + i);
  }
  for (int i = 0; i < steps; ++i) {
    const int arrival = t_bar + i + 1;
    for (int parent : g.parents_of(arrival)) {
      if (vindex[parent] >= 0) {
        ++att[static_cast<std::size_t>(i) * k + vindex[parent]];
        --att_rest[i];
      }
    }
  }

  // worst-case base over (u, b): drop t if 1 - sum_j Y_j max_w theta(u,w) / (mt) <= 0
  std::vector<double> theta_row_max(r, 0.0);
  for (int u = 0; u < r; ++u)
    for (int w = 0; w < r; ++w) theta_row_max[u] = std::max(theta_row_max[u], rates.theta(u, w));
  std::vector<char> dropped(steps, 0);
  JointResult result;
  for (int i = 0; i < steps; ++i) {
    const double inv_mt = 1.0 / (static_cast<double>(g.m) * (t_bar + i));
    double ysum = 0.0;
    for (int j = 0; j < k; ++j) ysum += deg[static_cast<std::size_t>(i) * k + j];
    for (int u = 0; u < r; ++u) {
      if (1.0 - ysum * theta_row_max[u] * inv_mt <= 0.0) {
        dropped[i] = 1;
        result.dropped_ts.push_back(t_bar + i);
        break;
      }
    }
  }
  if (static_cast<int>(result.dropped_ts.size()) == steps)
    throw std::runtime_error("joint_estimate: every time step was dropped");

  std::vector<double> log_rho(r);
  for (int v = 0; v < r; ++v) log_rho[v] = std::log(rho[v]);

  std::vector<int> b(k, 0);
  double best_score = kNegInf;
  bool have_best = false;
  auto ipow = [](double x, int e) {
    double acc = 1.0;
    for (int i = 0; i < e; ++i) acc *= x;
    return acc;
  };
  for (;;) {
    double score = 0.0;
    if (use_prior) {
      for (int j = 0; j < k; ++j) score += log_rho[b[j]];
    }
    for (int i = 0; i < steps; ++i) {
      if (dropped[i]) continue;
      const double inv_mt = 1.0 / (static_cast<double>(g.m) * (t_bar + i));
      const double* yrow = &deg[static_cast<std::size_t>(i) * k];
      const int* arow = &att[static_cast<std::size_t>(i) * k];
      double acc = 0.0;
      for (int u = 0; u < r; ++u) {
        double s = 0.0, prod = 1.0;
        for (int j = 0; j < k; ++j) {
          const double x = yrow[j] * rates.theta(u, b[j]) * inv_mt;
          s += x;
          if (arow[j] > 0) prod *= ipow(x, arow[j]);
        }
        acc += rho[u] * prod * ipow(1.0 - s, att_rest[i]);
      }
      score += std::log(acc);
    }
    if (!have_best || score > best_score) {
      best_score = score;
      result.labels = b;
      have_best = true;
    }
    // next assignment in lexicographic order (first coordinate most significant)
    int pos = k - 1;
    while (pos >= 0 && b[pos] == r - 1) b[pos--] = 0;
    if (pos < 0) break;
    ++b[pos];
  }
  result.best_score = best_score;
  return result;
}

// Consistent estimator of the rate parameter from a degree path:
//   theta_hat = (Y_T - Y_tau) / sum_{t=tau}^{T-1} Y_t / t.
inline double rate_estimate(const DegreePath& path) {
  if (path.y.empty()) throw std::invalid_argument("rate_estimate: empty path");
  if (path.y.front() < 1) throw std::invalid_argument("rate_estimate: initial degree must be >= 1");
  for (std::size_t i = 1; i < path.y.size(); ++i) {
    if (path.y[i] < path.y[i - 1])
      throw std::invalid_argument("rate_estimate: path must be nondecreasing");
  }
  const long long gain = path.y.back() - path.y.front();
  if (gain == 0) return 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i + 1 < path.y.size(); ++i) {
    denom += static_cast<double>(path.y[i]) / (path.t0 + static_cast<int>(i));
  }
  return static_cast<double>(gain) / denom;
}

}  // namespace pacomm
