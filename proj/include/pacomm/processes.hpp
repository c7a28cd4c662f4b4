#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "pacomm/rng.hpp"

namespace pacomm {

// One trajectory of the pure birth process Z on [0, s_bar]: rate theta*k in
// state k, started at m.  Z_{s_bar} = m + jump count; the area under the
// trajectory determines the path likelihood together with the jump count.
struct ZPath {
  int m = 0;
  double theta = 0.0;
  double s_bar = 0.0;
  std::vector<double> jump_times;  // strictly increasing in (0, s_bar]

  int final_state() const { return m + static_cast<int>(jump_times.size()); }
  double area() const {
    double a = m * s_bar;
    for (double s : jump_times) a += s_bar - s;
    return a;
  }
};

inline ZPath simulate_Z(int m, double theta, double s_bar, RngStream& rng) {
  if (m < 1) throw std::invalid_argument("simulate_Z: m must be positive");
  if (!(theta > 0.0)) throw std::invalid_argument("simulate_Z: theta must be positive");
  if (s_bar < 0.0) throw std::invalid_argument("simulate_Z: s_bar must be non-negative");
  ZPath path{m, theta, s_bar, {}};
  int k = m;
  double s = 0.0;
  for (;;) {
    s += rng.exponential(theta * k);
    if (s > s_bar) break;
    path.jump_times.push_back(s);
    ++k;
  }
  return path;
}

// Y-check: the birth process sampled at integer times, Y_t = Z_{ln(t/tau)}
// for t in [tau, T].  Requires path.s_bar >= ln(T/tau).
inline std::vector<int> sample_check_Y(const ZPath& path, int tau, int T) {
  if (tau < 1 || T < tau) throw std::invalid_argument("sample_check_Y: need 1 <= tau <= T");
  if (path.s_bar < std::log(static_cast<double>(T) / tau) - 1e-12)
    throw std::invalid_argument("sample_check_Y: horizon shorter than ln(T/tau)");
  std::vector<int> y(T - tau + 1);
  std::size_t next = 0;
  for (int t = tau; t <= T; ++t) {
    const double s = std::log(static_cast<double>(t) / tau);
    while (next < path.jump_times.size() && path.jump_times[next] <= s) ++next;
    y[t - tau] = path.m + static_cast<int>(next);
  }
  return y;
}

// ln P(Z_s = n) for Z started at m with rate theta:
//   pi_n = C(n-1, m-1) exp(-m theta s) (1 - exp(-theta s))^(n-m).
inline double log_pi_n(int n, double s, double theta, int m) {
  if (n < m) throw std::domain_error("pi_n: n must be at least m");
  if (!(theta > 0.0)) throw std::invalid_argument("pi_n: theta must be positive");
  if (s < 0.0) throw std::invalid_argument("pi_n: s must be non-negative");
  const double mts = -static_cast<double>(m) * theta * s;
  if (n == m) return mts;
  if (s == 0.0) return -std::numeric_limits<double>::infinity();
  const double lchoose = std::lgamma(n) - std::lgamma(m) - std::lgamma(n - m + 1);
  return lchoose + mts + (n - m) * std::log1p(-std::exp(-theta * s));
}

inline double pi_n(int n, double s, double theta, int m) {
  return std::exp(log_pi_n(n, s, theta, m));
}

// Limiting empirical degree pmf for one label:
//   p_n = Gamma(1/theta + m) Gamma(n) / (theta Gamma(m) Gamma(n + 1/theta + 1)).
inline double log_p_n(int n, double theta, int m) {
  if (n < m) throw std::domain_error("p_n: n must be at least m");
  if (!(theta > 0.0)) throw std::invalid_argument("p_n: theta must be positive");
  if (m < 1) throw std::invalid_argument("p_n: m must be positive");
  const double a = 1.0 / theta;
  return std::lgamma(a + m) + std::lgamma(n) - std::log(theta) - std::lgamma(m) -
         std::lgamma(n + a + 1.0);
}

inline double p_n(int n, double theta, int m) { return std::exp(log_p_n(n, theta, m)); }

// Exact tail sum_{k > n} p_k, by the telescoping identity
// sum_{k >= n} Gamma(k)/Gamma(k+a+1) = Gamma(n) / (a Gamma(n+a)).
inline double p_n_tail(int n, double theta, int m) {
  const double a = 1.0 / theta;
  return std::exp(std::lgamma(a + m) - std::lgamma(m) + std::lgamma(n + 1.0) -
                  std::lgamma(n + 1.0 + a));
}

// Joint MGF of (Z_s, A_s) for rate lambda, initial state m (the exact
// closed form; returns +inf where the expectation diverges).
inline double mgf_psi(double u, double v, double s, double lambda, int m) {
  if (!(lambda > 0.0)) throw std::invalid_argument("mgf_psi: lambda must be positive");
  if (m < 1) throw std::invalid_argument("mgf_psi: m must be positive");
  const double d = v - lambda;
  double log_num, denom;
  if (std::fabs(d) < 1e-9 * std::max(1.0, std::fabs(lambda))) {
    // analytic limit at v = lambda: (1 - e^{ds})/d -> -s
    log_num = u;
    denom = 1.0 - lambda * std::exp(u) * s;
  } else {
    log_num = d * s + u;
    denom = 1.0 + lambda * std::exp(u) / d * (1.0 - std::exp(d * s));
  }
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return std::exp(m * (log_num - std::log(denom)));
}

enum class BhattKind { C, DT };

// Bhattacharyya coefficients for the binary test theta1 vs theta2:
// kind C observes the whole trajectory Z_{[0, s_bar]}, kind DT only Z_{s_bar}.
inline double bhattacharyya(BhattKind kind, double theta1, double theta2, int m, double s_bar) {
  if (!(theta1 > 0.0) || !(theta2 > 0.0))
    throw std::invalid_argument("bhattacharyya: thetas must be positive");
  if (s_bar < 0.0) throw std::invalid_argument("bhattacharyya: s_bar must be non-negative");
  const double half_sum = 0.5 * (theta1 + theta2);
  const double num = std::exp(-half_sum * s_bar);
  double denom;
  if (kind == BhattKind::C) {
    denom = 1.0 - (std::sqrt(theta1 * theta2) / half_sum) * (1.0 - num);
  } else {
    denom = 1.0 - std::sqrt((1.0 - std::exp(-theta1 * s_bar)) * (1.0 - std::exp(-theta2 * s_bar)));
  }
  return std::pow(num / denom, m);
}

// Exact Bayes error of MAP classification of the rate from the single
// observation Z_{s_bar}: 1 - sum_n max_v rho_v pi_n(s_bar, theta_v, m).
// The series stops once the residual mixture mass is below 1e-10.
inline double f_Z_DT(std::span<const double> rho, std::span<const double> theta_star, int m,
                     double s_bar) {
  if (rho.size() != theta_star.size())
    throw std::invalid_argument("f_Z_DT: rho and theta_star must have equal length");
  double rho_max = 0.0;
  for (double p : rho) rho_max = std::max(rho_max, p);
  if (s_bar == 0.0) return 1.0 - rho_max;
  double best_acc = 0.0, mix_acc = 0.0;
  for (long n = m; n < 100'000'000; ++n) {
    double best = 0.0, mix = 0.0;
    for (std::size_t v = 0; v < rho.size(); ++v) {
      const double p = rho[v] * pi_n(static_cast<int>(n), s_bar, theta_star[v], m);
      best = std::max(best, p);
      mix += p;
    }
    best_acc += best;
    mix_acc += mix;
    if (1.0 - mix_acc < 1e-10) break;
  }
  return 1.0 - best_acc;
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte Carlo error probability of the MAP decision from the full
// trajectory Z_{[0, s_bar]}.  Draws v ~ rho, simulates with theta_v,
// classifies via the (Z - m, area) likelihood plus ln rho; ties go to the
// smallest label.  Binomial standard error.  At s_bar = 0 the observation
// carries no information and the exact value 1 - max rho is returned.
inline McEstimate f_Z_C(std::span<const double> rho, std::span<const double> theta_star, int m,
                        double s_bar, long trials, RngStream& rng) {
  if (rho.size() != theta_star.size())
    throw std::invalid_argument("f_Z_C: rho and theta_star must have equal length");
  if (trials < 1) throw std::invalid_argument("f_Z_C: trials must be at least 1");
  const int r = static_cast<int>(rho.size());
  if (s_bar == 0.0) {
    double rho_max = 0.0;
    for (double p : rho) rho_max = std::max(rho_max, p);
    return {1.0 - rho_max, 0.0};
  }
  std::vector<double> log_rho(r), log_theta(r);
  for (int v = 0; v < r; ++v) {
    log_rho[v] = std::log(rho[v]);
    log_theta[v] = std::log(theta_star[v]);
  }
  long errors = 0;
  for (long trial = 0; trial < trials; ++trial) {
    const int v = rng.discrete(rho);
    const ZPath path = simulate_Z(m, theta_star[v], s_bar, rng);
    const double n_jumps = static_cast<double>(path.jump_times.size());
    const double area = path.area();
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int w = 0; w < r; ++w) {
      const double score = log_rho[w] + n_jumps * log_theta[w] - area * theta_star[w];
      if (score > best_score) {
        best_score = score;
        best = w;
      }
    }
    if (best != v) ++errors;
  }
  const double p = static_cast<double>(errors) / trials;
  return {p, std::sqrt(p * (1.0 - p) / trials)};
}

// One trajectory of the idealized degree process: Bernoulli(theta*y/t)
// increments from state m at the activation time.  If theta*y exceeds t the
// construction breaks down (stopping time zeta); that outcome is recorded,
// not thrown.
struct TildeYPath {
  int tau = 0;
  int m = 0;
  double theta = 0.0;
  std::vector<int> values;  // Y_t for t in [tau, tau + values.size() - 1]
  bool exploded = false;

  int final_state() const { return values.back(); }
};

inline TildeYPath simulate_tilde_Y(int tau, int T, int m, double theta, RngStream& rng) {
  if (tau < 1 || T < tau) throw std::invalid_argument("simulate_tilde_Y: need 1 <= tau <= T");
  if (m < 1 || !(theta > 0.0)) throw std::invalid_argument("simulate_tilde_Y: bad m or theta");
  TildeYPath path{tau, m, theta, {}, false};
  path.values.reserve(T - tau + 1);
  int y = m;
  path.values.push_back(y);
  for (int t = tau; t < T; ++t) {
    const double p = theta * y / t;
    if (p > 1.0) {
      path.exploded = true;  // zeta reached; Y_t = +inf beyond this point
      return path;
    }
    if (rng.bernoulli(p)) ++y;
    path.values.push_back(y);
  }
  if (theta * y > T) path.exploded = true;
  return path;
}

}  // namespace pacomm
