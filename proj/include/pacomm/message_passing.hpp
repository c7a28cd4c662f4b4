#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pacomm/graph.hpp"
#include "pacomm/inference.hpp"
#include "pacomm/llv.hpp"
#include "pacomm/model.hpp"

namespace pacomm {

enum class Schedule { Synchronous, TwoPhase };
enum class TerminationOn { LambdaDelta, MessageDelta };

struct MPConfig {
  Schedule schedule = Schedule::Synchronous;
  bool balancing = false;
  bool balance_nu = true;  // per-family switches, active when balancing is on
  bool balance_mu = true;
  TerminationOn termination = TerminationOn::LambdaDelta;
  double termination_threshold = 1.0;
  int max_iterations = 200;
  std::vector<std::pair<int, int>> seed_assignments;  // vertex (1-based) -> label (0-based)
};

// Child-to-parent message map: g(nu)(v) = ln sum_u e^{nu(u)} rho_u theta_{u,v} / theta_v.
// Returned in canonical form; -inf input coordinates drop out of the sum.
inline Llv g_cp(std::span<const double> nu, const RateTable& rates, std::span<const double> rho) {
  const int r = rates.r;
  Llv out(r);
  for (int v = 0; v < r; ++v) {
    LogSumExp lse;
    for (int u = 0; u < r; ++u) {
      if (nu[u] == kNegInf) continue;
      lse.add(nu[u] + std::log(rho[u] * rates.theta(u, v) / rates.theta_v[v]));
    }
    out[v] = lse.value();
  }
  canonicalize_in_place(out);
  return out;
}

// Parent-to-child message map: g(mu)(v) = ln sum_v' theta_{v,v'} e^{mu(v')} rho_v' / theta_v'.
inline Llv g_pc(std::span<const double> mu, const RateTable& rates, std::span<const double> rho) {
  const int r = rates.r;
  Llv out(r);
  for (int v = 0; v < r; ++v) {
    LogSumExp lse;
    for (int w = 0; w < r; ++w) {
      if (mu[w] == kNegInf) continue;
      lse.add(mu[w] + std::log(rates.theta(v, w) * rho[w] / rates.theta_v[w]));
    }
    out[v] = lse.value();
  }
  canonicalize_in_place(out);
  return out;
}

// Message state for loopy belief propagation over the post-initial edges.
// One slot per directed adjacency (child tau -> parent tau_0), with
// multiplicity: parallel edges get independent slots.  All stored messages
// are canonical log-likelihood vectors, flattened with stride r.
struct MessageBoard {
  const PAGraph* graph = nullptr;
  RateTable rates;
  std::vector<double> rho;
  int r = 0;
  int n_slots = 0;
  std::vector<int> slot_child, slot_parent;
  std::vector<std::vector<int>> in_slots;  // per vertex: slots where it is the parent
  std::vector<double> lambda_c;            // T x r cached canonical children likelihoods
  std::vector<double> nu, mu;              // last computed pre-map messages, n_slots x r
  std::vector<double> nu_t, mu_t;          // tilde messages (the iteration state)
  std::vector<double> sum_nu_t, sum_mu_t;  // per-vertex incoming tilde sums, T x r
  std::vector<int> seed_of;                // per vertex: seed label or -1
  std::vector<double> k_cp, k_pc;          // ln-space kernels, r x r
  std::vector<double> seed_nu_t, seed_mu_t;  // per label: g_cp/g_pc of the hard vector, r x r
  // two-phase progress: 0 = child->parent sweeps, 1 = parent->child sweeps, 2 = done
  int phase = 0;
  bool balance_skipped_nu = false;
  bool balance_skipped_mu = false;

  double* slot(std::vector<double>& a, int s) { return &a[static_cast<std::size_t>(s) * r]; }
  const double* slot(const std::vector<double>& a, int s) const {
    return &a[static_cast<std::size_t>(s) * r];
  }
  double* vertex_row(std::vector<double>& a, int tau) {
    return &a[static_cast<std::size_t>(tau - 1) * r];
  }
  const double* vertex_row(const std::vector<double>& a, int tau) const {
    return &a[static_cast<std::size_t>(tau - 1) * r];
  }
};

namespace detail {

// out(v) = LSE_u(in(u) + kernel(u, v)); canonical.  kernel is r x r, u-major.
inline void apply_kernel(const double* in, const double* kernel, int r, double* out) {
  double peak = kNegInf;
  for (int v = 0; v < r; ++v) {
    LogSumExp lse;
    for (int u = 0; u < r; ++u) {
      if (in[u] == kNegInf) continue;
      lse.add(in[u] + kernel[u * r + v]);
    }
    out[v] = lse.value();
    peak = std::max(peak, out[v]);
  }
  for (int v = 0; v < r; ++v) {
    if (out[v] != kNegInf) out[v] -= peak;
  }
}

inline void refresh_sums(MessageBoard& b) {
  std::fill(b.sum_nu_t.begin(), b.sum_nu_t.end(), 0.0);
  std::fill(b.sum_mu_t.begin(), b.sum_mu_t.end(), 0.0);
  for (int s = 0; s < b.n_slots; ++s) {
    const double* nt = b.slot(b.nu_t, s);
    const double* mt = b.slot(b.mu_t, s);
    double* into_parent = b.vertex_row(b.sum_nu_t, b.slot_parent[s]);
    double* into_child = b.vertex_row(b.sum_mu_t, b.slot_child[s]);
    for (int v = 0; v < b.r; ++v) {
      into_parent[v] += nt[v];
      into_child[v] += mt[v];
    }
  }
}

}  // namespace detail

inline MessageBoard init_board(const PAGraph& g, const RateTable& rates,
                               std::span<const double> rho, const MPConfig& config) {
  if (rates.r != g.r) throw std::invalid_argument("init_board: rate table does not match graph");
  MessageBoard b;
  b.graph = &g;
  b.rates = rates;
  b.rho.assign(rho.begin(), rho.end());
  b.r = g.r;
  b.n_slots = g.m * (g.T - g.t_o);
  b.slot_child.resize(b.n_slots);
  b.slot_parent.resize(b.n_slots);
  b.in_slots.assign(g.T, {});
  const std::size_t initial_edges = static_cast<std::size_t>(g.m) * g.t_o;
  for (int s = 0; s < b.n_slots; ++s) {
    const Edge& e = g.edges[initial_edges + s];
    b.slot_child[s] = e.tail;
    b.slot_parent[s] = e.head;
    b.in_slots[e.head - 1].push_back(s);
  }

  const int r = b.r;
  b.k_cp.resize(static_cast<std::size_t>(r) * r);
  b.k_pc.resize(static_cast<std::size_t>(r) * r);
  for (int u = 0; u < r; ++u) {
    for (int v = 0; v < r; ++v) {
      b.k_cp[u * r + v] = std::log(b.rho[u] * rates.theta(u, v) / rates.theta_v[v]);
      // g_pc sums over the sender's label w; kernel indexed (w, v)
      b.k_pc[u * r + v] = std::log(rates.theta(v, u) * b.rho[u] / rates.theta_v[u]);
    }
  }

  b.lambda_c.resize(static_cast<std::size_t>(g.T) * r);
  for (int tau = 1; tau <= g.T; ++tau) {
    Llv lc = canonicalize(lambda_C(g, tau, rates, CMode::Approx));
    std::copy(lc.begin(), lc.end(), b.vertex_row(b.lambda_c, tau));
  }

  b.seed_of.assign(g.T, -1);
  for (auto [vertex, label] : config.seed_assignments) {
    if (vertex < 1 || vertex > g.T) throw std::invalid_argument("init_board: seed vertex outside [1, T]");
    if (label < 0 || label >= r) throw std::invalid_argument("init_board: seed label outside [r]");
    b.seed_of[vertex - 1] = label;
  }
  b.seed_nu_t.resize(static_cast<std::size_t>(r) * r);
  b.seed_mu_t.resize(static_cast<std::size_t>(r) * r);
  for (int lab = 0; lab < r; ++lab) {
    Llv hard(r, kNegInf);
    hard[lab] = 0.0;
    Llv cp = g_cp(hard, rates, b.rho);
    Llv pc = g_pc(hard, rates, b.rho);
    std::copy(cp.begin(), cp.end(), &b.seed_nu_t[static_cast<std::size_t>(lab) * r]);
    std::copy(pc.begin(), pc.end(), &b.seed_mu_t[static_cast<std::size_t>(lab) * r]);
  }

  // initial conditions: all tilde messages null; equivalently nu = lambda_c of
  // the child and mu = lambda_c of the parent.  Seed slots carry the fixed
  // hard-evidence messages from the start.
  b.nu.assign(static_cast<std::size_t>(b.n_slots) * r, 0.0);
  b.mu.assign(static_cast<std::size_t>(b.n_slots) * r, 0.0);
  b.nu_t.assign(static_cast<std::size_t>(b.n_slots) * r, 0.0);
  b.mu_t.assign(static_cast<std::size_t>(b.n_slots) * r, 0.0);
  for (int s = 0; s < b.n_slots; ++s) {
    const int c = b.slot_child[s], p = b.slot_parent[s];
    double* nu_row = b.slot(b.nu, s);
    double* mu_row = b.slot(b.mu, s);
    if (b.seed_of[c - 1] >= 0) {
      std::fill(nu_row, nu_row + r, kNegInf);
      nu_row[b.seed_of[c - 1]] = 0.0;
      const double* st = &b.seed_nu_t[static_cast<std::size_t>(b.seed_of[c - 1]) * r];
      std::copy(st, st + r, b.slot(b.nu_t, s));
    } else {
      std::copy(b.vertex_row(b.lambda_c, c), b.vertex_row(b.lambda_c, c) + r, nu_row);
    }
    if (b.seed_of[p - 1] >= 0) {
      std::fill(mu_row, mu_row + r, kNegInf);
      mu_row[b.seed_of[p - 1]] = 0.0;
      const double* st = &b.seed_mu_t[static_cast<std::size_t>(b.seed_of[p - 1]) * r];
      std::copy(st, st + r, b.slot(b.mu_t, s));
    } else {
      std::copy(b.vertex_row(b.lambda_c, p), b.vertex_row(b.lambda_c, p) + r, mu_row);
    }
  }
  b.sum_nu_t.assign(static_cast<std::size_t>(g.T) * r, 0.0);
  b.sum_mu_t.assign(static_cast<std::size_t>(g.T) * r, 0.0);
  detail::refresh_sums(b);
  return b;
}

// Per-coordinate rescaling of the tilde messages so that the coordinate-wise
// sum over each family becomes a null vector while the grand total is kept:
// with S_v the coordinate sums, f_v = (sum_v' S_v') / (r S_v).  A family with
// some S_v = 0 (all messages null there) is skipped and flagged.
inline void balance(MessageBoard& b, bool do_nu = true, bool do_mu = true) {
  const int r = b.r;
  auto balance_family = [&](std::vector<double>& family, bool& skipped) {
    std::vector<double> s(r, 0.0);
    for (std::size_t i = 0; i < family.size(); ++i) s[i % r] += family[i];
    double total = 0.0;
    for (int v = 0; v < r; ++v) total += s[v];
    for (int v = 0; v < r; ++v) {
      if (s[v] == 0.0) {
        skipped = true;
        return;
      }
    }
    skipped = false;
    std::vector<double> f(r);
    for (int v = 0; v < r; ++v) f[v] = total / (r * s[v]);
    for (std::size_t i = 0; i < family.size(); ++i) family[i] *= f[i % r];
  };
  if (do_mu) balance_family(b.mu_t, b.balance_skipped_mu);
  if (do_nu) balance_family(b.nu_t, b.balance_skipped_nu);
  detail::refresh_sums(b);
}

namespace detail {

inline double iterate_synchronous(MessageBoard& b) {
  const int r = b.r;
  refresh_sums(b);
  static thread_local std::vector<double> new_nu_t, new_mu_t, row;
  new_nu_t.resize(b.nu_t.size());
  new_mu_t.resize(b.mu_t.size());
  row.resize(r);
  double delta = 0.0;
  for (int s = 0; s < b.n_slots; ++s) {
    const int c = b.slot_child[s], p = b.slot_parent[s];
    double* nu_row = b.slot(b.nu, s);
    double* mu_row = b.slot(b.mu, s);
    double* nt_new = &new_nu_t[static_cast<std::size_t>(s) * r];
    double* mt_new = &new_mu_t[static_cast<std::size_t>(s) * r];

    if (b.seed_of[c - 1] >= 0) {
      const int lab = b.seed_of[c - 1];
      std::fill(nu_row, nu_row + r, kNegInf);
      nu_row[lab] = 0.0;
      const double* st = &b.seed_nu_t[static_cast<std::size_t>(lab) * r];
      std::copy(st, st + r, nt_new);
    } else {
      const double* lc = b.vertex_row(b.lambda_c, c);
      const double* sn = b.vertex_row(b.sum_nu_t, c);
      const double* sm = b.vertex_row(b.sum_mu_t, c);
      const double* mt_old = b.slot(b.mu_t, s);
      for (int v = 0; v < r; ++v) nu_row[v] = lc[v] + sn[v] + sm[v] - mt_old[v];
      apply_kernel(nu_row, b.k_cp.data(), r, nt_new);
    }

    if (b.seed_of[p - 1] >= 0) {
      const int lab = b.seed_of[p - 1];
      std::fill(mu_row, mu_row + r, kNegInf);
      mu_row[lab] = 0.0;
      const double* st = &b.seed_mu_t[static_cast<std::size_t>(lab) * r];
      std::copy(st, st + r, mt_new);
    } else {
      const double* lc = b.vertex_row(b.lambda_c, p);
      const double* sn = b.vertex_row(b.sum_nu_t, p);
      const double* sm = b.vertex_row(b.sum_mu_t, p);
      const double* nt_old = b.slot(b.nu_t, s);
      for (int v = 0; v < r; ++v) mu_row[v] = lc[v] + (sn[v] - nt_old[v]) + sm[v];
      apply_kernel(mu_row, b.k_pc.data(), r, mt_new);
    }

    delta += euclidean_distance({nt_new, static_cast<std::size_t>(r)},
                                {b.slot(b.nu_t, s), static_cast<std::size_t>(r)});
    delta += euclidean_distance({mt_new, static_cast<std::size_t>(r)},
                                {b.slot(b.mu_t, s), static_cast<std::size_t>(r)});
  }
  b.nu_t.swap(new_nu_t);
  b.mu_t.swap(new_mu_t);
  refresh_sums(b);
  return delta;
}

// One in-place sweep of the active family, vertices in arrival order.
inline double iterate_two_phase(MessageBoard& b) {
  const int r = b.r;
  std::vector<double> row(r), fresh(r);
  double delta = 0.0;
  if (b.phase >= 2) return 0.0;
  if (b.phase == 0) {
    for (int s = 0; s < b.n_slots; ++s) {  // slots are in child arrival order
      const int c = b.slot_child[s], p = b.slot_parent[s];
      double* nu_row = b.slot(b.nu, s);
      if (b.seed_of[c - 1] >= 0) {
        const int lab = b.seed_of[c - 1];
        std::fill(nu_row, nu_row + r, kNegInf);
        nu_row[lab] = 0.0;
        const double* st = &b.seed_nu_t[static_cast<std::size_t>(lab) * r];
        std::copy(st, st + r, fresh.begin());
      } else {
        const double* lc = b.vertex_row(b.lambda_c, c);
        const double* sn = b.vertex_row(b.sum_nu_t, c);
        const double* sm = b.vertex_row(b.sum_mu_t, c);
        const double* mt_old = b.slot(b.mu_t, s);
        for (int v = 0; v < r; ++v) nu_row[v] = lc[v] + sn[v] + sm[v] - mt_old[v];
        apply_kernel(nu_row, b.k_cp.data(), r, fresh.data());
      }
      double* nt = b.slot(b.nu_t, s);
      double* agg = b.vertex_row(b.sum_nu_t, p);
      delta += euclidean_distance({fresh.data(), static_cast<std::size_t>(r)},
                                  {nt, static_cast<std::size_t>(r)});
      for (int v = 0; v < r; ++v) {
        agg[v] += fresh[v] - nt[v];
        nt[v] = fresh[v];
      }
    }
  } else {
    for (int p = 1; p <= b.graph->T; ++p) {
      for (int s : b.in_slots[p - 1]) {
        const int c = b.slot_child[s];
        double* mu_row = b.slot(b.mu, s);
        if (b.seed_of[p - 1] >= 0) {
          const int lab = b.seed_of[p - 1];
          std::fill(mu_row, mu_row + r, kNegInf);
          mu_row[lab] = 0.0;
          const double* st = &b.seed_mu_t[static_cast<std::size_t>(lab) * r];
          std::copy(st, st + r, fresh.begin());
        } else {
          const double* lc = b.vertex_row(b.lambda_c, p);
          const double* sn = b.vertex_row(b.sum_nu_t, p);
          const double* sm = b.vertex_row(b.sum_mu_t, p);
          const double* nt_old = b.slot(b.nu_t, s);
          for (int v = 0; v < r; ++v) mu_row[v] = lc[v] + (sn[v] - nt_old[v]) + sm[v];
          apply_kernel(mu_row, b.k_pc.data(), r, fresh.data());
        }
        double* mt = b.slot(b.mu_t, s);
        double* agg = b.vertex_row(b.sum_mu_t, c);
        delta += euclidean_distance({fresh.data(), static_cast<std::size_t>(r)},
                                    {mt, static_cast<std::size_t>(r)});
        for (int v = 0; v < r; ++v) {
          agg[v] += fresh[v] - mt[v];
          mt[v] = fresh[v];
        }
      }
    }
  }
  return delta;
}

}  // namespace detail

// One round of message updates under the configured schedule; returns the sum
// over message slots of Euclidean distances between successive canonical
// tilde messages.  Synchronous: every nu/mu is recomputed from the previous
// iteration's tildes, then every tilde.  Two-phase: one in-place sweep of the
// active direction (child->parent first); the caller advances the phase when
// a sweep's delta falls below its threshold.
inline double iterate(MessageBoard& board, const MPConfig& config) {
  if (config.schedule == Schedule::Synchronous) return detail::iterate_synchronous(board);
  return detail::iterate_two_phase(board);
}

// Posterior log-likelihood vector of one vertex given the current board.
inline Llv posterior_lambda(const MessageBoard& b, int tau) {
  Llv out(b.r);
  const double* lc = b.vertex_row(b.lambda_c, tau);
  const double* sn = b.vertex_row(b.sum_nu_t, tau);
  const double* sm = b.vertex_row(b.sum_mu_t, tau);
  for (int v = 0; v < b.r; ++v) out[v] = lc[v] + sn[v] + sm[v];
  canonicalize_in_place(out);
  return out;
}

struct MPResult {
  std::vector<LabelEstimate> estimates;
  bool converged = false;
  int iterations = 0;
  std::vector<std::pair<int, double>> trace;  // (iteration, delta)
};

// Full message passing run: iterates (balancing first, when enabled) until
// the termination criterion drops below the threshold or max_iterations is
// reached, then reads out per-vertex posteriors and MAP labels.  Seed
// vertices report their fixed labels.  Non-convergence is flagged, never
// thrown.  With the two-phase schedule, phases are driven by message deltas:
// each direction is swept until its delta falls below the threshold.
inline MPResult run_mp(const PAGraph& g, const RateTable& rates, std::span<const double> rho,
                       const MPConfig& config) {
  MessageBoard board = init_board(g, rates, rho, config);
  MPResult result;

  std::vector<Llv> prev_lambda;
  const bool track_lambda =
      config.schedule == Schedule::Synchronous && config.termination == TerminationOn::LambdaDelta;
  if (track_lambda) {
    prev_lambda.resize(g.T);
    for (int tau = 1; tau <= g.T; ++tau) prev_lambda[tau - 1] = posterior_lambda(board, tau);
  }

  for (int it = 1; it <= config.max_iterations; ++it) {
    if (config.balancing) balance(board, config.balance_nu, config.balance_mu);
    const double msg_delta = iterate(board, config);
    result.iterations = it;

    double delta = msg_delta;
    if (track_lambda) {
      double lambda_delta = 0.0;
      for (int tau = 1; tau <= g.T; ++tau) {
        Llv cur = posterior_lambda(board, tau);
        lambda_delta += euclidean_distance(cur, prev_lambda[tau - 1]);
        prev_lambda[tau - 1] = std::move(cur);
      }
      delta = lambda_delta;
    }
    result.trace.emplace_back(it, delta);

    if (config.schedule == Schedule::TwoPhase) {
      if (msg_delta < config.termination_threshold) {
        if (++board.phase >= 2) {
          result.converged = true;
          break;
        }
      }
    } else if (delta < config.termination_threshold) {
      result.converged = true;
      break;
    }
  }

  result.estimates.reserve(g.T);
  for (int tau = 1; tau <= g.T; ++tau) {
    LabelEstimate est;
    est.vertex = tau;
    est.llv = posterior_lambda(board, tau);
    est.algo = Algo::MP;
    est.label = board.seed_of[tau - 1] >= 0 ? board.seed_of[tau - 1]
                                            : map_label(rho, est.llv);
    result.estimates.push_back(std::move(est));
  }
  return result;
}

}  // namespace pacomm
