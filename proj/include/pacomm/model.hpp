#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pacomm {

// Directed edge as (tail, head); vertex ids are 1-based arrival times.
struct Edge {
  int tail = 0;
  int head = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Initial graph: either the named two-vertex preset (t_o = 2, each vertex
// of degree 2m, realized as m parallel edges each way) or an explicit
// edge list over [t_o] with exactly m*t_o edges.
struct InitialGraphSpec {
  enum class Kind { TwoVertex, EdgeList };
  Kind kind = Kind::TwoVertex;
  std::vector<Edge> edges;  // used when kind == EdgeList

  static InitialGraphSpec two_vertex() { return {}; }
  static InitialGraphSpec edge_list(std::vector<Edge> e) {
    return {Kind::EdgeList, std::move(e)};
  }

  std::vector<Edge> materialize(int m, int t_o) const {
    if (kind == Kind::EdgeList) return edges;
    if (t_o != 2) throw std::invalid_argument("two-vertex initial graph requires t_o = 2");
    std::vector<Edge> out;
    out.reserve(2 * m);
    for (int i = 0; i < m; ++i) out.push_back({1, 2});
    for (int i = 0; i < m; ++i) out.push_back({2, 1});
    return out;
  }
};

// Parameters of the labeled preferential attachment model.  Labels are
// 0-based internally and 1-based in every I/O surface.
struct ModelParams {
  int m = 1;                        // out-degree of each added vertex
  int r = 1;                        // number of labels
  std::vector<double> rho;          // a priori label distribution, length r
  std::vector<double> beta;         // r x r affinities, row-major
  int t_o = 2;                      // initial time
  InitialGraphSpec initial_graph;
  std::vector<int> initial_labels;  // length t_o, 0-based

  double beta_at(int u, int v) const { return beta[static_cast<std::size_t>(u) * r + v]; }

  void validate() const {
    if (m < 1) throw std::invalid_argument("m must be a positive integer");
    if (r < 1) throw std::invalid_argument("r must be a positive integer");
    if (t_o < 1) throw std::invalid_argument("t_o must be a positive integer");
    if (static_cast<int>(rho.size()) != r) throw std::invalid_argument("rho must have length r");
    double sum = 0.0;
    for (double p : rho) {
      if (p < 0.0) throw std::invalid_argument("rho entries must be non-negative");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw std::invalid_argument("rho must sum to 1 within 1e-12");
    if (beta.size() != static_cast<std::size_t>(r) * r)
      throw std::invalid_argument("beta must be an r x r matrix");
    for (double b : beta) {
      if (!(b > 0.0)) throw std::invalid_argument("beta entries must be strictly positive");
    }
    if (static_cast<int>(initial_labels.size()) != t_o)
      throw std::invalid_argument("initial_labels must have length t_o");
    for (int lab : initial_labels) {
      if (lab < 0 || lab >= r) throw std::invalid_argument("initial label outside [r]");
    }
    const auto edges = initial_graph.materialize(m, t_o);
    if (static_cast<int>(edges.size()) != m * t_o)
      throw std::invalid_argument("initial graph must have exactly m*t_o edges");
    for (const Edge& e : edges) {
      if (e.tail < 1 || e.tail > t_o || e.head < 1 || e.head > t_o)
        throw std::invalid_argument("initial edge endpoint outside [t_o]");
    }
  }

  // FNV-1a over a canonical rendering; stored in generated graphs as provenance.
  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t x) {
      for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    };
    auto mix_double = [&](double d) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof d);
      __builtin_memcpy(&bits, &d, sizeof bits);
      mix(bits);
    };
    mix(static_cast<std::uint64_t>(m));
    mix(static_cast<std::uint64_t>(r));
    mix(static_cast<std::uint64_t>(t_o));
    for (double p : rho) mix_double(p);
    for (double b : beta) mix_double(b);
    for (int lab : initial_labels) mix(static_cast<std::uint64_t>(lab + 1));
    for (const Edge& e : initial_graph.materialize(m, t_o)) {
      mix(static_cast<std::uint64_t>(e.tail));
      mix(static_cast<std::uint64_t>(e.head));
    }
    return h;
  }
};

// Limiting half-edge distribution and attachment-rate tables derived from it.
struct RateTable {
  int r = 0;
  std::vector<double> eta_star;  // length r
  std::vector<double> theta_uv;  // r x r, row-major: rate of a label-u arrival onto label v
  std::vector<double> theta_v;   // length r: degree growth exponent per label

  double theta(int u, int v) const { return theta_uv[static_cast<std::size_t>(u) * r + v]; }
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual(residual) {}
  double residual;
};

// Drift field h of the half-edge label fractions:
//   h_v(eta) = rho_v + sum_u rho_u * beta_uv eta_v / (sum_v' beta_uv' eta_v') - 2 eta_v.
// Coordinates sum to zero for any probability vector eta.
inline std::vector<double> h_field(std::span<const double> eta, const ModelParams& params) {
  const int r = params.r;
  if (static_cast<int>(eta.size()) != r) throw std::invalid_argument("h_field: eta must have length r");
  for (double x : eta) {
    if (!(x > 0.0)) throw std::domain_error("h_field: eta coordinates must be positive");
  }
  std::vector<double> denom(r, 0.0);  // denom[u] = sum_v' beta_uv' eta_v'
  for (int u = 0; u < r; ++u) {
    for (int v = 0; v < r; ++v) denom[u] += params.beta_at(u, v) * eta[v];
  }
  std::vector<double> h(r, 0.0);
  for (int v = 0; v < r; ++v) {
    double acc = params.rho[v];
    for (int u = 0; u < r; ++u) {
      acc += params.rho[u] * params.beta_at(u, v) * eta[v] / denom[u];
    }
    h[v] = acc - 2.0 * eta[v];
  }
  return h;
}

inline RateTable rate_table_from_eta(const ModelParams& params, std::vector<double> eta) {
  const int r = params.r;
  RateTable out;
  out.r = r;
  out.theta_uv.assign(static_cast<std::size_t>(r) * r, 0.0);
  out.theta_v.assign(r, 0.0);
  for (int u = 0; u < r; ++u) {
    double denom = 0.0;
    for (int v = 0; v < r; ++v) denom += params.beta_at(u, v) * eta[v];
    for (int v = 0; v < r; ++v) {
      const double t = params.beta_at(u, v) / (2.0 * denom);
      out.theta_uv[static_cast<std::size_t>(u) * r + v] = t;
      out.theta_v[v] += params.rho[u] * t;
    }
  }
  out.eta_star = std::move(eta);
  return out;
}

// Solves h(eta*) = 0 by damped fixed-point iteration eta <- eta + gamma*h(eta)/2
// (gamma = 0.5, i.e. forward Euler on the globally stable ODE eta' = h(eta)),
// projected onto the simplex.  The step is halved whenever the residual
// oscillates upward.  Initialized at rho.
inline RateTable solve_eta_star(const ModelParams& params, double tol = 1e-10) {
  params.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("solve_eta_star: tol must be positive");
  const int r = params.r;
  constexpr long kMaxIterations = 1'000'000;
  constexpr double kFloor = 1e-300;

  std::vector<double> eta(params.rho);
  // interior start even if some rho_v = 0
  {
    double sum = 0.0;
    for (double& x : eta) {
      x = std::max(x, 1e-6);
      sum += x;
    }
    for (double& x : eta) x /= sum;
  }

  double step = 0.25;  // gamma/2 with gamma = 0.5
  double prev_residual = std::numeric_limits<double>::infinity();
  int ascents = 0;
  for (long it = 0; it < kMaxIterations; ++it) {
    const std::vector<double> h = h_field(eta, params);
    double residual = 0.0;
    for (double x : h) residual = std::max(residual, std::fabs(x));
    if (residual <= tol) return rate_table_from_eta(params, std::move(eta));
    if (residual > prev_residual) {
      if (++ascents >= 3) {
        step *= 0.5;  // oscillation: integrate the ODE with a finer step
        ascents = 0;
      }
    } else {
      ascents = 0;
    }
    prev_residual = residual;
    double sum = 0.0;
    for (int v = 0; v < r; ++v) {
      eta[v] = std::max(eta[v] + step * h[v], kFloor);
      sum += eta[v];
    }
    for (double& x : eta) x /= sum;
  }
  throw SolverError("solve_eta_star: no convergence within iteration cap (residual " +
                        std::to_string(prev_residual) + ")",
                    prev_residual);
}

// Closed-form rate table for the symmetric model: rho uniform,
// beta_uu = b, beta_uv = 1 otherwise.  Then eta* = rho,
// theta_uu = b r / (2 (b + r - 1)), theta_uv = r / (2 (b + r - 1)),
// and theta_v = 1/2 for every v.
inline RateTable symmetric_rate_table(int r, double b, int m) {
  (void)m;  // part of the model signature; the table does not depend on it
  if (r < 2) throw std::invalid_argument("symmetric_rate_table: r must be at least 2");
  if (!(b > 1.0)) throw std::invalid_argument("symmetric_rate_table: b must exceed 1");
  RateTable out;
  out.r = r;
  out.eta_star.assign(r, 1.0 / r);
  out.theta_uv.assign(static_cast<std::size_t>(r) * r, 0.0);
  out.theta_v.assign(r, 0.5);
  const double diag = b * r / (2.0 * (b + r - 1.0));
  const double off = r / (2.0 * (b + r - 1.0));
  for (int u = 0; u < r; ++u) {
    for (int v = 0; v < r; ++v) {
      out.theta_uv[static_cast<std::size_t>(u) * r + v] = (u == v) ? diag : off;
    }
  }
  return out;
}

}  // namespace pacomm
