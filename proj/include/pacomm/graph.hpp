#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pacomm/model.hpp"
#include "pacomm/rng.hpp"

#include <json.hpp>

namespace pacomm {

// A realized labeled preferential attachment graph.  Vertices are the
// arrival times 1..T.  Immutable after generation; children/parents are
// multisets (parallel edges kept with multiplicity).
struct PAGraph {
  int T = 0;
  int m = 0;
  int r = 0;
  int t_o = 0;
  std::vector<int> labels;                  // size T, 0-based
  std::vector<Edge> edges;                  // size m*T, arrival order
  std::vector<std::vector<int>> children;   // children[tau-1]: vertices that attached to tau
  std::vector<std::vector<int>> parents;    // parents[tau-1]: heads of tau's out-edges (tau > t_o)
  std::vector<int> d0;                      // initial degree: degree in G_{t_o} if tau <= t_o, else m
  std::uint64_t params_hash = 0;

  int label_of(int tau) const { return labels[tau - 1]; }
  const std::vector<int>& children_of(int tau) const { return children[tau - 1]; }
  const std::vector<int>& parents_of(int tau) const { return parents[tau - 1]; }
  int initial_degree(int tau) const { return d0[tau - 1]; }
  // total incident edge endpoints at time T
  int degree(int tau) const { return d0[tau - 1] + static_cast<int>(children[tau - 1].size()); }

  // rebuilds children/parents/d0 from T, m, t_o, labels and edges
  void rebuild_derived() {
    children.assign(T, {});
    parents.assign(T, {});
    d0.assign(T, 0);
    for (int i = 0; i < m * t_o; ++i) {
      d0[edges[i].tail - 1] += 1;
      d0[edges[i].head - 1] += 1;
    }
    for (int tau = t_o + 1; tau <= T; ++tau) d0[tau - 1] = m;
    for (std::size_t i = static_cast<std::size_t>(m) * t_o; i < edges.size(); ++i) {
      const Edge& e = edges[i];
      children[e.head - 1].push_back(e.tail);
      parents[e.tail - 1].push_back(e.head);
    }
  }
};

// Simulates the graph process up to time T.  Each new vertex draws its label
// from rho; each of its m edges independently selects a half-edge label class
// v with probability beta_uv C_v / sum_v' beta_uv' C_v', then a uniform
// half-edge within the class.  All m draws use the counts frozen at time t
// (sampling with replacement).
inline PAGraph generate(const ModelParams& params, int T, std::uint64_t rng_seed) {
  params.validate();
  if (T < params.t_o) throw std::invalid_argument("generate: T must be at least t_o");
  RngStream rng(rng_seed);

  const int m = params.m;
  const int r = params.r;
  PAGraph g;
  g.T = T;
  g.m = m;
  g.r = r;
  g.t_o = params.t_o;
  g.params_hash = params.content_hash();
  g.labels.resize(T);
  for (int tau = 1; tau <= params.t_o; ++tau) g.labels[tau - 1] = params.initial_labels[tau - 1];
  for (int tau = params.t_o + 1; tau <= T; ++tau)
    g.labels[tau - 1] = rng.discrete(params.rho);

  g.edges = params.initial_graph.materialize(m, params.t_o);
  g.edges.reserve(static_cast<std::size_t>(m) * T);

  // registry[v] lists a vertex id once per half-edge of label v incident to it
  std::vector<std::vector<int>> registry(r);
  for (const Edge& e : g.edges) {
    registry[g.labels[e.tail - 1]].push_back(e.tail);
    registry[g.labels[e.head - 1]].push_back(e.head);
  }

  std::vector<double> weights(r);
  std::vector<int> targets(m);
  for (int t = params.t_o + 1; t <= T; ++t) {
    const int u = g.labels[t - 1];
    for (int v = 0; v < r; ++v)
      weights[v] = params.beta_at(u, v) * static_cast<double>(registry[v].size());
    for (int k = 0; k < m; ++k) {
      const int v = rng.discrete(weights);
      targets[k] = registry[v][rng.uniform_below(registry[v].size())];
    }
    for (int k = 0; k < m; ++k) {
      const int w = targets[k];
      g.edges.push_back({t, w});
      registry[g.labels[w - 1]].push_back(w);
      registry[u].push_back(t);
    }
  }
  g.rebuild_derived();
  return g;
}

// Half-edge label counts C_t; sums to 2mt exactly.
inline std::vector<long long> half_edge_counts(const PAGraph& g, int t) {
  if (t < g.t_o || t > g.T) throw std::out_of_range("half_edge_counts: t outside [t_o, T]");
  std::vector<long long> counts(g.r, 0);
  const std::size_t n_edges = static_cast<std::size_t>(g.m) * t;
  for (std::size_t i = 0; i < n_edges; ++i) {
    counts[g.labels[g.edges[i].tail - 1]] += 1;
    counts[g.labels[g.edges[i].head - 1]] += 1;
  }
  return counts;
}

// eta_t: fraction of half edges per label at time t.
inline std::vector<double> empirical_eta(const PAGraph& g, int t) {
  const auto counts = half_edge_counts(g, t);
  std::vector<double> eta(g.r);
  const double total = 2.0 * g.m * t;
  for (int v = 0; v < g.r; ++v) eta[v] = static_cast<double>(counts[v]) / total;
  return eta;
}

// Degree evolution of one vertex: y[i] is the degree at time t0 + i.
struct DegreePath {
  int t0 = 0;            // max(tau, t_o)
  std::vector<int> y;    // degrees for t in [t0, T]
  int at(int t) const { return y[t - t0]; }
  int t_end() const { return t0 + static_cast<int>(y.size()) - 1; }
};

inline DegreePath degree_path(const PAGraph& g, int tau) {
  if (tau < 1 || tau > g.T) throw std::out_of_range("degree_path: vertex outside [1, T]");
  DegreePath path;
  path.t0 = std::max(tau, g.t_o);
  path.y.resize(g.T - path.t0 + 1);
  const auto& kids = g.children_of(tau);  // stored in arrival order
  std::size_t next = 0;
  int deg = g.initial_degree(tau);
  for (int t = path.t0; t <= g.T; ++t) {
    while (next < kids.size() && kids[next] <= t) {
      ++deg;
      ++next;
    }
    path.y[t - path.t0] = deg;
  }
  return path;
}

namespace detail {
inline std::string hash_to_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}
inline std::uint64_t hex_to_hash(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}
}  // namespace detail

// Line-oriented text format:
//   pagraph 1
//   <T> <m> <r> <t_o> <params_hash as 16 hex digits>
//   <T labels, 1-based, space separated>
//   <tail> <head>            (m*T lines, arrival order)
inline void write_text(const PAGraph& g, std::ostream& out) {
  out << "pagraph 1\n";
  out << g.T << ' ' << g.m << ' ' << g.r << ' ' << g.t_o << ' '
      << detail::hash_to_hex(g.params_hash) << '\n';
  for (int tau = 1; tau <= g.T; ++tau) out << (tau > 1 ? " " : "") << g.labels[tau - 1] + 1;
  out << '\n';
  for (const Edge& e : g.edges) out << e.tail << ' ' << e.head << '\n';
}

inline PAGraph read_text(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "pagraph" || version != 1)
    throw std::runtime_error("read_text: not a pagraph v1 file");
  PAGraph g;
  std::string hash_hex;
  if (!(in >> g.T >> g.m >> g.r >> g.t_o >> hash_hex))
    throw std::runtime_error("read_text: malformed header");
  if (g.T < 1 || g.m < 1 || g.r < 1 || g.t_o < 1 || g.t_o > g.T)
    throw std::runtime_error("read_text: invalid header values");
  g.params_hash = detail::hex_to_hash(hash_hex);
  g.labels.resize(g.T);
  for (int tau = 1; tau <= g.T; ++tau) {
    int lab;
    if (!(in >> lab) || lab < 1 || lab > g.r)
      throw std::runtime_error("read_text: bad label for vertex " + std::to_string(tau));
    g.labels[tau - 1] = lab - 1;
  }
  const std::size_t n_edges = static_cast<std::size_t>(g.m) * g.T;
  g.edges.resize(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) {
    Edge e;
    if (!(in >> e.tail >> e.head) || e.tail < 1 || e.tail > g.T || e.head < 1 || e.head > g.T)
      throw std::runtime_error("read_text: bad edge at index " + std::to_string(i));
    g.edges[i] = e;
  }
  g.rebuild_derived();
  return g;
}

inline nlohmann::json to_json(const PAGraph& g) {
  nlohmann::json j;
  j["format"] = "pagraph";
  j["version"] = 1;
  j["T"] = g.T;
  j["m"] = g.m;
  j["r"] = g.r;
  j["t_o"] = g.t_o;
  j["params_hash"] = detail::hash_to_hex(g.params_hash);
  nlohmann::json labels = nlohmann::json::array();
  for (int lab : g.labels) labels.push_back(lab + 1);
  j["labels"] = std::move(labels);
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges) edges.push_back({e.tail, e.head});
  j["edges"] = std::move(edges);
  return j;
}

inline PAGraph from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "pagraph" || j.value("version", 0) != 1)
    throw std::runtime_error("from_json: not a pagraph v1 document");
  PAGraph g;
  g.T = j.at("T").get<int>();
  g.m = j.at("m").get<int>();
  g.r = j.at("r").get<int>();
  g.t_o = j.at("t_o").get<int>();
  g.params_hash = detail::hex_to_hash(j.at("params_hash").get<std::string>());
  for (int lab : j.at("labels")) g.labels.push_back(lab - 1);
  for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  if (g.labels.size() != static_cast<std::size_t>(g.T) ||
      g.edges.size() != static_cast<std::size_t>(g.m) * g.T)
    throw std::runtime_error("from_json: inconsistent sizes");
  g.rebuild_derived();
  return g;
}

}  // namespace pacomm
