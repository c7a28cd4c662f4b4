#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pacomm/graph.hpp"
#include "pacomm/harness.hpp"
#include "pacomm/inference.hpp"
#include "pacomm/message_passing.hpp"
#include "pacomm/model.hpp"

#include <json.hpp>

namespace pacomm {

inline int default_workers() {
  if (const char* env = std::getenv("PACOMM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs f(trial) for trial in [0, n) across a worker pool.  Work is pulled
// from an atomic counter; outputs must be written to per-trial slots so the
// aggregate is independent of scheduling.
template <typename F>
inline void parallel_for_trials(int n, int workers, F&& f) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct ExperimentConfig {
  ModelParams params;
  int T = 0;
  int trials = 1;
  std::uint64_t master_seed = 0;
  double bin_factor = 1.2;
  int workers = 0;  // 0: PACOMM_WORKERS env or hardware concurrency
  std::vector<Algo> algorithms;
  MPConfig mp;
  int mp_oracle_seeds = 0;         // reveal true labels of vertices 1..k to MP
  bool mp_seed_via_joint = false;  // instead seed MP from a joint estimate of 1..k
  int joint_k = 0;                 // |V| for the joint algorithm (V = {1..k})
  int joint_t_bar = 20;
  bool joint_use_prior = false;
  std::vector<std::vector<int>> symmetry;  // label permutations, identity included
  std::vector<int> partition;              // label -> side id, optional
  double rate_tol = 1e-10;

  void apply_defaults() {
    if (symmetry.empty()) {
      std::vector<int> identity(params.r);
      for (int v = 0; v < params.r; ++v) identity[v] = v;
      symmetry = {identity};
    }
  }
};

struct ExperimentOutcome {
  ErrorReport report;
  bool warnings = false;  // e.g. MP failed to converge in some trial
};

namespace detail {

struct TrialScore {
  // per algorithm: per-bin error counts, big/small counts, totals
  std::map<std::string, std::vector<long long>> bin_errors, bin_n, bin_big, bin_small;
  std::map<std::string, long long> total_errors, total_n;
  bool warning = false;
};

inline void score_into(TrialScore& out, const std::string& algo, const std::vector<Bin>& bins,
                       std::span<const int> vertices, const ScoreResult& score) {
  auto& errors = out.bin_errors[algo];
  auto& n = out.bin_n[algo];
  auto& big = out.bin_big[algo];
  auto& small = out.bin_small[algo];
  errors.assign(bins.size(), 0);
  n.assign(bins.size(), 0);
  big.assign(bins.size(), 0);
  small.assign(bins.size(), 0);
  long long total_err = 0;
  // vertices are sorted ascending; walk bins in step
  std::size_t bi = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    while (bi < bins.size() && vertices[i] > bins[bi].hi) ++bi;
    if (bi >= bins.size()) break;
    n[bi] += 1;
    if (score.errors[i]) {
      errors[bi] += 1;
      ++total_err;
    }
    if (!score.big_errors.empty() && score.big_errors[i]) big[bi] += 1;
    if (!score.small_errors.empty() && score.small_errors[i]) small[bi] += 1;
  }
  out.total_errors[algo] = total_err;
  out.total_n[algo] = static_cast<long long>(vertices.size());
}

}  // namespace detail

// Runs the configured Monte Carlo experiment: per trial, generate a graph
// from the stream derived from (master_seed, trial), run each algorithm,
// apply symmetry-adjusted scoring, and aggregate per arrival-time bin.
// Outputs are identical for any worker count.
inline ExperimentOutcome run_experiment(const ExperimentConfig& config_in) {
  ExperimentConfig config = config_in;
  config.apply_defaults();
  config.params.validate();
  if (config.trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
  if (config.T < config.params.t_o) throw std::invalid_argument("run_experiment: T below t_o");

  const RateTable rates = solve_eta_star(config.params, config.rate_tol);
  const std::vector<Bin> bins = geometric_bins(config.T, config.bin_factor);
  std::vector<detail::TrialScore> scores(config.trials);

  std::vector<int> all_vertices(config.T);
  for (int tau = 1; tau <= config.T; ++tau) all_vertices[tau - 1] = tau;

  parallel_for_trials(config.trials, config.workers > 0 ? config.workers : default_workers(),
                      [&](int trial) {
    RngStream stream(config.master_seed, static_cast<std::uint64_t>(trial));
    const std::uint64_t graph_seed = stream.next_u64();
    const PAGraph g = generate(config.params, config.T, graph_seed);
    detail::TrialScore& out = scores[trial];

    auto run_per_vertex = [&](Algo algo) {
      std::vector<int> est(config.T);
      if (algo == Algo::MP) {
        MPConfig mp = config.mp;
        if (config.mp_oracle_seeds > 0) {
          for (int tau = 1; tau <= std::min(config.mp_oracle_seeds, config.T); ++tau)
            mp.seed_assignments.emplace_back(tau, g.label_of(tau));
        } else if (config.mp_seed_via_joint && config.joint_k > 0) {
          std::vector<int> V(config.joint_k);
          for (int i = 0; i < config.joint_k; ++i) V[i] = i + 1;
          const JointResult jr = joint_estimate(g, V, config.joint_t_bar, rates,
                                                config.params.rho, config.joint_use_prior);
          for (int i = 0; i < config.joint_k; ++i)
            mp.seed_assignments.emplace_back(V[i], jr.labels[i]);
        }
        const MPResult mp_result = run_mp(g, rates, config.params.rho, mp);
        if (!mp_result.converged) out.warning = true;
        for (int tau = 1; tau <= config.T; ++tau)
          est[tau - 1] = mp_result.estimates[tau - 1].label;
      } else {
        for (int tau = 1; tau <= config.T; ++tau) {
          Llv llv;
          switch (algo) {
            case Algo::DT: llv = lambda_DT(g, tau, rates); break;
            case Algo::CApprox: llv = lambda_C(g, tau, rates, CMode::Approx); break;
            case Algo::CExact: llv = lambda_C(g, tau, rates, CMode::Exact); break;
            default: throw std::invalid_argument("run_experiment: unsupported algorithm");
          }
          est[tau - 1] = map_label(config.params.rho, llv);
        }
      }
      const ScoreResult sr =
          error_metrics(g.labels, est, config.symmetry, stream, config.partition);
      detail::score_into(out, algo_name(algo), bins, all_vertices, sr);
    };

    for (Algo algo : config.algorithms) {
      if (algo == Algo::Joint) {
        if (config.joint_k < 1) throw std::invalid_argument("run_experiment: joint needs joint_k");
        std::vector<int> V(config.joint_k);
        for (int i = 0; i < config.joint_k; ++i) V[i] = i + 1;
        const JointResult jr = joint_estimate(g, V, config.joint_t_bar, rates, config.params.rho,
                                              config.joint_use_prior);
        std::vector<int> truth(config.joint_k);
        for (int i = 0; i < config.joint_k; ++i) truth[i] = g.label_of(V[i]);
        const ScoreResult sr =
            error_metrics(truth, jr.labels, config.symmetry, stream, config.partition);
        detail::score_into(out, algo_name(algo), bins, V, sr);
      } else {
        run_per_vertex(algo);
      }
    }
  });

  ExperimentOutcome outcome;
  ErrorReport& report = outcome.report;
  report.bins = bins;
  report.has_partition = !config.partition.empty();
  for (Algo algo : config.algorithms) {
    const std::string name = algo_name(algo);
    std::vector<BinRow> rows(bins.size());
    for (std::size_t bi = 0; bi < bins.size(); ++bi) {
      rows[bi].lo = bins[bi].lo;
      rows[bi].hi = bins[bi].hi;
      rows[bi].algorithm = name;
    }
    auto& pg_err = report.per_graph_errors[name];
    auto& pg_n = report.per_graph_n[name];
    for (int trial = 0; trial < config.trials; ++trial) {
      const detail::TrialScore& ts = scores[trial];
      outcome.warnings = outcome.warnings || ts.warning;
      const auto it = ts.bin_errors.find(name);
      if (it == ts.bin_errors.end()) continue;
      for (std::size_t bi = 0; bi < bins.size(); ++bi) {
        rows[bi].errors += it->second[bi];
        rows[bi].n += ts.bin_n.at(name)[bi];
        rows[bi].big_errors += ts.bin_big.at(name)[bi];
        rows[bi].small_errors += ts.bin_small.at(name)[bi];
      }
      pg_err.push_back(ts.total_errors.at(name));
      pg_n.push_back(ts.total_n.at(name));
    }
    for (auto& row : rows) report.rows.push_back(std::move(row));
  }
  return outcome;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// CSV schema: bin_lo,bin_hi,algorithm,error_rate,n,stderr.  With a partition,
// big/small splits appear as extra rows tagged "<algo>:big" / "<algo>:small".
inline void export_csv(const ErrorReport& report, std::ostream& out) {
  out << "bin_lo,bin_hi,algorithm,error_rate,n,stderr\n";
  auto emit = [&](int lo, int hi, const std::string& algo, long long errors, long long n) {
    const double rate = n == 0 ? 0.0 : static_cast<double>(errors) / n;
    const double se = n == 0 ? 0.0 : std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
    out << lo << ',' << hi << ',' << algo << ',' << format_double(rate) << ',' << n << ','
        << format_double(se) << '\n';
  };
  for (const BinRow& row : report.rows) {
    emit(row.lo, row.hi, row.algorithm, row.errors, row.n);
    if (report.has_partition) {
      emit(row.lo, row.hi, row.algorithm + ":big", row.big_errors, row.n);
      emit(row.lo, row.hi, row.algorithm + ":small", row.small_errors, row.n);
    }
  }
}

inline nlohmann::json report_to_json(const ErrorReport& report) {
  nlohmann::json j;
  j["has_partition"] = report.has_partition;
  j["bins"] = nlohmann::json::array();
  for (const Bin& b : report.bins) j["bins"].push_back({b.lo, b.hi});
  j["rows"] = nlohmann::json::array();
  for (const BinRow& row : report.rows) {
    j["rows"].push_back({{"lo", row.lo},
                         {"hi", row.hi},
                         {"algorithm", row.algorithm},
                         {"errors", row.errors},
                         {"n", row.n},
                         {"big_errors", row.big_errors},
                         {"small_errors", row.small_errors}});
  }
  j["per_graph_errors"] = report.per_graph_errors;
  j["per_graph_n"] = report.per_graph_n;
  return j;
}

inline ErrorReport report_from_json(const nlohmann::json& j) {
  ErrorReport report;
  report.has_partition = j.at("has_partition").get<bool>();
  for (const auto& b : j.at("bins")) report.bins.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
  for (const auto& row : j.at("rows")) {
    BinRow r;
    r.lo = row.at("lo").get<int>();
    r.hi = row.at("hi").get<int>();
    r.algorithm = row.at("algorithm").get<std::string>();
    r.errors = row.at("errors").get<long long>();
    r.n = row.at("n").get<long long>();
    r.big_errors = row.at("big_errors").get<long long>();
    r.small_errors = row.at("small_errors").get<long long>();
    report.rows.push_back(std::move(r));
  }
  report.per_graph_errors =
      j.at("per_graph_errors").get<std::map<std::string, std::vector<long long>>>();
  report.per_graph_n = j.at("per_graph_n").get<std::map<std::string, std::vector<long long>>>();
  return report;
}

inline void export_report(const ErrorReport& report, const std::string& format,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_report: cannot open " + path);
  if (format == "csv") {
    export_csv(report, out);
  } else if (format == "json") {
    out << report_to_json(report).dump(2) << '\n';
  } else {
    throw std::invalid_argument("export_report: format must be csv or json");
  }
  if (!out.good()) throw std::runtime_error("export_report: write failed for " + path);
}

}  // namespace pacomm
