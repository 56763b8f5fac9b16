#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qcl/field.hpp"
#include "qcl/flow.hpp"
#include "qcl/rng.hpp"
#include "qcl/system.hpp"

namespace qcl {

// The three experiment families:
//   one   — rho0 = |0><0|, theta = theta^m (three distinct eigenvalues)
//   two   — rho0 = |0><0|, theta drawn full-rank nondegenerate per run
//   three — both operators drawn full-rank nondegenerate per run
enum class CaseId { one, two, three };

struct CaseSpec {
  CaseId case_id = CaseId::one;
  int n_levels = 8;
  SystemKind h0 = SystemKind::rotor;
  double dipole_d = 0.2;
  double total_time = 20.0;
  int n_intervals = 0;           // 0 = default: 512, or 2048 once n_levels >= 10
  double fluence_target = 10.0;  // F0
  int n_runs = 20;
  std::uint64_t seed = 1;
  int observable = 5;            // Case one only: m in theta^m, 1..5
  FlowSettings flow;
  std::string track_distances = "auto";  // auto | full | summary | off

  int effective_intervals() const;
  void validate() const;  // throws std::invalid_argument
};

// Strict JSON codec.  Accepted keys, exactly: case, n_levels, h0, d, T, L, F0,
// n_runs, seed, abs_tol, rel_tol, convergence_fraction, max_steps, observable,
// track_distances.  Unknown keys or malformed values throw std::invalid_argument.
CaseSpec case_spec_from_json(const nlohmann::json& j);
nlohmann::json case_spec_to_json(const CaseSpec& spec);

// 16-hex-digit FNV-1a hash of the canonical JSON form; names the run directory
std::string config_hash(const CaseSpec& spec);

struct CaseOperators {
  Eigen::VectorXd rho0;
  Eigen::VectorXd theta;
};

// Case one: fixed operators on physical levels — rho0 = |0><0| and theta^m
// with eigenvalue 5/(4m+5) on level 7, 4/(4m+5) on levels 7-m..6, zero below
// (needs n_levels >= 8; extra levels extend the zero eigenspace).  Cases
// two/three: eigenvalues drawn iid uniform on [0,1], normalized to unit trace,
// sorted descending, redrawn while any adjacent gap is below 1e-6.
CaseOperators make_case_operators(const CaseSpec& spec, Rng& rng);

// Random 20-mode cosine field under a Gaussian envelope centred at T/2 with
// width T/10, frequencies uniform on the system's transition-frequency range,
// amplitudes uniform on [0,1]; the overall scale is set so the discrete
// fluence equals fluence_target exactly.
ControlField make_initial_field(const SystemModel& model, double total_time, int n_intervals,
                                double fluence_target, Rng& rng);

struct RunRecord {
  int run_index = 0;
  std::uint64_t run_seed = 0;
  SearchOutcome outcome = SearchOutcome::exhausted;
  long iterations = 0;
  double j_final = 0.0;
  std::optional<double> d_sadd_min;
  std::optional<double> d_mean_sadd_min;
  std::optional<double> d_sadd_fail;
};

struct BatchSummary {
  std::string config_hash;
  int n_runs = 0;
  int n_converged = 0;
  int n_failed = 0;
  int n_exhausted = 0;
  // over converged runs (empty when none converged)
  std::optional<double> mean_search_effort;
  std::optional<double> mean_d_sadd_min;
  std::optional<double> mean_d_mean_sadd_min;
  // over failed runs (empty when none failed)
  std::optional<double> mean_d_sadd_fail;
  std::vector<RunRecord> runs;
};

BatchSummary summarize(const CaseSpec& spec, const std::vector<SearchTrace>& traces);
nlohmann::json batch_summary_to_json(const BatchSummary& summary);

// Run spec.n_runs independent searches.  Each run r uses Rng::substream(seed, r)
// for all of its draws, so results are identical however runs are scheduled
// across workers (workers <= 0 means hardware concurrency).  When out_dir is
// nonempty, writes out_dir/<config_hash>/{config.json, summary.json,
// trace_run###.csv}.  traces_out, if given, receives all traces by run index.
BatchSummary run_batch(const CaseSpec& spec, const std::string& out_dir = "", int workers = 1,
                       std::vector<SearchTrace>* traces_out = nullptr);

// One batch per value of the swept axis: d | F0 | N | tau | observable
// (aliases dipole_d, fluence, n_levels, abs_tol accepted).
struct SweepResult {
  std::string axis;
  std::vector<double> values;
  std::vector<BatchSummary> summaries;
};

SweepResult run_sweep(const CaseSpec& base, const std::string& axis,
                      const std::vector<double>& values, const std::string& out_dir = "",
                      int workers = 1);
nlohmann::json sweep_result_to_json(const SweepResult& sweep);

// landscape pieces run_batch prepares per case (exposed for reuse in tools):
// spectra of the operators, classified tables (empty when tracking is off or
// the case disables it), and the tracking mode actually in effect
struct LandscapeSetup {
  std::vector<ContingencyTable> tables;
  DistanceTracking tracking;
};
LandscapeSetup prepare_landscape(const CaseSpec& spec, const Eigen::VectorXd& rho0,
                                 const Eigen::VectorXd& theta);

}  // namespace qcl
