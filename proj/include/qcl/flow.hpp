#pragma once

#include <Eigen/Dense>
#include <optional>
#include <ostream>
#include <vector>

#include "qcl/dynamics.hpp"
#include "qcl/field.hpp"
#include "qcl/system.hpp"
#include "qcl/topology.hpp"

namespace qcl {

// Gradient-flow integration settings.  abs_tol / rel_tol control the embedded
// Dormand-Prince 4(5) pair through the per-component acceptance test
// |err_l| <= abs_tol + rel_tol |eps_l|; convergence_fraction is the stopping
// band below the landscape maximum; gamma scales the flow (kept at 1, the
// adaptive step absorbs it).
struct FlowSettings {
  double abs_tol = 1e-8;
  double rel_tol = 1e-3;
  double convergence_fraction = 1e-3;
  long max_steps = 1'000'000;
  double gamma = 1.0;
};

enum class SearchOutcome { converged, failed_decrease, exhausted };

// What to record about critical distances along a search.  full keeps one
// distance per table per recorded step; summary keeps only the min and mean
// over saddles; off disables tracking.  stride thins recording to every k-th
// accepted step (step 0 and the final step are always recorded).
struct DistanceTracking {
  enum class Mode { full, summary, off };
  Mode mode = Mode::full;
  int stride = 1;
};

struct StepRecord {
  long step = 0;       // accepted-step index, 0 = initial field
  double s = 0.0;      // flow time
  double j = 0.0;
  double fluence = 0.0;
  std::vector<double> table_distances;  // full mode only, in table order
  std::optional<double> min_saddle_distance;
  std::optional<double> mean_saddle_distance;
};

// One gradient-flow search.  iterations counts accepted integrator steps;
// tolerance rejections are tallied separately.  d_sadd_min is the smallest
// recorded distance to any saddle over the whole search, d_mean_sadd_min the
// mean over saddles of each saddle's own smallest recorded distance, and
// d_sadd_fail the distance to the nearest saddle at the final accepted step of
// a failed search.  All three are empty when no saddle is tracked.
struct SearchTrace {
  SearchOutcome outcome = SearchOutcome::exhausted;
  long iterations = 0;
  long rejected_steps = 0;
  double s_final = 0.0;
  double j_final = 0.0;
  double j_max = 0.0;
  double j_min = 0.0;
  std::vector<StepRecord> records;
  std::optional<double> d_sadd_min;
  std::optional<double> d_mean_sadd_min;
  std::optional<double> d_sadd_fail;
  ControlField final_field;
};

// true when j has reached the convergence band j >= j_max - fraction (j_max - j_min);
// throws std::invalid_argument unless j_max > j_min
bool check_convergence(double j, double j_max, double j_min, double fraction);

// Integrate d eps / ds = gamma * dJ/d eps from the initial field until the
// objective enters the convergence band (converged), decreases between two
// accepted steps (failed_decrease), or max_steps accepted steps pass
// (exhausted).  Convergence is tested on the initial field before any step.
//
// rho0 / theta are physical-frame diagonal vectors.  tables must come from
// enumerate_tables + classify_tables on the spectra of those operators (pass
// an empty vector to skip distance tracking); distances are evaluated in the
// canonical sorted frame at every recorded accepted step.
SearchTrace run_search(const SystemModel& model, const Eigen::VectorXd& rho0,
                       const Eigen::VectorXd& theta, const ControlField& initial_field,
                       const std::vector<ContingencyTable>& tables, const FlowSettings& settings,
                       const DistanceTracking& tracking = {});

// CSV with header step_index,s,J,fluence followed by one D_i column per table
// (full tracking) or min_saddle_distance,mean_saddle_distance (summary).
void write_trace_csv(const SearchTrace& trace, std::ostream& out);

}  // namespace qcl
