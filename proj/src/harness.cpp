#include "qcl/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "qcl/distance.hpp"
#include "qcl/dynamics.hpp"
#include "qcl/topology.hpp"

namespace qcl {

namespace {

const char* case_name(CaseId id) {
  switch (id) {
    case CaseId::one: return "I";
    case CaseId::two: return "II";
    case CaseId::three: return "III";
  }
  throw std::logic_error("unreachable case id");
}

const char* kind_name(SystemKind kind) {
  return kind == SystemKind::rotor ? "rotor" : "oscillator";
}

const char* outcome_name(SearchOutcome outcome) {
  switch (outcome) {
    case SearchOutcome::converged: return "converged";
    case SearchOutcome::failed_decrease: return "failed_decrease";
    case SearchOutcome::exhausted: return "exhausted";
  }
  throw std::logic_error("unreachable outcome");
}

[[noreturn]] void bad_config(const std::string& what) { throw std::invalid_argument(what); }

SystemModel build_model(const CaseSpec& spec) {
  return spec.h0 == SystemKind::rotor ? build_rotor(spec.n_levels, spec.dipole_d)
                                      : build_oscillator(spec.n_levels, spec.dipole_d);
}

// iid uniform eigenvalues, unit trace, sorted descending, adjacent gaps >= 1e-6
Eigen::VectorXd draw_nondegenerate(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  while (true) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      v[i] = rng.uniform();
      sum += v[i];
    }
    if (!(sum > 0.0)) continue;
    v /= sum;
    std::sort(v.data(), v.data() + n, std::greater<>());
    bool distinct = true;
    for (int i = 1; i < n && distinct; ++i) distinct = v[i - 1] - v[i] >= 1e-6;
    if (distinct) return v;
  }
}

}  // namespace

int CaseSpec::effective_intervals() const {
  if (n_intervals != 0) return n_intervals;
  return n_levels >= 10 ? 2048 : 512;
}

void CaseSpec::validate() const {
  if (n_levels < 2) bad_config("n_levels must be at least 2");
  if (case_id == CaseId::one && n_levels < 8)
    bad_config("case I requires at least 8 levels");
  if (observable < 1 || observable > 5) bad_config("observable must be in 1..5");
  if (!(dipole_d > 0.0)) bad_config("d must be positive");
  if (!(total_time > 0.0)) bad_config("T must be positive");
  if (n_intervals < 0) bad_config("L must be nonnegative (0 = default)");
  if (!(fluence_target > 0.0)) bad_config("F0 must be positive");
  if (n_runs < 1) bad_config("n_runs must be at least 1");
  if (!(flow.abs_tol > 0.0)) bad_config("abs_tol must be positive");
  if (!(flow.rel_tol >= 0.0)) bad_config("rel_tol must be nonnegative");
  if (!(flow.convergence_fraction > 0.0) || !(flow.convergence_fraction < 1.0))
    bad_config("convergence_fraction must lie in (0, 1)");
  if (flow.max_steps < 1) bad_config("max_steps must be positive");
  if (track_distances != "auto" && track_distances != "full" && track_distances != "summary" &&
      track_distances != "off")
    bad_config("track_distances must be auto, full, summary, or off");
}

CaseSpec case_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) bad_config("config must be a JSON object");
  static const std::set<std::string> allowed = {
      "case",   "n_levels", "h0",      "d",          "T",
      "L",      "F0",       "n_runs",  "seed",       "abs_tol",
      "rel_tol", "convergence_fraction", "max_steps", "observable", "track_distances"};
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) bad_config("unknown config key: " + item.key());

  auto as_double = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) bad_config(std::string(key) + " must be a number");
    return v.get<double>();
  };
  auto as_int = [&](const char* key, long long lo, long long hi) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) bad_config(std::string(key) + " must be an integer");
    const long long val = v.get<long long>();
    if (val < lo || val > hi) bad_config(std::string(key) + " is out of range");
    return val;
  };
  auto as_string = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_string()) bad_config(std::string(key) + " must be a string");
    return v.get<std::string>();
  };

  CaseSpec spec;
  if (j.contains("case")) {
    const std::string c = as_string("case");
    if (c == "I") spec.case_id = CaseId::one;
    else if (c == "II") spec.case_id = CaseId::two;
    else if (c == "III") spec.case_id = CaseId::three;
    else bad_config("case must be \"I\", \"II\", or \"III\"");
  }
  if (j.contains("n_levels")) spec.n_levels = static_cast<int>(as_int("n_levels", 0, 1 << 20));
  if (j.contains("h0")) {
    const std::string k = as_string("h0");
    if (k == "rotor") spec.h0 = SystemKind::rotor;
    else if (k == "oscillator") spec.h0 = SystemKind::oscillator;
    else bad_config("h0 must be \"rotor\" or \"oscillator\"");
  }
  if (j.contains("d")) spec.dipole_d = as_double("d");
  if (j.contains("T")) spec.total_time = as_double("T");
  if (j.contains("L")) spec.n_intervals = static_cast<int>(as_int("L", 0, 1 << 26));
  if (j.contains("F0")) spec.fluence_target = as_double("F0");
  if (j.contains("n_runs")) spec.n_runs = static_cast<int>(as_int("n_runs", 0, 1 << 26));
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (v.is_number_unsigned()) spec.seed = v.get<std::uint64_t>();
    else if (v.is_number_integer() && v.get<long long>() >= 0)
      spec.seed = static_cast<std::uint64_t>(v.get<long long>());
    else bad_config("seed must be a nonnegative integer");
  }
  if (j.contains("abs_tol")) spec.flow.abs_tol = as_double("abs_tol");
  if (j.contains("rel_tol")) spec.flow.rel_tol = as_double("rel_tol");
  if (j.contains("convergence_fraction"))
    spec.flow.convergence_fraction = as_double("convergence_fraction");
  if (j.contains("max_steps"))
    spec.flow.max_steps = static_cast<long>(as_int("max_steps", 0, 1LL << 40));
  if (j.contains("observable")) spec.observable = static_cast<int>(as_int("observable", -100, 100));
  if (j.contains("track_distances")) spec.track_distances = as_string("track_distances");
  spec.validate();
  return spec;
}

nlohmann::json case_spec_to_json(const CaseSpec& spec) {
  nlohmann::json j;
  j["case"] = case_name(spec.case_id);
  j["n_levels"] = spec.n_levels;
  j["h0"] = kind_name(spec.h0);
  j["d"] = spec.dipole_d;
  j["T"] = spec.total_time;
  j["L"] = spec.effective_intervals();
  j["F0"] = spec.fluence_target;
  j["n_runs"] = spec.n_runs;
  j["seed"] = spec.seed;
  j["abs_tol"] = spec.flow.abs_tol;
  j["rel_tol"] = spec.flow.rel_tol;
  j["convergence_fraction"] = spec.flow.convergence_fraction;
  j["max_steps"] = spec.flow.max_steps;
  j["observable"] = spec.observable;
  j["track_distances"] = spec.track_distances;
  return j;
}

std::string config_hash(const CaseSpec& spec) {
  const std::string canon = case_spec_to_json(spec).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CaseOperators make_case_operators(const CaseSpec& spec, Rng& rng) {
  const int n = spec.n_levels;
  CaseOperators ops;
  switch (spec.case_id) {
    case CaseId::one: {
      if (n < 8) bad_config("case I requires at least 8 levels");
      ops.rho0 = Eigen::VectorXd::Zero(n);
      ops.rho0[0] = 1.0;
      ops.theta = Eigen::VectorXd::Zero(n);
      const int m = spec.observable;
      const double denom = 4.0 * m + 5.0;
      ops.theta[7] = 5.0 / denom;
      for (int level = 7 - m; level <= 6; ++level) ops.theta[level] = 4.0 / denom;
      break;
    }
    case CaseId::two:
      ops.rho0 = Eigen::VectorXd::Zero(n);
      ops.rho0[0] = 1.0;
      ops.theta = draw_nondegenerate(n, rng);
      break;
    case CaseId::three:
      ops.rho0 = draw_nondegenerate(n, rng);
      ops.theta = draw_nondegenerate(n, rng);
      break;
  }
  return ops;
}

ControlField make_initial_field(const SystemModel& model, double total_time, int n_intervals,
                                double fluence_target, Rng& rng) {
  if (n_intervals < 1) throw std::invalid_argument("make_initial_field: need at least 1 interval");
  if (!(total_time > 0.0)) throw std::invalid_argument("make_initial_field: T must be positive");
  if (!(fluence_target > 0.0))
    throw std::invalid_argument("make_initial_field: fluence target must be positive");

  const auto [w_lo, w_hi] = transition_frequency_range(model);
  constexpr int n_modes = 20;
  std::array<double, n_modes> freq, amp;
  for (double& w : freq) w = rng.uniform(w_lo, w_hi);
  for (double& a : amp) a = rng.uniform();

  const double dt = total_time / n_intervals;
  const double eta = total_time / 10.0;
  Eigen::VectorXd values(n_intervals);
  for (int l = 0; l < n_intervals; ++l) {
    const double t = (l + 1) * dt;
    double sum = 0.0;
    for (int m = 0; m < n_modes; ++m) sum += amp[m] * std::cos(freq[m] * t);
    const double shifted = t - 0.5 * total_time;
    values[l] = std::exp(-shifted * shifted / (2.0 * eta * eta)) * sum;
  }
  const double raw = values.squaredNorm() * dt;
  if (!(raw > 0.0))
    throw std::runtime_error("make_initial_field: field vanished, cannot reach fluence target");
  values *= std::sqrt(fluence_target / raw);
  return ControlField{std::move(values), total_time};
}

LandscapeSetup prepare_landscape(const CaseSpec& spec, const Eigen::VectorXd& rho0,
                                 const Eigen::VectorXd& theta) {
  LandscapeSetup setup;
  std::string mode = spec.track_distances;
  // drawn-by-drawn landscapes grow factorially; past 8 levels stop tracking by default
  if (mode == "auto" && spec.case_id == CaseId::three && spec.n_levels > 8) mode = "off";
  if (mode == "off") {
    setup.tracking.mode = DistanceTracking::Mode::off;
    return setup;
  }
  const DiagonalSpectrum rho_spec = spectrum_from_diagonal(rho0);
  const DiagonalSpectrum theta_spec = spectrum_from_diagonal(theta);
  setup.tables = enumerate_tables(rho_spec, theta_spec);
  classify_tables(setup.tables, rho_spec, theta_spec);
  if (mode == "auto") mode = setup.tables.size() <= 64 ? "full" : "summary";
  setup.tracking.mode =
      mode == "full" ? DistanceTracking::Mode::full : DistanceTracking::Mode::summary;
  setup.tracking.stride = 1;
  return setup;
}

BatchSummary summarize(const CaseSpec& spec, const std::vector<SearchTrace>& traces) {
  BatchSummary summary;
  summary.config_hash = config_hash(spec);
  summary.n_runs = static_cast<int>(traces.size());
  double effort_sum = 0.0;
  double dmin_sum = 0.0, dmeanmin_sum = 0.0, dfail_sum = 0.0;
  int dmin_cnt = 0, dmeanmin_cnt = 0, dfail_cnt = 0;
  for (std::size_t r = 0; r < traces.size(); ++r) {
    const SearchTrace& t = traces[r];
    RunRecord rec;
    rec.run_index = static_cast<int>(r);
    rec.run_seed = Rng::substream_seed(spec.seed, r);
    rec.outcome = t.outcome;
    rec.iterations = t.iterations;
    rec.j_final = t.j_final;
    rec.d_sadd_min = t.d_sadd_min;
    rec.d_mean_sadd_min = t.d_mean_sadd_min;
    rec.d_sadd_fail = t.d_sadd_fail;
    switch (t.outcome) {
      case SearchOutcome::converged:
        ++summary.n_converged;
        effort_sum += static_cast<double>(t.iterations);
        if (t.d_sadd_min) {
          dmin_sum += *t.d_sadd_min;
          ++dmin_cnt;
        }
        if (t.d_mean_sadd_min) {
          dmeanmin_sum += *t.d_mean_sadd_min;
          ++dmeanmin_cnt;
        }
        break;
      case SearchOutcome::failed_decrease:
        ++summary.n_failed;
        if (t.d_sadd_fail) {
          dfail_sum += *t.d_sadd_fail;
          ++dfail_cnt;
        }
        break;
      case SearchOutcome::exhausted:
        ++summary.n_exhausted;
        break;
    }
    summary.runs.push_back(std::move(rec));
  }
  if (summary.n_converged > 0) summary.mean_search_effort = effort_sum / summary.n_converged;
  if (dmin_cnt > 0) summary.mean_d_sadd_min = dmin_sum / dmin_cnt;
  if (dmeanmin_cnt > 0) summary.mean_d_mean_sadd_min = dmeanmin_sum / dmeanmin_cnt;
  if (dfail_cnt > 0) summary.mean_d_sadd_fail = dfail_sum / dfail_cnt;
  return summary;
}

nlohmann::json batch_summary_to_json(const BatchSummary& summary) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["config_hash"] = summary.config_hash;
  j["n_runs"] = summary.n_runs;
  j["n_converged"] = summary.n_converged;
  j["n_failed"] = summary.n_failed;
  j["n_exhausted"] = summary.n_exhausted;
  j["mean_search_effort"] = opt(summary.mean_search_effort);
  j["mean_d_sadd_min"] = opt(summary.mean_d_sadd_min);
  j["mean_d_mean_sadd_min"] = opt(summary.mean_d_mean_sadd_min);
  j["mean_d_sadd_fail"] = opt(summary.mean_d_sadd_fail);
  nlohmann::json runs = nlohmann::json::array();
  for (const RunRecord& r : summary.runs) {
    nlohmann::json jr;
    jr["run_index"] = r.run_index;
    jr["run_seed"] = r.run_seed;
    jr["outcome"] = outcome_name(r.outcome);
    jr["iterations"] = r.iterations;
    jr["j_final"] = r.j_final;
    jr["d_sadd_min"] = opt(r.d_sadd_min);
    jr["d_mean_sadd_min"] = opt(r.d_mean_sadd_min);
    jr["d_sadd_fail"] = opt(r.d_sadd_fail);
    runs.push_back(std::move(jr));
  }
  j["runs"] = std::move(runs);
  return j;
}

BatchSummary run_batch(const CaseSpec& spec, const std::string& out_dir, int workers,
                       std::vector<SearchTrace>* traces_out) {
  spec.validate();
  const SystemModel model = build_model(spec);
  const int n_intervals = spec.effective_intervals();
  const int n_runs = spec.n_runs;

  std::vector<SearchTrace> traces(n_runs);
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto work = [&] {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= n_runs) break;
      try {
        Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(r));
        const CaseOperators ops = make_case_operators(spec, rng);
        const ControlField field =
            make_initial_field(model, spec.total_time, n_intervals, spec.fluence_target, rng);
        const LandscapeSetup setup = prepare_landscape(spec, ops.rho0, ops.theta);
        traces[r] =
            run_search(model, ops.rho0, ops.theta, field, setup.tables, spec.flow, setup.tracking);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        break;
      }
    }
  };

  int n_workers = workers <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : workers;
  n_workers = std::clamp(n_workers, 1, n_runs);
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  BatchSummary summary = summarize(spec, traces);

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(out_dir) / summary.config_hash;
    fs::create_directories(dir);
    auto dump_json = [&](const fs::path& path, const nlohmann::json& j) {
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      out << j.dump(2) << '\n';
    };
    dump_json(dir / "config.json", case_spec_to_json(spec));
    dump_json(dir / "summary.json", batch_summary_to_json(summary));
    for (int r = 0; r < n_runs; ++r) {
      char name[32];
      std::snprintf(name, sizeof name, "trace_run%03d.csv", r);
      std::ofstream out(dir / name);
      if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
      write_trace_csv(traces[r], out);
    }
  }

  if (traces_out) *traces_out = std::move(traces);
  return summary;
}

SweepResult run_sweep(const CaseSpec& base, const std::string& axis,
                      const std::vector<double>& values, const std::string& out_dir, int workers) {
  std::string canon;
  if (axis == "d" || axis == "dipole_d") canon = "d";
  else if (axis == "F0" || axis == "fluence") canon = "F0";
  else if (axis == "N" || axis == "n_levels") canon = "N";
  else if (axis == "tau" || axis == "abs_tol") canon = "tau";
  else if (axis == "observable") canon = "observable";
  else bad_config("unknown sweep axis: " + axis + " (expected d, F0, N, tau, or observable)");
  if (values.empty()) bad_config("sweep needs at least one value");

  auto as_integer = [&](double v) {
    if (v != std::floor(v)) bad_config("axis " + canon + " takes integer values");
    return static_cast<int>(v);
  };

  SweepResult result;
  result.axis = canon;
  result.values = values;
  for (double v : values) {
    CaseSpec spec = base;
    if (canon == "d") spec.dipole_d = v;
    else if (canon == "F0") spec.fluence_target = v;
    else if (canon == "N") spec.n_levels = as_integer(v);
    else if (canon == "tau") spec.flow.abs_tol = v;
    else spec.observable = as_integer(v);
    result.summaries.push_back(run_batch(spec, out_dir, workers));
  }
  return result;
}

nlohmann::json sweep_result_to_json(const SweepResult& sweep) {
  nlohmann::json j;
  j["axis"] = sweep.axis;
  j["values"] = sweep.values;
  nlohmann::json summaries = nlohmann::json::array();
  for (const BatchSummary& s : sweep.summaries) summaries.push_back(batch_summary_to_json(s));
  j["summaries"] = std::move(summaries);
  return j;
}

}  // namespace qcl
