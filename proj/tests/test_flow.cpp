#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qcl/dynamics.hpp"
#include "qcl/flow.hpp"
#include "qcl/system.hpp"
#include "qcl/topology.hpp"

using namespace qcl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

template <typename F>
ControlField field_from(double total_time, int n_intervals, F&& shape) {
  ControlField f;
  f.total_time = total_time;
  f.values.resize(n_intervals);
  const double dt = total_time / n_intervals;
  for (int l = 0; l < n_intervals; ++l) f.values[l] = shape((l + 1) * dt);
  return f;
}

struct ThreeLevelProblem {
  SystemModel model = build_rotor(3, 0.4);
  Eigen::VectorXd rho0 = vec({1, 0, 0});
  Eigen::VectorXd theta = vec({0.5, 0.3, 0.2});
  std::vector<ContingencyTable> tables;

  ThreeLevelProblem() {
    const DiagonalSpectrum rs = spectrum_from_diagonal(rho0);
    const DiagonalSpectrum ts = spectrum_from_diagonal(theta);
    tables = enumerate_tables(rs, ts);
    classify_tables(tables, rs, ts);
  }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("convergence band boundary is inclusive") {
  // band: j >= 0.2 - 1e-3 * (0.2 - 0) = 0.1998
  CHECK(check_convergence(0.1998, 0.2, 0.0, 1e-3));
  CHECK(check_convergence(0.2, 0.2, 0.0, 1e-3));
  CHECK_FALSE(check_convergence(0.1998 - 1e-12, 0.2, 0.0, 1e-3));
  CHECK_THROWS_AS(check_convergence(0.1, 0.2, 0.2, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(check_convergence(0.1, 0.1, 0.2, 1e-3), std::invalid_argument);
}

TEST_CASE("a field already in the band converges before any step") {
  const ThreeLevelProblem p;
  REQUIRE(p.tables.size() == 3);
  const ControlField zero = field_from(3.0, 24, [](double) { return 0.0; });

  const SearchTrace trace =
      run_search(p.model, p.rho0, p.theta, zero, p.tables, FlowSettings{});
  CHECK(trace.outcome == SearchOutcome::converged);
  CHECK(trace.iterations == 0);
  CHECK(trace.s_final == 0.0);
  CHECK(trace.j_final == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(trace.j_max == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(trace.j_min == doctest::Approx(0.2).epsilon(1e-15));
  REQUIRE(trace.records.size() == 1);
  CHECK(trace.records[0].step == 0);
  CHECK(trace.records[0].table_distances.size() == 3);
  CHECK(trace.records[0].table_distances[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((trace.final_field.values.array() == zero.values.array()).all());
}

TEST_CASE("gradient flow climbs a three-level landscape deterministically") {
  const ThreeLevelProblem p;
  const ControlField start =
      field_from(3.0, 24, [](double t) { return 0.3 * std::sin(2.1 * t) + 0.1 * std::cos(5.0 * t); });

  FlowSettings settings;
  settings.abs_tol = 1e-8;
  settings.rel_tol = 1e-4;
  const SearchTrace a = run_search(p.model, p.rho0, p.theta, start, p.tables, settings);
  CHECK(a.outcome == SearchOutcome::converged);
  CHECK(a.iterations > 0);
  CHECK(a.s_final > 0.0);
  // band floor: 0.5 - 1e-3 * 0.3
  CHECK(a.j_final >= 0.4997 - 1e-12);

  // the objective never decreases along accepted steps of a converged search
  for (std::size_t i = 1; i < a.records.size(); ++i)
    CHECK(a.records[i].j >= a.records[i - 1].j - 1e-12);
  CHECK(a.records.front().step == 0);
  CHECK(a.records.back().step == a.iterations);

  // the tracked minimum matches the records
  REQUIRE(a.d_sadd_min.has_value());
  double best = 1e300;
  for (const auto& r : a.records)
    if (r.min_saddle_distance) best = std::min(best, *r.min_saddle_distance);
  CHECK(*a.d_sadd_min == doctest::Approx(best).epsilon(1e-15));

  const SearchTrace b = run_search(p.model, p.rho0, p.theta, start, p.tables, settings);
  CHECK(b.iterations == a.iterations);
  CHECK(b.rejected_steps == a.rejected_steps);
  CHECK(b.s_final == a.s_final);
  CHECK(b.j_final == a.j_final);
  CHECK(b.records.size() == a.records.size());
  CHECK((b.final_field.values.array() == a.final_field.values.array()).all());
}

TEST_CASE("the search converges across a range of tolerances") {
  const ThreeLevelProblem p;
  const ControlField start =
      field_from(3.0, 24, [](double t) { return 0.25 * std::sin(1.7 * t + 0.4); });
  for (double rel : {1e-2, 1e-4, 1e-6}) {
    FlowSettings settings;
    settings.rel_tol = rel;
    const SearchTrace trace = run_search(p.model, p.rho0, p.theta, start, p.tables, settings);
    CHECK(trace.outcome == SearchOutcome::converged);
    CHECK(trace.j_final >= 0.4997 - 1e-12);
  }
}

TEST_CASE("a coarse tolerance near a saddle produces an honest failure record") {
  // eight-level ladder with a wide middle eigenspace: saddle trapping country
  const SystemModel model = build_rotor(8, 0.2);
  const Eigen::VectorXd rho0 = vec({1, 0, 0, 0, 0, 0, 0, 0});
  const Eigen::VectorXd theta = vec({0, 0, 0.16, 0.16, 0.16, 0.16, 0.16, 0.2});
  const DiagonalSpectrum rs = spectrum_from_diagonal(rho0);
  const DiagonalSpectrum ts = spectrum_from_diagonal(theta);
  std::vector<ContingencyTable> tables = enumerate_tables(rs, ts);
  classify_tables(tables, rs, ts);
  REQUIRE(tables.size() == 3);

  FlowSettings settings;
  settings.rel_tol = 1e-1;  // deliberately sloppy
  settings.max_steps = 20000;

  int failures = 0;
  for (double phase : {0.0, 0.9, 1.7, 2.6}) {
    const ControlField start = field_from(20.0, 64, [phase](double t) {
      return 0.12 * std::sin(3.1 * t + phase) + 0.07 * std::cos(7.3 * t);
    });
    const SearchTrace trace = run_search(model, rho0, theta, start, tables, settings);
    if (trace.outcome != SearchOutcome::failed_decrease) continue;
    ++failures;
    REQUIRE(trace.d_sadd_fail.has_value());
    REQUIRE(trace.records.back().min_saddle_distance.has_value());
    CHECK(*trace.d_sadd_fail ==
          doctest::Approx(*trace.records.back().min_saddle_distance).epsilon(1e-15));
    CHECK(trace.j_final < 0.2 - 1e-3 * 0.2);
  }
  CHECK(failures > 0);
}

TEST_CASE("a vanishing initial gradient stops the search as exhausted") {
  // drift-only evolution commutes with both operators, so the gradient is
  // exactly zero while the objective sits at the bottom of the landscape
  const SystemModel model = build_rotor(3, 0.4);
  const Eigen::VectorXd rho0 = vec({1, 0, 0});
  const Eigen::VectorXd theta = vec({0.2, 0.3, 0.5});
  const DiagonalSpectrum rs = spectrum_from_diagonal(rho0);
  const DiagonalSpectrum ts = spectrum_from_diagonal(theta);
  std::vector<ContingencyTable> tables = enumerate_tables(rs, ts);
  classify_tables(tables, rs, ts);

  const ControlField zero = field_from(3.0, 24, [](double) { return 0.0; });
  const SearchTrace trace = run_search(model, rho0, theta, zero, tables, FlowSettings{});
  CHECK(trace.outcome == SearchOutcome::exhausted);
  CHECK(trace.iterations == 0);
  CHECK(trace.j_final == doctest::Approx(0.2).epsilon(1e-12));
  REQUIRE(trace.records.size() == 1);
}

TEST_CASE("a tiny step budget exhausts with the budget spent") {
  const ThreeLevelProblem p;
  const ControlField start =
      field_from(3.0, 24, [](double t) { return 0.3 * std::sin(2.1 * t); });
  FlowSettings settings;
  settings.max_steps = 3;
  settings.convergence_fraction = 1e-9;  // out of reach in three steps
  const SearchTrace trace = run_search(p.model, p.rho0, p.theta, start, p.tables, settings);
  CHECK(trace.outcome == SearchOutcome::exhausted);
  CHECK(trace.iterations == 3);
  CHECK(trace.records.back().step == 3);
}

TEST_CASE("tracking off or an empty table list yields no distance data") {
  const ThreeLevelProblem p;
  const ControlField start =
      field_from(3.0, 24, [](double t) { return 0.2 * std::sin(2.1 * t); });

  DistanceTracking off;
  off.mode = DistanceTracking::Mode::off;
  const SearchTrace a = run_search(p.model, p.rho0, p.theta, start, p.tables, FlowSettings{}, off);
  CHECK_FALSE(a.d_sadd_min.has_value());
  CHECK_FALSE(a.d_mean_sadd_min.has_value());
  for (const auto& r : a.records) {
    CHECK(r.table_distances.empty());
    CHECK_FALSE(r.min_saddle_distance.has_value());
  }

  const SearchTrace b =
      run_search(p.model, p.rho0, p.theta, start, {}, FlowSettings{}, DistanceTracking{});
  CHECK_FALSE(b.d_sadd_min.has_value());
  for (const auto& r : b.records) CHECK(r.table_distances.empty());
  CHECK(b.outcome == SearchOutcome::converged);
}

TEST_CASE("summary tracking keeps saddle aggregates only") {
  const ThreeLevelProblem p;
  const ControlField start =
      field_from(3.0, 24, [](double t) { return 0.3 * std::sin(2.1 * t); });
  DistanceTracking tracking;
  tracking.mode = DistanceTracking::Mode::summary;
  const SearchTrace trace =
      run_search(p.model, p.rho0, p.theta, start, p.tables, FlowSettings{}, tracking);
  CHECK(trace.d_sadd_min.has_value());
  CHECK(trace.d_mean_sadd_min.has_value());
  // one saddle: the mean over saddles equals the min over saddles
  CHECK(*trace.d_mean_sadd_min == doctest::Approx(*trace.d_sadd_min).epsilon(1e-15));
  for (const auto& r : trace.records) {
    CHECK(r.table_distances.empty());
    CHECK(r.min_saddle_distance.has_value());
    CHECK(r.mean_saddle_distance.has_value());
  }
}

TEST_CASE("stride thins the recorded steps but keeps endpoints") {
  const ThreeLevelProblem p;
  const ControlField start =
      field_from(3.0, 24, [](double t) { return 0.3 * std::sin(2.1 * t) + 0.1 * std::cos(5.0 * t); });
  DistanceTracking tracking;
  tracking.stride = 5;
  const SearchTrace trace =
      run_search(p.model, p.rho0, p.theta, start, p.tables, FlowSettings{}, tracking);
  REQUIRE(trace.records.size() >= 2);
  CHECK(trace.records.front().step == 0);
  CHECK(trace.records.back().step == trace.iterations);
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i)
    CHECK(trace.records[i].step % 5 == 0);
  // no duplicate steps even when the final step is a stride multiple
  for (std::size_t i = 1; i < trace.records.size(); ++i)
    CHECK(trace.records[i].step > trace.records[i - 1].step);
}

TEST_CASE("trace csv layout follows the tracking mode") {
  const ThreeLevelProblem p;
  const ControlField start =
      field_from(3.0, 24, [](double t) { return 0.3 * std::sin(2.1 * t); });

  const SearchTrace full = run_search(p.model, p.rho0, p.theta, start, p.tables, FlowSettings{});
  std::ostringstream full_out;
  write_trace_csv(full, full_out);
  const auto full_lines = lines_of(full_out.str());
  REQUIRE_FALSE(full_lines.empty());
  CHECK(full_lines[0] == "step_index,s,J,fluence,D_1,D_2,D_3");
  CHECK(full_lines.size() == full.records.size() + 1);

  DistanceTracking summary;
  summary.mode = DistanceTracking::Mode::summary;
  const SearchTrace sum =
      run_search(p.model, p.rho0, p.theta, start, p.tables, FlowSettings{}, summary);
  std::ostringstream sum_out;
  write_trace_csv(sum, sum_out);
  CHECK(lines_of(sum_out.str())[0] == "step_index,s,J,fluence,min_saddle_distance,mean_saddle_distance");

  DistanceTracking off;
  off.mode = DistanceTracking::Mode::off;
  const SearchTrace none =
      run_search(p.model, p.rho0, p.theta, start, p.tables, FlowSettings{}, off);
  std::ostringstream none_out;
  write_trace_csv(none, none_out);
  CHECK(lines_of(none_out.str())[0] == "step_index,s,J,fluence");
}

TEST_CASE("invalid settings are rejected up front") {
  const ThreeLevelProblem p;
  const ControlField start = field_from(3.0, 24, [](double t) { return 0.1 * std::sin(t); });

  FlowSettings bad;
  bad.abs_tol = -1.0;
  CHECK_THROWS_AS(run_search(p.model, p.rho0, p.theta, start, p.tables, bad),
                  std::invalid_argument);
  bad = FlowSettings{};
  bad.rel_tol = -1e-3;
  CHECK_THROWS_AS(run_search(p.model, p.rho0, p.theta, start, p.tables, bad),
                  std::invalid_argument);
  bad = FlowSettings{};
  bad.max_steps = 0;
  CHECK_THROWS_AS(run_search(p.model, p.rho0, p.theta, start, p.tables, bad),
                  std::invalid_argument);

  DistanceTracking tracking;
  tracking.stride = 0;
  CHECK_THROWS_AS(run_search(p.model, p.rho0, p.theta, start, p.tables, FlowSettings{}, tracking),
                  std::invalid_argument);

  // tables whose shape disagrees with the operators' spectra
  ContingencyTable alien;
  alien.rows = 2;
  alien.cols = 2;
  alien.overlaps = {1, 0, 0, 1};
  CHECK_THROWS_AS(
      run_search(p.model, p.rho0, p.theta, start, {alien}, FlowSettings{}),
      std::invalid_argument);
}
