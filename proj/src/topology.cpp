#include "qcl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <unordered_map>

namespace qcl {

int DiagonalSpectrum::total_dimension() const {
  return std::accumulate(multiplicities.begin(), multiplicities.end(), 0);
}

void DiagonalSpectrum::validate() const {
  if (values.size() != multiplicities.size() || values.empty())
    throw std::invalid_argument("DiagonalSpectrum: values/multiplicities mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw std::invalid_argument("DiagonalSpectrum: non-finite value");
    if (multiplicities[i] <= 0) throw std::invalid_argument("DiagonalSpectrum: multiplicity must be positive");
    if (i > 0 && !(values[i - 1] > values[i]))
      throw std::invalid_argument("DiagonalSpectrum: values must be strictly descending");
  }
}

DiagonalSpectrum spectrum_from_diagonal(const Eigen::VectorXd& diag, double tol) {
  const int n = static_cast<int>(diag.size());
  if (n < 1) throw std::invalid_argument("spectrum_from_diagonal: empty diagonal");
  if (!(tol >= 0.0)) throw std::invalid_argument("spectrum_from_diagonal: tol must be nonnegative");
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(diag[i])) throw std::invalid_argument("spectrum_from_diagonal: non-finite entry");

  std::vector<double> sorted(diag.data(), diag.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  DiagonalSpectrum spec;
  double group_sum = sorted[0];
  int group_count = 1;
  for (int i = 1; i < n; ++i) {
    const double gap = sorted[i - 1] - sorted[i];
    if (gap > tol && gap < 10.0 * tol)
      throw std::invalid_argument(
          "spectrum_from_diagonal: gap of " + std::to_string(gap) +
          " is ambiguous at tolerance " + std::to_string(tol));
    if (gap <= tol) {
      group_sum += sorted[i];
      ++group_count;
    } else {
      spec.values.push_back(group_sum / group_count);
      spec.multiplicities.push_back(group_count);
      group_sum = sorted[i];
      group_count = 1;
    }
  }
  spec.values.push_back(group_sum / group_count);
  spec.multiplicities.push_back(group_count);
  spec.validate();
  return spec;
}

TableCapacityError::TableCapacityError(std::int64_t n)
    : std::runtime_error("table enumeration would exceed the configured cap (count >= " +
                         std::to_string(n) + ")"),
      predicted(n) {}

namespace {

std::string pack_state(const std::vector<int>& cols) {
  std::string key(cols.size() * sizeof(int), '\0');
  std::memcpy(key.data(), cols.data(), key.size());
  return key;
}

// enumerate all ways to split `total` into bounded column contributions,
// invoking sink(choice) for each; bounds guarantee every branch can finish
void for_each_row_fill(int total, const std::vector<int>& capacity,
                       const std::function<void(const std::vector<int>&)>& sink) {
  const int r = static_cast<int>(capacity.size());
  std::vector<int> suffix_capacity(r + 1, 0);  // sum of capacities at >= k
  for (int k = r - 1; k >= 0; --k) suffix_capacity[k] = suffix_capacity[k + 1] + capacity[k];

  std::vector<int> choice(r, 0);
  std::function<void(int, int)> rec = [&](int k, int remaining) {
    if (k == r) {
      sink(choice);
      return;
    }
    const int lo = std::max(0, remaining - suffix_capacity[k + 1]);
    const int hi = std::min(remaining, capacity[k]);
    for (int c = lo; c <= hi; ++c) {
      choice[k] = c;
      rec(k + 1, remaining - c);
    }
  };
  rec(0, total);
}

}  // namespace

std::int64_t count_tables(const DiagonalSpectrum& rho, const DiagonalSpectrum& theta,
                          std::int64_t cap) {
  rho.validate();
  theta.validate();
  if (rho.total_dimension() != theta.total_dimension())
    throw std::invalid_argument("count_tables: spectra live in different dimensions");
  const std::int64_t sat = std::min<std::int64_t>(cap, 1'000'000'000'000'000LL) + 1;

  // breadth-first over theta rows; a state is the vector of still-unassigned
  // column sums.  Any state reachable here can be completed (transportation
  // feasibility is just total balance), so distinct states at one level are a
  // lower bound on the table count — if the frontier outgrows its budget the
  // count is reported as saturated rather than exact.
  std::unordered_map<std::string, std::int64_t> frontier;
  frontier.emplace(pack_state(rho.multiplicities), 1);
  constexpr std::size_t state_budget = 2'000'000;

  std::vector<int> cols(rho.multiplicities.size());
  for (int row : theta.multiplicities) {
    std::unordered_map<std::string, std::int64_t> next;
    for (const auto& [key, ways] : frontier) {
      std::memcpy(cols.data(), key.data(), key.size());
      for_each_row_fill(row, cols, [&](const std::vector<int>& choice) {
        std::vector<int> rest(cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) rest[k] = cols[k] - choice[k];
        auto& slot = next[pack_state(rest)];
        slot = std::min(sat, slot + ways);
      });
      if (next.size() > state_budget) return sat;
    }
    frontier = std::move(next);
  }

  std::int64_t total = 0;
  for (const auto& [key, ways] : frontier) total = std::min(sat, total + ways);
  return total;
}

double critical_value(const ContingencyTable& table, const DiagonalSpectrum& rho,
                      const DiagonalSpectrum& theta) {
  if (table.rows != theta.distinct() || table.cols != rho.distinct())
    throw std::invalid_argument("critical_value: table shape does not match the spectra");
  double v = 0.0;
  for (int j = 0; j < table.rows; ++j)
    for (int k = 0; k < table.cols; ++k) v += table.at(j, k) * theta.values[j] * rho.values[k];
  return v;
}

std::vector<ContingencyTable> enumerate_tables(const DiagonalSpectrum& rho,
                                               const DiagonalSpectrum& theta,
                                               const TopologyOptions& options) {
  const std::int64_t count = count_tables(rho, theta, options.max_tables);
  if (count > options.max_tables) throw TableCapacityError(count);

  const int q = theta.distinct();
  const int r = rho.distinct();
  std::vector<ContingencyTable> tables;
  tables.reserve(static_cast<std::size_t>(count));

  ContingencyTable work;
  work.rows = q;
  work.cols = r;
  work.overlaps.assign(static_cast<std::size_t>(q) * r, 0);
  std::vector<int> remaining = rho.multiplicities;

  std::function<void(int)> fill_row = [&](int j) {
    if (j == q) {
      work.value = critical_value(work, rho, theta);
      tables.push_back(work);
      return;
    }
    for_each_row_fill(theta.multiplicities[j], remaining, [&](const std::vector<int>& choice) {
      for (int k = 0; k < r; ++k) {
        work.overlaps[static_cast<std::size_t>(j) * r + k] = choice[k];
        remaining[k] -= choice[k];
      }
      fill_row(j + 1);
      for (int k = 0; k < r; ++k) remaining[k] += work.overlaps[static_cast<std::size_t>(j) * r + k];
    });
  };
  fill_row(0);

  std::sort(tables.begin(), tables.end(), [](const ContingencyTable& a, const ContingencyTable& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.overlaps < b.overlaps;
  });
  for (std::size_t i = 0; i < tables.size(); ++i) tables[i].index = static_cast<int>(i) + 1;
  return tables;
}

ContingencyTable aligned_table(const DiagonalSpectrum& rho, const DiagonalSpectrum& theta,
                               bool reversed) {
  rho.validate();
  theta.validate();
  const int n = rho.total_dimension();
  if (n != theta.total_dimension())
    throw std::invalid_argument("aligned_table: spectra live in different dimensions");

  const int q = theta.distinct();
  const int r = rho.distinct();
  ContingencyTable table;
  table.rows = q;
  table.cols = r;
  table.overlaps.assign(static_cast<std::size_t>(q) * r, 0);

  // expanded index ranges: theta block j occupies [tb, tb + b_j); rho block k
  // occupies [rb, rb + a_k) in descending order, mirrored when reversed
  int tb = 0;
  for (int j = 0; j < q; ++j) {
    int rb = 0;
    for (int k = 0; k < r; ++k) {
      const int a = rho.multiplicities[k];
      const int start = reversed ? n - rb - a : rb;
      const int lo = std::max(tb, start);
      const int hi = std::min(tb + theta.multiplicities[j], start + a);
      table.overlaps[static_cast<std::size_t>(j) * r + k] = std::max(0, hi - lo);
      rb += a;
    }
    tb += theta.multiplicities[j];
  }
  table.value = critical_value(table, rho, theta);
  return table;
}

void classify_tables(std::vector<ContingencyTable>& tables, const DiagonalSpectrum& rho,
                     const DiagonalSpectrum& theta) {
  const ContingencyTable top = aligned_table(rho, theta, false);
  const ContingencyTable bottom = aligned_table(rho, theta, true);

  auto locate = [&](const ContingencyTable& target) {
    for (std::size_t i = 0; i < tables.size(); ++i)
      if (tables[i].overlaps == target.overlaps) return static_cast<std::ptrdiff_t>(i);
    return static_cast<std::ptrdiff_t>(-1);
  };
  const std::ptrdiff_t i_max = locate(top);
  const std::ptrdiff_t i_min = locate(bottom);
  if (i_max < 0 || i_min < 0)
    throw std::invalid_argument("classify_tables: table list does not belong to these spectra");

  for (auto& t : tables) {
    t.classification = TableClass::saddle;
    t.tied_extreme = false;
  }
  tables[i_max].classification = TableClass::global_max;
  // a one-table landscape (theta or rho proportional to identity) is flat;
  // the single table keeps the global_max label
  if (i_min != i_max) tables[i_min].classification = TableClass::global_min;

  for (auto& t : tables)
    if (t.classification == TableClass::saddle &&
        (t.value == tables[i_max].value || t.value == tables[i_min].value))
      t.tied_extreme = true;
}

int table_distance(const ContingencyTable& a, const ContingencyTable& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("table_distance: shapes differ");
  int d = 0;
  for (std::size_t i = 0; i < a.overlaps.size(); ++i) d += std::abs(a.overlaps[i] - b.overlaps[i]);
  return d;
}

std::pair<double, double> objective_range(const Eigen::VectorXd& rho0,
                                          const Eigen::VectorXd& theta) {
  if (rho0.size() != theta.size() || rho0.size() == 0)
    throw std::invalid_argument("objective_range: operator dimensions do not match");
  std::vector<double> r(rho0.data(), rho0.data() + rho0.size());
  std::vector<double> t(theta.data(), theta.data() + theta.size());
  std::sort(r.begin(), r.end(), std::greater<double>());
  std::sort(t.begin(), t.end(), std::greater<double>());
  double hi = 0.0, lo = 0.0;
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    hi += r[i] * t[i];
    lo += r[i] * t[n - 1 - i];
  }
  return {hi, lo};
}

std::string table_class_name(TableClass c) {
  switch (c) {
    case TableClass::global_max: return "max";
    case TableClass::global_min: return "min";
    default: return "saddle";
  }
}

nlohmann::json table_to_json(const ContingencyTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (int j = 0; j < table.rows; ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < table.cols; ++k) row.push_back(table.at(j, k));
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"overlaps", std::move(rows)},
                        {"value", table.value},
                        {"class", table_class_name(table.classification)},
                        {"index", table.index}};
}

}  // namespace qcl
