#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace qcl {

// Distinct eigenvalues of a diagonal operator, strictly descending, with their
// multiplicities.  Everything in the landscape analysis depends on the
// operators only through these.
struct DiagonalSpectrum {
  std::vector<double> values;
  std::vector<int> multiplicities;

  int distinct() const { return static_cast<int>(values.size()); }
  int total_dimension() const;
  void validate() const;  // throws std::invalid_argument on contract violation
};

// Group the entries of a diagonal into a spectrum.  Entries are chained into
// one group while adjacent sorted values differ by at most tol; a gap strictly
// inside (tol, 10 tol) is ambiguous and rejected with std::invalid_argument.
DiagonalSpectrum spectrum_from_diagonal(const Eigen::VectorXd& diag, double tol = 1e-9);

enum class TableClass { global_max, global_min, saddle };

// One critical submanifold of the objective J = Tr(U rho0 U^dag theta),
// encoded by its joint-overlap table: overlaps(j,k) = c_jk is the dimension
// shared between the j-th theta eigenspace (rows, multiplicity b_j) and the
// image of the k-th rho0 eigenspace (cols, multiplicity a_k).  Row sums give
// b, column sums give a, and the critical value is sum_jk c_jk o_j p_k.
struct ContingencyTable {
  int rows = 0;
  int cols = 0;
  std::vector<int> overlaps;  // row-major, length rows*cols
  double value = 0.0;
  TableClass classification = TableClass::saddle;
  int index = 0;              // 1-based position in the sorted enumeration
  bool tied_extreme = false;  // saddle whose value coincides with J_max or J_min

  int at(int j, int k) const { return overlaps[static_cast<std::size_t>(j) * cols + k]; }
};

// thrown when the predicted table count exceeds the enumeration cap
struct TableCapacityError : std::runtime_error {
  std::int64_t predicted;
  explicit TableCapacityError(std::int64_t n);
};

struct TopologyOptions {
  std::int64_t max_tables = 10'000'000;
};

// Exact number of tables with the given margins (saturating at cap + 1), via a
// memoized recursion over rows; never materializes the tables.
std::int64_t count_tables(const DiagonalSpectrum& rho, const DiagonalSpectrum& theta,
                          std::int64_t cap);

// All nonnegative-integer tables with row sums = theta multiplicities and
// column sums = rho multiplicities — the lattice points of the transportation
// polytope — each exactly once, sorted by descending critical value with ties
// broken lexicographically on the flattened overlaps.  index is filled with
// the 1-based sorted position.  Throws TableCapacityError when the predicted
// count exceeds options.max_tables.
std::vector<ContingencyTable> enumerate_tables(const DiagonalSpectrum& rho,
                                               const DiagonalSpectrum& theta,
                                               const TopologyOptions& options = {});

// critical value sum_jk c_jk o_j p_k of one table
double critical_value(const ContingencyTable& table, const DiagonalSpectrum& rho,
                      const DiagonalSpectrum& theta);

// Assign classes in place: the table aligning both spectra in descending order
// is the global max, the one aligning theta against reversed rho is the global
// min, everything else a saddle.  A saddle whose value equals an extreme value
// gets tied_extreme (numerical degeneracy warning).
void classify_tables(std::vector<ContingencyTable>& tables, const DiagonalSpectrum& rho,
                     const DiagonalSpectrum& theta);

// overlap table induced by aligning descending theta against descending
// (reversed = false) or ascending (reversed = true) rho
ContingencyTable aligned_table(const DiagonalSpectrum& rho, const DiagonalSpectrum& theta,
                               bool reversed);

// L1 distance sum_jk |c_jk - c'_jk| between same-shape tables; even, <= 2N
int table_distance(const ContingencyTable& a, const ContingencyTable& b);

// largest and smallest critical value reachable for diagonal operators with
// the given entries (rearrangement pairing); cheaper than enumerating
std::pair<double, double> objective_range(const Eigen::VectorXd& rho0,
                                          const Eigen::VectorXd& theta);

// {"overlaps": [[...]], "value": x, "class": "max"|"min"|"saddle", "index": i}
nlohmann::json table_to_json(const ContingencyTable& table);
std::string table_class_name(TableClass c);

}  // namespace qcl
