#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "qcl/topology.hpp"
#include "test_support.hpp"

using namespace qcl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

std::vector<int> flat(const ContingencyTable& t) { return t.overlaps; }

}  // namespace

TEST_CASE("spectrum grouping sorts, chains, and rejects ambiguity") {
  const DiagonalSpectrum s = spectrum_from_diagonal(vec({0.1, 0.5, 0.2, 0.2}));
  CHECK(s.values == std::vector<double>{0.5, 0.2, 0.1});
  CHECK(s.multiplicities == std::vector<int>{1, 2, 1});
  CHECK(s.distinct() == 3);
  CHECK(s.total_dimension() == 4);

  // within tol: merged, value is the group mean
  const DiagonalSpectrum close = spectrum_from_diagonal(vec({1.0, 1.0 + 5e-10, 0.5}), 1e-9);
  CHECK(close.distinct() == 2);
  CHECK(close.multiplicities == std::vector<int>{2, 1});
  CHECK(close.values[0] == doctest::Approx(1.0 + 2.5e-10).epsilon(1e-15));

  // chained grouping: adjacent gaps under tol merge even when the span exceeds tol
  const DiagonalSpectrum chain = spectrum_from_diagonal(vec({0.0, 0.8e-9, 1.6e-9}), 1e-9);
  CHECK(chain.distinct() == 1);
  CHECK(chain.multiplicities == std::vector<int>{3});

  // a gap in the ambiguous band (tol, 10 tol) is rejected
  CHECK_THROWS_AS(spectrum_from_diagonal(vec({1.0, 1.0 + 5e-9, 0.5}), 1e-9),
                  std::invalid_argument);
  // clearly separated: distinct
  CHECK(spectrum_from_diagonal(vec({1.0, 1.0 + 2e-8, 0.5}), 1e-9).distinct() == 3);
}

TEST_CASE("spectrum validation rejects malformed input") {
  DiagonalSpectrum bad;
  bad.values = {0.2, 0.5};
  bad.multiplicities = {1, 1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.values = {0.5, 0.2};
  bad.multiplicities = {1, 0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.multiplicities = {1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("worked four-level landscape enumerates exactly three tables") {
  const DiagonalSpectrum rho = spectrum_from_diagonal(vec({0, 0, 0, 1}));
  const DiagonalSpectrum theta = spectrum_from_diagonal(vec({0.5, 0.2, 0.2, 0.1}));
  std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  classify_tables(tables, rho, theta);
  REQUIRE(tables.size() == 3);

  CHECK(flat(tables[0]) == std::vector<int>{1, 0, 0, 2, 0, 1});
  CHECK(tables[0].value == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(tables[0].classification == TableClass::global_max);
  CHECK(tables[0].index == 1);

  CHECK(flat(tables[1]) == std::vector<int>{0, 1, 1, 1, 0, 1});
  CHECK(tables[1].value == doctest::Approx(0.2).epsilon(1e-13));
  CHECK(tables[1].classification == TableClass::saddle);

  CHECK(flat(tables[2]) == std::vector<int>{0, 1, 0, 2, 1, 0});
  CHECK(tables[2].value == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(tables[2].classification == TableClass::global_min);
  CHECK(tables[2].index == 3);

  for (const auto& t : tables) CHECK_FALSE(t.tied_extreme);
}

TEST_CASE("observable with a five-fold middle eigenvalue gives the known three tables") {
  const Eigen::VectorXd rho_diag = vec({1, 0, 0, 0, 0, 0, 0, 0});
  const Eigen::VectorXd theta_diag = vec({0, 0, 0.16, 0.16, 0.16, 0.16, 0.16, 0.2});
  const DiagonalSpectrum rho = spectrum_from_diagonal(rho_diag);
  const DiagonalSpectrum theta = spectrum_from_diagonal(theta_diag);
  CHECK(rho.multiplicities == std::vector<int>{1, 7});
  CHECK(theta.multiplicities == std::vector<int>{1, 5, 2});

  std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  classify_tables(tables, rho, theta);
  REQUIRE(tables.size() == 3);
  CHECK(flat(tables[0]) == std::vector<int>{1, 0, 0, 5, 0, 2});
  CHECK(tables[0].value == doctest::Approx(0.2).epsilon(1e-13));
  CHECK(flat(tables[1]) == std::vector<int>{0, 1, 1, 4, 0, 2});
  CHECK(tables[1].value == doctest::Approx(0.16).epsilon(1e-13));
  CHECK(tables[1].classification == TableClass::saddle);
  CHECK(flat(tables[2]) == std::vector<int>{0, 1, 0, 5, 1, 1});
  CHECK(tables[2].value == doctest::Approx(0.0).epsilon(1e-13));

  // every pair of these submanifolds sits at overlap distance 4
  CHECK(table_distance(tables[0], tables[1]) == 4);
  CHECK(table_distance(tables[0], tables[2]) == 4);
  CHECK(table_distance(tables[1], tables[2]) == 4);
  for (const auto& t : tables) CHECK(table_distance(t, t) == 0);
}

TEST_CASE("pure state against a nondegenerate observable yields N tables") {
  Eigen::VectorXd rho_diag = Eigen::VectorXd::Zero(8);
  rho_diag[0] = 1.0;
  Eigen::VectorXd theta_diag(8);
  for (int i = 0; i < 8; ++i) theta_diag[i] = (8.0 - i) / 36.0;
  const DiagonalSpectrum rho = spectrum_from_diagonal(rho_diag);
  const DiagonalSpectrum theta = spectrum_from_diagonal(theta_diag);
  std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  classify_tables(tables, rho, theta);
  REQUIRE(tables.size() == 8);
  int saddles = 0, maxima = 0, minima = 0;
  for (const auto& t : tables) {
    saddles += t.classification == TableClass::saddle;
    maxima += t.classification == TableClass::global_max;
    minima += t.classification == TableClass::global_min;
  }
  CHECK(maxima == 1);
  CHECK(minima == 1);
  CHECK(saddles == 6);
}

TEST_CASE("two full-rank nondegenerate operators on 8 levels yield 8! tables") {
  Eigen::VectorXd diag(8);
  for (int i = 0; i < 8; ++i) diag[i] = (8.0 - i) / 36.0;
  const DiagonalSpectrum rho = spectrum_from_diagonal(diag);
  const DiagonalSpectrum theta = spectrum_from_diagonal(diag);
  CHECK(count_tables(rho, theta, 1'000'000) == 40320);
  std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  classify_tables(tables, rho, theta);
  REQUIRE(tables.size() == 40320);
  int saddles = 0;
  for (const auto& t : tables) saddles += t.classification == TableClass::saddle;
  CHECK(saddles == 40318);
}

TEST_CASE("enumeration matches the permutation oracle for nondegenerate spectra") {
  const Eigen::VectorXd rho_diag = vec({0.4, 0.3, 0.2, 0.1});
  const Eigen::VectorXd theta_diag = vec({0.45, 0.25, 0.2, 0.1});
  const DiagonalSpectrum rho = spectrum_from_diagonal(rho_diag);
  const DiagonalSpectrum theta = spectrum_from_diagonal(theta_diag);
  std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  classify_tables(tables, rho, theta);
  REQUIRE(tables.size() == 24);

  std::vector<double> oracle;
  std::vector<int> perm = {0, 1, 2, 3};
  do {
    double j = 0.0;
    for (int i = 0; i < 4; ++i) j += theta_diag[i] * rho_diag[perm[i]];
    oracle.push_back(j);
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::sort(oracle.begin(), oracle.end(), std::greater<>());

  for (int i = 0; i < 24; ++i) CHECK(tables[i].value == doctest::Approx(oracle[i]).epsilon(1e-13));
  CHECK(tables[0].classification == TableClass::global_max);
  CHECK(tables[23].classification == TableClass::global_min);

  const auto [hi, lo] = objective_range(rho_diag, theta_diag);
  CHECK(hi == doctest::Approx(oracle.front()).epsilon(1e-14));
  CHECK(lo == doctest::Approx(oracle.back()).epsilon(1e-14));
}

TEST_CASE("enumeration equals the permutation-induced table set on all 4-level patterns") {
  const auto comps = test_support::compositions(4);
  for (const auto& rho_mults : comps)
    for (const auto& theta_mults : comps) {
      const DiagonalSpectrum rho = test_support::spectrum_from_mults(rho_mults);
      const DiagonalSpectrum theta = test_support::spectrum_from_mults(theta_mults);
      const std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
      std::set<std::vector<int>> enumerated;
      for (const auto& t : tables) enumerated.insert(t.overlaps);

      std::set<std::vector<int>> induced;
      std::vector<int> perm = {0, 1, 2, 3};
      do {
        induced.insert(test_support::induced_overlaps(perm, rho_mults, theta_mults));
      } while (std::next_permutation(perm.begin(), perm.end()));

      CHECK(enumerated == induced);
    }
}

TEST_CASE("aligned tables pick out the extremes") {
  const DiagonalSpectrum rho = spectrum_from_diagonal(vec({0, 0, 0, 1}));
  const DiagonalSpectrum theta = spectrum_from_diagonal(vec({0.5, 0.2, 0.2, 0.1}));
  CHECK(aligned_table(rho, theta, false).overlaps == std::vector<int>{1, 0, 0, 2, 0, 1});
  CHECK(aligned_table(rho, theta, true).overlaps == std::vector<int>{0, 1, 0, 2, 1, 0});
}

TEST_CASE("objective range uses the rearrangement pairing") {
  const auto [hi, lo] = objective_range(vec({0, 0, 0, 1}), vec({0.5, 0.2, 0.2, 0.1}));
  CHECK(hi == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lo == doctest::Approx(0.1).epsilon(1e-15));
  const auto [hi5, lo5] =
      objective_range(vec({1, 0, 0, 0, 0, 0, 0, 0}), vec({0, 0, 0.16, 0.16, 0.16, 0.16, 0.16, 0.2}));
  CHECK(hi5 == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(lo5 == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("enumeration capacity is enforced with an exact predicted count") {
  const DiagonalSpectrum rho = spectrum_from_diagonal(vec({0, 0, 0, 1}));
  const DiagonalSpectrum theta = spectrum_from_diagonal(vec({0.5, 0.2, 0.2, 0.1}));
  CHECK(count_tables(rho, theta, 1000) == 3);
  TopologyOptions tight;
  tight.max_tables = 2;
  CHECK_THROWS_AS(enumerate_tables(rho, theta, tight), TableCapacityError);
  try {
    enumerate_tables(rho, theta, tight);
  } catch (const TableCapacityError& e) {
    CHECK(e.predicted == 3);
  }
}

TEST_CASE("a fully degenerate landscape collapses to one maximal table") {
  const DiagonalSpectrum rho = spectrum_from_diagonal(vec({0.25, 0.25, 0.25, 0.25}));
  const DiagonalSpectrum theta = spectrum_from_diagonal(vec({0.3, 0.3, 0.3, 0.3}));
  std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  classify_tables(tables, rho, theta);
  REQUIRE(tables.size() == 1);
  CHECK(tables[0].overlaps == std::vector<int>{4});
  CHECK(tables[0].classification == TableClass::global_max);
  CHECK_FALSE(tables[0].tied_extreme);
}

TEST_CASE("a saddle whose value collides with an extreme is flagged") {
  // hand-built input: classification trusts the stored values, so a saddle
  // carrying the extreme's value must come back with the degeneracy warning
  const DiagonalSpectrum rho = test_support::spectrum_from_mults({1, 1, 1});
  const DiagonalSpectrum theta = test_support::spectrum_from_mults({1, 1, 1});
  std::vector<ContingencyTable> tables(3);
  tables[0].rows = tables[1].rows = tables[2].rows = 3;
  tables[0].cols = tables[1].cols = tables[2].cols = 3;
  tables[0].overlaps = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // aligned: 3*3+2*2+1*1 = 14
  tables[0].value = 14.0;
  tables[1].overlaps = {0, 0, 1, 0, 1, 0, 1, 0, 0};  // reversed: 3+4+3 = 10
  tables[1].value = 10.0;
  tables[2].overlaps = {0, 1, 0, 1, 0, 0, 0, 0, 1};  // saddle, value forged to tie the max
  tables[2].value = 14.0;
  classify_tables(tables, rho, theta);
  CHECK(tables[0].classification == TableClass::global_max);
  CHECK_FALSE(tables[0].tied_extreme);
  CHECK(tables[1].classification == TableClass::global_min);
  CHECK(tables[2].classification == TableClass::saddle);
  CHECK(tables[2].tied_extreme);
}

TEST_CASE("table json carries exactly the four documented fields") {
  const DiagonalSpectrum rho = spectrum_from_diagonal(vec({0, 0, 0, 1}));
  const DiagonalSpectrum theta = spectrum_from_diagonal(vec({0.5, 0.2, 0.2, 0.1}));
  std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  classify_tables(tables, rho, theta);
  const nlohmann::json j = table_to_json(tables[0]);
  CHECK(j.size() == 4);
  CHECK(j.at("class") == "max");
  CHECK(j.at("index") == 1);
  CHECK(j.at("value").get<double>() == doctest::Approx(0.5));
  CHECK(j.at("overlaps").size() == 3);
  CHECK(j.at("overlaps")[0] == nlohmann::json::array({1, 0}));
  CHECK(table_class_name(TableClass::saddle) == "saddle");
}

TEST_CASE("mismatched spectra dimensions are rejected") {
  const DiagonalSpectrum rho = spectrum_from_diagonal(vec({0.5, 0.5}));
  const DiagonalSpectrum theta = spectrum_from_diagonal(vec({0.6, 0.3, 0.1}));
  CHECK_THROWS_AS(enumerate_tables(rho, theta), std::invalid_argument);
}

TEST_CASE("table distance requires matching shapes") {
  const DiagonalSpectrum rho = spectrum_from_diagonal(vec({0, 0, 0, 1}));
  const DiagonalSpectrum theta = spectrum_from_diagonal(vec({0.5, 0.2, 0.2, 0.1}));
  const std::vector<ContingencyTable> tables = enumerate_tables(rho, theta);
  ContingencyTable other;
  other.rows = 2;
  other.cols = 2;
  other.overlaps = {1, 0, 0, 1};
  CHECK_THROWS_AS(table_distance(tables[0], other), std::invalid_argument);
}
