#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qcl/topology.hpp"

namespace qcl {

// Singular values of the blocks of a unitary partitioned by the theta
// multiplicities (row groups, sizes b_j) and rho0 multiplicities (column
// groups, sizes a_k), in the canonical frame where both operators are sorted
// descending.  Block (j,k) has min(b_j, a_k) values, sorted descending.
struct BlockSingularValues {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<double>> sigma;  // row-major

  const std::vector<double>& at(int j, int k) const {
    return sigma[static_cast<std::size_t>(j) * cols + k];
  }
};

// Computes the per-block singular values.  The input must be unitary within
// 1e-8 (max |U U^dag - I| entrywise), else std::invalid_argument.  Vector
// blocks (min dimension 1) take their Euclidean norm directly; larger blocks
// go through an SVD without forming singular vectors.
BlockSingularValues block_singular_values(const Eigen::MatrixXcd& unitary,
                                          const DiagonalSpectrum& rho,
                                          const DiagonalSpectrum& theta);

// Squared Frobenius distance from U to the critical submanifold encoded by
// the table:
//   D = 2 sum_jk sum_{l < c_jk} (1 - sigma_jkl)
// For unitary input this equals the residual form
//   sum_jk [ sum_{l < c_jk} (1 - sigma_jkl)^2 + sum_{l >= c_jk} sigma_jkl^2 ],
// and lies in [0, 2N].  Throws std::invalid_argument when some c_jk exceeds
// min(b_j, a_k) (corrupted table) or shapes disagree.
double critical_distance(const BlockSingularValues& blocks, const ContingencyTable& table);

// one distance per table, in table order
std::vector<double> all_distances(const BlockSingularValues& blocks,
                                  const std::vector<ContingencyTable>& tables);

// Stable argsort of a diagonal, descending: result[i] = original index of the
// i-th largest entry.  Used to bring a physical-frame U_T into the canonical
// sorted frame: U'(i,j) = U(theta_order[i], rho_order[j]).
std::vector<int> descending_order(const Eigen::VectorXd& diag);

Eigen::MatrixXcd to_sorted_frame(const Eigen::MatrixXcd& unitary,
                                 const std::vector<int>& theta_order,
                                 const std::vector<int>& rho_order);

}  // namespace qcl
