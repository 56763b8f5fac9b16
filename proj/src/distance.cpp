#include "qcl/distance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qcl {

std::vector<int> descending_order(const Eigen::VectorXd& diag) {
  std::vector<int> order(diag.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return diag[a] > diag[b]; });
  return order;
}

Eigen::MatrixXcd to_sorted_frame(const Eigen::MatrixXcd& unitary,
                                 const std::vector<int>& theta_order,
                                 const std::vector<int>& rho_order) {
  const int n = static_cast<int>(unitary.rows());
  if (unitary.cols() != n || static_cast<int>(theta_order.size()) != n ||
      static_cast<int>(rho_order.size()) != n)
    throw std::invalid_argument("to_sorted_frame: dimension mismatch");
  Eigen::MatrixXcd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = unitary(theta_order[i], rho_order[j]);
  return out;
}

BlockSingularValues block_singular_values(const Eigen::MatrixXcd& unitary,
                                          const DiagonalSpectrum& rho,
                                          const DiagonalSpectrum& theta) {
  rho.validate();
  theta.validate();
  const int n = rho.total_dimension();
  if (theta.total_dimension() != n)
    throw std::invalid_argument("block_singular_values: spectra live in different dimensions");
  if (unitary.rows() != n || unitary.cols() != n)
    throw std::invalid_argument("block_singular_values: unitary does not match the spectra");
  const double defect =
      (unitary * unitary.adjoint() - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (defect > 1e-8)
    throw std::invalid_argument("block_singular_values: input is not unitary (defect " +
                                std::to_string(defect) + ")");

  const int q = theta.distinct();
  const int r = rho.distinct();
  BlockSingularValues out;
  out.rows = q;
  out.cols = r;
  out.sigma.resize(static_cast<std::size_t>(q) * r);

  int row0 = 0;
  for (int j = 0; j < q; ++j) {
    const int b = theta.multiplicities[j];
    int col0 = 0;
    for (int k = 0; k < r; ++k) {
      const int a = rho.multiplicities[k];
      auto& sig = out.sigma[static_cast<std::size_t>(j) * r + k];
      if (b == 1 || a == 1) {
        // a vector block has a single singular value: its Euclidean norm
        sig.assign(1, unitary.block(row0, col0, b, a).norm());
      } else {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(unitary.block(row0, col0, b, a));
        const auto& s = svd.singularValues();
        sig.assign(s.data(), s.data() + s.size());
      }
      col0 += a;
    }
    row0 += b;
  }
  return out;
}

double critical_distance(const BlockSingularValues& blocks, const ContingencyTable& table) {
  if (table.rows != blocks.rows || table.cols != blocks.cols)
    throw std::invalid_argument("critical_distance: table and blocks have different shapes");
  double d = 0.0;
  for (int j = 0; j < table.rows; ++j)
    for (int k = 0; k < table.cols; ++k) {
      const int c = table.at(j, k);
      const auto& sig = blocks.at(j, k);
      if (c < 0 || c > static_cast<int>(sig.size()))
        throw std::invalid_argument("critical_distance: overlap entry exceeds block rank (corrupted table)");
      for (int l = 0; l < c; ++l) d += 2.0 * (1.0 - sig[l]);
    }
  return d;
}

std::vector<double> all_distances(const BlockSingularValues& blocks,
                                  const std::vector<ContingencyTable>& tables) {
  std::vector<double> out;
  out.reserve(tables.size());
  for (const auto& t : tables) out.push_back(critical_distance(blocks, t));
  return out;
}

}  // namespace qcl
