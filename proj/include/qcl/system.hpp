#pragma once

#include <Eigen/Dense>
#include <utility>

namespace qcl {

enum class SystemKind { rotor, oscillator };

// Field-free N-level system plus dipole coupling.  The Hamiltonian at field
// value eps is H(eps) = diag(h0) - eps * mu, with hbar = 1 throughout.
//
// The dipole is real symmetric with zero diagonal and geometrically decaying
// off-diagonal strength, mu(j,k) = d^{|j-k|} / d, so nearest neighbours couple
// with unit strength and remote transitions are suppressed by powers of d.
struct SystemModel {
  SystemKind kind = SystemKind::rotor;
  int n_levels = 0;
  double dipole_d = 0.0;
  Eigen::VectorXd h0;   // drift eigenvalues, length n_levels
  Eigen::MatrixXd mu;   // n_levels x n_levels
};

// linear rotor: h0[j] = j (j + 1)
SystemModel build_rotor(int n_levels, double dipole_d);

// weakly anharmonic oscillator: h0[j] = kappa (j + 1/2) - (kappa^2 / lambda)(j + 1/2)^2
// with kappa = 2, lambda = 320; level spacing shrinks slowly with j.
SystemModel build_oscillator(int n_levels, double dipole_d);

// smallest and largest |h0[j] - h0[k]| over all pairs j != k;
// throws std::invalid_argument if any two levels are degenerate
std::pair<double, double> transition_frequency_range(const SystemModel& model);

}  // namespace qcl
