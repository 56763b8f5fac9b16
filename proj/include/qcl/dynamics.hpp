#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "qcl/field.hpp"
#include "qcl/system.hpp"

namespace qcl {

// Result of propagating one piecewise-constant field.
//
// step_unitaries_cumulative[l] = U(t_{l+1}) = U_l ... U_1 U_0, the ordered
// product of the interval propagators U_l = exp(-i (diag(h0) - eps_l mu) dt);
// final_unitary = U(T) is the last of them.
//
// Each interval Hamiltonian is real symmetric, so its propagator comes from a
// real eigendecomposition H_l = V_l diag(lambda_l) V_l^T.  The decompositions
// and the projections P_l = V_l^T U(t_l) (with U(t_0) = I) fall out of the
// propagation loop and are kept because the gradient reuses all of them.
struct PropagationResult {
  std::vector<Eigen::MatrixXcd> step_unitaries_cumulative;
  Eigen::MatrixXcd final_unitary;
  std::vector<Eigen::MatrixXd> step_eigenvectors;
  std::vector<Eigen::VectorXd> step_eigenvalues;
  std::vector<Eigen::MatrixXcd> step_projections;
};

PropagationResult propagate(const SystemModel& model, const ControlField& field);

// J = Tr(U rho0 U^dag theta) for diagonal operators given as vectors of their
// diagonal entries (any order).  rho0 must be a probability vector: entries
// nonnegative and summing to one within 1e-12, else std::invalid_argument.
double objective(const Eigen::MatrixXcd& final_unitary, const Eigen::VectorXd& rho0,
                 const Eigen::VectorXd& theta);

// Exact partials dJ/d eps_l of objective(propagate(model, field)) with respect
// to each interval value, computed from the cached eigensystems through the
// divided-difference kernel of the matrix exponential.  Agrees with central
// finite differences of the discrete map to ~1e-9 relative, and approaches
// dt * 2 Im Tr[U_T^dag theta U_T rho0 U^dag(t) mu U(t)] as dt -> 0.
Eigen::VectorXd gradient(const PropagationResult& propagation, const SystemModel& model,
                         const Eigen::VectorXd& rho0, const Eigen::VectorXd& theta, double dt);

// Fused propagate + objective + gradient with preallocated workspace.  One
// instance is built per search and evaluated once per integrator stage; for
// small fixed N it dispatches to compile-time-sized kernels.
class ObjectiveEvaluator {
 public:
  ObjectiveEvaluator(const SystemModel& model, const Eigen::VectorXd& rho0,
                     const Eigen::VectorXd& theta, double total_time, int n_intervals);
  ~ObjectiveEvaluator();
  ObjectiveEvaluator(ObjectiveEvaluator&&) noexcept;
  ObjectiveEvaluator& operator=(ObjectiveEvaluator&&) noexcept;

  // returns J and fills gradient_out (resized to n_intervals)
  double eval(const Eigen::VectorXd& field_values, Eigen::VectorXd& gradient_out);

  // U(T) of the most recent eval
  const Eigen::MatrixXcd& final_unitary() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qcl
