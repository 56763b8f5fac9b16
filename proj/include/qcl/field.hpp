#pragma once

#include <Eigen/Dense>

namespace qcl {

// Piecewise-constant control on [0, T].  values[l] (0-based) acts on the
// interval (l dt, (l+1) dt] and is conventionally sampled at the interval's
// right endpoint t = (l+1) dt; the grid never includes t = 0.
struct ControlField {
  Eigen::VectorXd values;
  double total_time = 0.0;

  int n_intervals() const { return static_cast<int>(values.size()); }
  double dt() const { return total_time / static_cast<double>(values.size()); }
};

// discrete fluence  sum_l values[l]^2 dt
double fluence(const ControlField& field);

}  // namespace qcl
