#include "qcl/system.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace qcl {

namespace {

// shared layout: diagonal drift + geometric dipole
SystemModel assemble(SystemKind kind, int n_levels, double dipole_d, Eigen::VectorXd h0) {
  if (n_levels < 2) throw std::invalid_argument("system needs at least two levels");
  if (!(dipole_d > 0.0)) throw std::invalid_argument("dipole parameter d must be positive");

  SystemModel model;
  model.kind = kind;
  model.n_levels = n_levels;
  model.dipole_d = dipole_d;
  model.h0 = std::move(h0);
  model.mu = Eigen::MatrixXd::Zero(n_levels, n_levels);
  for (int j = 0; j < n_levels; ++j)
    for (int k = 0; k < n_levels; ++k)
      if (j != k) model.mu(j, k) = std::pow(dipole_d, std::abs(j - k)) / dipole_d;
  return model;
}

}  // namespace

SystemModel build_rotor(int n_levels, double dipole_d) {
  Eigen::VectorXd h0(n_levels < 0 ? 0 : n_levels);
  for (int j = 0; j < n_levels; ++j) h0[j] = static_cast<double>(j) * (j + 1);
  return assemble(SystemKind::rotor, n_levels, dipole_d, std::move(h0));
}

SystemModel build_oscillator(int n_levels, double dipole_d) {
  constexpr double kappa = 2.0;
  constexpr double lambda = 320.0;
  Eigen::VectorXd h0(n_levels < 0 ? 0 : n_levels);
  for (int j = 0; j < n_levels; ++j) {
    const double half = j + 0.5;
    h0[j] = kappa * half - (kappa * kappa / lambda) * half * half;
  }
  return assemble(SystemKind::oscillator, n_levels, dipole_d, std::move(h0));
}

std::pair<double, double> transition_frequency_range(const SystemModel& model) {
  const int n = model.n_levels;
  if (n < 2) throw std::invalid_argument("transition_frequency_range: need at least two levels");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) {
      const double w = std::abs(model.h0[j] - model.h0[k]);
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
  if (lo == 0.0)
    throw std::invalid_argument("transition_frequency_range: degenerate drift levels");
  return {lo, hi};
}

}  // namespace qcl
