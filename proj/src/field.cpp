#include "qcl/field.hpp"

#include <stdexcept>

namespace qcl {

double fluence(const ControlField& field) {
  if (field.n_intervals() < 1) throw std::invalid_argument("fluence: empty field");
  if (!(field.total_time > 0.0)) throw std::invalid_argument("fluence: total_time must be positive");
  return field.values.squaredNorm() * field.dt();
}

}  // namespace qcl
