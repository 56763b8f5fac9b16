#include "qcl/dynamics.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace qcl {

namespace {

using Cplx = std::complex<double>;

// Divided-difference kernel of the interval propagator: with w = dt (la - lb) / 2,
//   T = e^{iw} sinc(w) = [sin 2w + i (1 - cos 2w)] / (2w),
// where e^{2iw} = conj(phase_a) phase_b is a product of already-computed step
// phases, so no further trig is needed; series below |2w| = 1e-4.
inline Cplx exp_dd_kernel(Cplx pa, Cplx pb, double q /* = 2w */) {
  if (std::abs(q) < 1e-4) {
    const double w = 0.5 * q;
    return {1.0 - (2.0 / 3.0) * w * w, w * (1.0 - w * w / 3.0)};
  }
  const Cplx e2 = std::conj(pa) * pb;
  return {e2.imag() / q, (1.0 - e2.real()) / q};
}

void check_operator_sizes(int n, const Eigen::VectorXd& rho0, const Eigen::VectorXd& theta,
                          const char* where) {
  if (rho0.size() != n || theta.size() != n)
    throw std::invalid_argument(std::string(where) + ": operator dimensions do not match");
}

void check_probability_vector(const Eigen::VectorXd& rho0, const char* where) {
  if ((rho0.array() < -1e-12).any())
    throw std::invalid_argument(std::string(where) + ": rho0 has a negative eigenvalue");
  if (std::abs(rho0.sum() - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(where) + ": rho0 is not trace one");
}

}  // namespace

PropagationResult propagate(const SystemModel& model, const ControlField& field) {
  const int n = model.n_levels;
  const int n_steps = field.n_intervals();
  if (n < 2 || model.h0.size() != n || model.mu.rows() != n || model.mu.cols() != n)
    throw std::invalid_argument("propagate: malformed system model");
  if (n_steps < 1) throw std::invalid_argument("propagate: field has no intervals");
  if (!(field.total_time > 0.0)) throw std::invalid_argument("propagate: total_time must be positive");
  const double dt = field.dt();

  PropagationResult out;
  out.step_unitaries_cumulative.resize(n_steps);
  out.step_eigenvectors.resize(n_steps);
  out.step_eigenvalues.resize(n_steps);
  out.step_projections.resize(n_steps);

  Eigen::MatrixXd h(n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  Eigen::MatrixXcd cumulative = Eigen::MatrixXcd::Identity(n, n);
  Eigen::VectorXcd step_phases(n);

  for (int l = 0; l < n_steps; ++l) {
    h = -field.values[l] * model.mu;
    h.diagonal() += model.h0;
    es.compute(h);
    const Eigen::MatrixXd& v = es.eigenvectors();
    const Eigen::VectorXd& lam = es.eigenvalues();
    for (int a = 0; a < n; ++a) step_phases[a] = std::polar(1.0, -dt * lam[a]);

    out.step_eigenvectors[l] = v;
    out.step_eigenvalues[l] = lam;
    out.step_projections[l].noalias() = v.transpose() * cumulative;
    cumulative.noalias() = v * (step_phases.asDiagonal() * out.step_projections[l]);
    out.step_unitaries_cumulative[l] = cumulative;
  }
  out.final_unitary = cumulative;
  return out;
}

double objective(const Eigen::MatrixXcd& final_unitary, const Eigen::VectorXd& rho0,
                 const Eigen::VectorXd& theta) {
  const int n = static_cast<int>(final_unitary.rows());
  if (final_unitary.cols() != n) throw std::invalid_argument("objective: unitary is not square");
  check_operator_sizes(n, rho0, theta, "objective");
  check_probability_vector(rho0, "objective");

  double j = 0.0;
  for (int row = 0; row < n; ++row) {
    double population = 0.0;  // (U rho0 U^dag)_{row,row}
    for (int col = 0; col < n; ++col) population += std::norm(final_unitary(row, col)) * rho0[col];
    j += theta[row] * population;
  }
  return j;
}

Eigen::VectorXd gradient(const PropagationResult& propagation, const SystemModel& model,
                         const Eigen::VectorXd& rho0, const Eigen::VectorXd& theta, double dt) {
  const int n = model.n_levels;
  const int n_steps = static_cast<int>(propagation.step_projections.size());
  if (n_steps < 1 || propagation.final_unitary.rows() != n ||
      propagation.step_eigenvectors.size() != static_cast<std::size_t>(n_steps) ||
      propagation.step_eigenvalues.size() != static_cast<std::size_t>(n_steps))
    throw std::invalid_argument("gradient: propagation does not match the model/grid");
  if (!(dt > 0.0)) throw std::invalid_argument("gradient: dt must be positive");
  check_operator_sizes(n, rho0, theta, "gradient");
  check_probability_vector(rho0, "gradient");

  const Eigen::MatrixXcd& u_final = propagation.final_unitary;
  // K = rho0 U_T^dag theta U_T  (diagonal operators as row scalings)
  Eigen::MatrixXcd k = u_final.adjoint() * (theta.asDiagonal() * u_final);
  k = rho0.asDiagonal() * k;

  Eigen::VectorXd grad(n_steps);
  Eigen::MatrixXd mv(n, n), w(n, n);
  Eigen::MatrixXcd y(n, n), z(n, n);
  Eigen::VectorXcd phases(n);

  for (int l = 0; l < n_steps; ++l) {
    const Eigen::MatrixXd& v = propagation.step_eigenvectors[l];
    const Eigen::VectorXd& lam = propagation.step_eigenvalues[l];
    const Eigen::MatrixXcd& p = propagation.step_projections[l];
    for (int a = 0; a < n; ++a) phases[a] = std::polar(1.0, -dt * lam[a]);

    mv.noalias() = model.mu * v;
    w.noalias() = v.transpose() * mv;
    y.noalias() = p * k;
    z.noalias() = y * p.adjoint();

    // Im of sum_ab T_ab W_ab Z_ba with T Hermitian and W real symmetric
    double acc_im = 0.0;
    for (int a = 0; a < n; ++a) {
      acc_im += w(a, a) * z(a, a).imag();
      for (int b = a + 1; b < n; ++b) {
        const Cplx t = exp_dd_kernel(phases[a], phases[b], dt * (lam[a] - lam[b]));
        const Cplx zba = z(b, a);
        const Cplx zab = z(a, b);
        acc_im += w(a, b) * (t.real() * (zba.imag() + zab.imag()) +
                             t.imag() * (zba.real() - zab.real()));
      }
    }
    grad[l] = -2.0 * dt * acc_im;
  }
  return grad;
}

// ---- fused evaluator ----

namespace {

struct KernelBase {
  virtual ~KernelBase() = default;
  virtual double eval(const Eigen::VectorXd& eps, Eigen::VectorXd& grad) = 0;
  virtual const Eigen::MatrixXcd& final_unitary() const = 0;
};

// One propagation + gradient sweep with everything preallocated.  NS is the
// compile-time dimension (Eigen::Dynamic as fallback); small systems spend
// most of their time in 8x8 products, which fixed sizes roughly halve.
template <int NS>
struct Kernel final : KernelBase {
  using RMat = Eigen::Matrix<double, NS, NS>;
  using RVec = Eigen::Matrix<double, NS, 1>;
  using CMat = Eigen::Matrix<Cplx, NS, NS>;
  using CVec = Eigen::Matrix<Cplx, NS, 1>;

  int n = 0;
  int n_steps = 0;
  double dt = 0.0;
  RVec h0;
  RMat mu;
  Eigen::VectorXd rho, theta;

  std::vector<RMat> v;
  std::vector<RVec> lam;
  std::vector<CMat> p;
  std::vector<CVec> phases;
  RMat h_scratch, mv, w;
  CMat a, k, y, z;
  Eigen::MatrixXcd u_final;  // dynamic so final_unitary() has one type
  Eigen::SelfAdjointEigenSolver<RMat> es;

  Kernel(const SystemModel& model, const Eigen::VectorXd& rho0, const Eigen::VectorXd& th,
         double total_time, int steps)
      : n(model.n_levels), n_steps(steps), dt(total_time / steps), rho(rho0), theta(th) {
    h0 = model.h0;
    mu = model.mu;
    v.resize(n_steps);
    lam.resize(n_steps);
    p.resize(n_steps);
    phases.resize(n_steps);
    if constexpr (NS == Eigen::Dynamic) {
      for (int l = 0; l < n_steps; ++l) {
        v[l].resize(n, n);
        lam[l].resize(n);
        p[l].resize(n, n);
        phases[l].resize(n);
      }
      h_scratch.resize(n, n);
      mv.resize(n, n);
      w.resize(n, n);
      a.resize(n, n);
      k.resize(n, n);
      y.resize(n, n);
      z.resize(n, n);
    }
    u_final.resize(n, n);
  }

  double eval(const Eigen::VectorXd& eps, Eigen::VectorXd& grad) override {
    grad.resize(n_steps);

    a.setIdentity();
    for (int l = 0; l < n_steps; ++l) {
      h_scratch = -eps[l] * mu;
      h_scratch.diagonal() += h0;
      es.compute(h_scratch);
      v[l] = es.eigenvectors();
      lam[l] = es.eigenvalues();
      for (int i = 0; i < n; ++i) phases[l][i] = std::polar(1.0, -dt * lam[l][i]);
      p[l].noalias() = v[l].transpose() * a;
      a.noalias() = v[l] * (phases[l].asDiagonal() * p[l]);
    }
    u_final = a;

    double j = 0.0;
    for (int row = 0; row < n; ++row) {
      double population = 0.0;
      for (int col = 0; col < n; ++col) population += std::norm(a(row, col)) * rho[col];
      j += theta[row] * population;
    }

    // K = rho0 U_T^dag theta U_T
    for (int row = 0; row < n; ++row) y.row(row) = theta[row] * a.row(row);
    k.noalias() = a.adjoint() * y;
    for (int row = 0; row < n; ++row) k.row(row) *= rho[row];

    for (int l = 0; l < n_steps; ++l) {
      mv.noalias() = mu * v[l];
      w.noalias() = v[l].transpose() * mv;
      y.noalias() = p[l] * k;
      z.noalias() = y * p[l].adjoint();

      double acc_im = 0.0;
      for (int ia = 0; ia < n; ++ia) {
        acc_im += w(ia, ia) * z(ia, ia).imag();
        for (int ib = ia + 1; ib < n; ++ib) {
          const Cplx t = exp_dd_kernel(phases[l][ia], phases[l][ib], dt * (lam[l][ia] - lam[l][ib]));
          const Cplx zba = z(ib, ia);
          const Cplx zab = z(ia, ib);
          acc_im += w(ia, ib) * (t.real() * (zba.imag() + zab.imag()) +
                                 t.imag() * (zba.real() - zab.real()));
        }
      }
      grad[l] = -2.0 * dt * acc_im;
    }
    return j;
  }

  const Eigen::MatrixXcd& final_unitary() const override { return u_final; }
};

std::unique_ptr<KernelBase> make_kernel(const SystemModel& model, const Eigen::VectorXd& rho0,
                                        const Eigen::VectorXd& theta, double total_time,
                                        int n_intervals) {
  switch (model.n_levels) {
    case 2: return std::make_unique<Kernel<2>>(model, rho0, theta, total_time, n_intervals);
    case 4: return std::make_unique<Kernel<4>>(model, rho0, theta, total_time, n_intervals);
    case 8: return std::make_unique<Kernel<8>>(model, rho0, theta, total_time, n_intervals);
    default:
      return std::make_unique<Kernel<Eigen::Dynamic>>(model, rho0, theta, total_time, n_intervals);
  }
}

}  // namespace

struct ObjectiveEvaluator::Impl {
  std::unique_ptr<KernelBase> kernel;
};

ObjectiveEvaluator::ObjectiveEvaluator(const SystemModel& model, const Eigen::VectorXd& rho0,
                                       const Eigen::VectorXd& theta, double total_time,
                                       int n_intervals)
    : impl_(std::make_unique<Impl>()) {
  const int n = model.n_levels;
  if (n < 2 || model.h0.size() != n || model.mu.rows() != n || model.mu.cols() != n)
    throw std::invalid_argument("ObjectiveEvaluator: malformed system model");
  if (n_intervals < 1) throw std::invalid_argument("ObjectiveEvaluator: need at least one interval");
  if (!(total_time > 0.0)) throw std::invalid_argument("ObjectiveEvaluator: total_time must be positive");
  check_operator_sizes(n, rho0, theta, "ObjectiveEvaluator");
  check_probability_vector(rho0, "ObjectiveEvaluator");
  impl_->kernel = make_kernel(model, rho0, theta, total_time, n_intervals);
}

ObjectiveEvaluator::~ObjectiveEvaluator() = default;
ObjectiveEvaluator::ObjectiveEvaluator(ObjectiveEvaluator&&) noexcept = default;
ObjectiveEvaluator& ObjectiveEvaluator::operator=(ObjectiveEvaluator&&) noexcept = default;

double ObjectiveEvaluator::eval(const Eigen::VectorXd& field_values, Eigen::VectorXd& gradient_out) {
  return impl_->kernel->eval(field_values, gradient_out);
}

const Eigen::MatrixXcd& ObjectiveEvaluator::final_unitary() const {
  return impl_->kernel->final_unitary();
}

}  // namespace qcl
