// dynamics.hpp: GKSL generator evaluation, vectorized Liouvillian, stationary analysis, integration.
#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qstab/core.hpp"
#include "qstab/errors.hpp"

namespace qstab {

// rho_dot = -i[H, rho] + sum_c ( L_c rho L_c^H - 1/2 {L_c^H L_c, rho} ).
inline Matrix apply_generator_raw(const Matrix& h, const std::vector<Matrix>& channels, const Matrix& rho) {
  detail::require_square(rho, "apply_generator");
  if (h.rows() != rho.rows() || h.cols() != rho.cols())
    throw DimensionMismatch("Hamiltonian shape does not match the state");
  Matrix out = Complex(0.0, -1.0) * (h * rho - rho * h);
  for (const Matrix& l : channels) {
    if (l.rows() != rho.rows() || l.cols() != rho.cols())
      throw DimensionMismatch("channel shape does not match the state");
    const Matrix ll = l.adjoint() * l;
    out += l * rho * l.adjoint() - 0.5 * (ll * rho + rho * ll);
  }
  return out;
}

inline Matrix apply_generator_raw(const Matrix& h, const Matrix& l, const Matrix& rho) {
  return apply_generator_raw(h, std::vector<Matrix>{l}, rho);
}

inline HermitianMatrix apply_generator(const LindbladPair& pair, const DensityMatrix& rho) {
  const Matrix out = apply_generator_raw(pair.hamiltonian.mat(), pair.lindblad.mat(), rho.mat());
  return HermitianMatrix(out, 1e-12);
}

// Kernel membership cut on descending singular values: entries below tol * sigma_max
// (plus an absolute floor so the zero matrix keeps its full kernel).
struct KernelCut {
  Index count = 0;        // singular values classified as kernel
  double boundary_ratio;  // sigma just above the cut over sigma just below; inf when clean
};

inline KernelCut kernel_cut(const RealVector& singular_descending, double tol) {
  const Index n = singular_descending.size();
  if (n == 0) throw DimensionMismatch("empty singular value list");
  const double cut = tol * singular_descending[0] + 1e-300;
  Index count = 0;
  while (count < n && singular_descending[n - 1 - count] < cut) ++count;
  KernelCut out;
  out.count = count;
  out.boundary_ratio = std::numeric_limits<double>::infinity();
  if (count > 0 && count < n) {
    const double top_of_kernel = singular_descending[n - count];
    const double bottom_of_rest = singular_descending[n - count - 1];
    out.boundary_ratio = top_of_kernel == 0.0 ? std::numeric_limits<double>::infinity()
                                              : bottom_of_rest / top_of_kernel;
  }
  return out;
}

// Vectorized generator, column-stacking convention: vec(A X B) = (B^T (x) A) vec(X).
struct Liouvillian {
  Index dim = 0;  // N^2
  Matrix matrix;
  CVector eigenvalues;
  std::vector<Matrix> kernel_basis;      // N x N matrices spanning the null space (default cut)
  RealVector singular_values;            // descending
  Matrix right_singular_vectors;         // columns match singular_values
};

inline Liouvillian build_liouvillian(const Matrix& h, const std::vector<Matrix>& channels,
                                     double kernel_tol = 1e-9) {
  detail::require_square(h, "build_liouvillian");
  const Index n = h.rows();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix super = Complex(0.0, -1.0) * (kron(eye, h) - kron(h.transpose(), eye));
  for (const Matrix& l : channels) {
    if (l.rows() != n || l.cols() != n) throw DimensionMismatch("channel dimension mismatch");
    const Matrix ll = l.adjoint() * l;
    super += kron(l.conjugate(), l) - 0.5 * kron(eye, ll) - 0.5 * kron(ll.transpose(), eye);
  }

  Liouvillian out;
  out.dim = n * n;
  out.matrix = std::move(super);

  Eigen::ComplexEigenSolver<Matrix> es(out.matrix, false);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("Liouvillian eigendecomposition failed");
  out.eigenvalues = es.eigenvalues();

  Eigen::JacobiSVD<Matrix> svd(out.matrix, Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  out.right_singular_vectors = svd.matrixV();

  const KernelCut cut = kernel_cut(out.singular_values, kernel_tol);
  for (Index k = 0; k < cut.count; ++k)
    out.kernel_basis.push_back(unvec(out.right_singular_vectors.col(out.dim - 1 - k), n));
  return out;
}

inline Liouvillian build_liouvillian(const LindbladPair& pair, double kernel_tol = 1e-9) {
  return build_liouvillian(pair.hamiltonian.mat(), {pair.lindblad.mat()}, kernel_tol);
}

struct StationaryAnalysis {
  std::vector<Matrix> kernel;
  bool unique = false;
  std::optional<DensityMatrix> steady;  // present exactly when unique
};

inline StationaryAnalysis stationary_states(const Liouvillian& liou, double tol = 1e-9) {
  const KernelCut cut = kernel_cut(liou.singular_values, tol);
  if (cut.count == 0)
    throw IllConditionedKernel("no singular value below the kernel tolerance");
  if (cut.boundary_ratio < 10.0) {
    std::ostringstream msg;
    msg << "kernel boundary ratio " << cut.boundary_ratio << " < 10: cut at " << cut.count
        << " is ambiguous";
    throw IllConditionedKernel(msg.str());
  }
  const Index n = static_cast<Index>(std::llround(std::sqrt(double(liou.dim))));
  StationaryAnalysis out;
  for (Index k = 0; k < cut.count; ++k)
    out.kernel.push_back(unvec(liou.right_singular_vectors.col(liou.dim - 1 - k), n));
  out.unique = cut.count == 1;
  if (out.unique) {
    Matrix x = out.kernel.front();
    const Complex tr = x.trace();
    if (std::abs(tr) < 1e-12)
      throw IllConditionedKernel("kernel element is traceless; cannot normalize to a state");
    x /= tr;
    x = 0.5 * (x + x.adjoint()).eval();
    out.steady = validate_density(x, 1e-8);
  }
  return out;
}

// Decay rate of the slowest non-stationary mode: -max{Re(lambda) : Re(lambda) <= -1e-10}.
// Zero when nothing decays (peripheral-only spectrum).
inline double spectral_gap(const Liouvillian& liou) {
  double max_negative = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < liou.eigenvalues.size(); ++k) {
    const double re = liou.eigenvalues[k].real();
    if (re <= -1e-10) max_negative = std::max(max_negative, re);
  }
  return std::isfinite(max_negative) ? -max_negative : 0.0;
}

struct SimulationTrace {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::vector<double> distances;  // trace distance to the reference target; empty if none given
};

// Conservative spectral-norm bound on the generator, used for the default step size.
inline double generator_norm_bound(const Matrix& h, const std::vector<Matrix>& channels) {
  double bound = 2.0 * h.norm();
  for (const Matrix& l : channels) bound += 2.0 * l.norm() * l.norm();
  return bound;
}

inline SimulationTrace integrate_channels(const Matrix& h, const std::vector<Matrix>& channels,
                                          const DensityMatrix& rho0, double horizon, double dt,
                                          const DensityMatrix* target = nullptr,
                                          Index max_points = 1001) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon >= dt)) throw std::invalid_argument("horizon must be at least dt");
  if (max_points < 2) throw std::invalid_argument("need at least two recorded points");

  const auto flow = [&](const Matrix& x) { return apply_generator_raw(h, channels, x); };

  const long long steps = static_cast<long long>(std::ceil(horizon / dt - 1e-12));
  const long long stride = std::max(1ll, (steps + max_points - 2) / (max_points - 1));

  SimulationTrace trace;
  const auto record = [&](double t, const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -1e-6) {
      std::ostringstream msg;
      msg << "state eigenvalue " << min_eig << " below -1e-6 at t = " << t
          << "; reduce the step size";
      throw StepRejected(msg.str());
    }
    trace.times.push_back(t);
    trace.states.push_back(validate_density(m, 1e-6));
    if (target) trace.distances.push_back(trace_distance(trace.states.back().mat(), target->mat()));
  };

  Matrix rho = rho0.mat();
  record(0.0, rho);
  double t = 0.0;
  for (long long step = 1; step <= steps; ++step) {
    const double step_dt = std::min(dt, horizon - t);
    const Matrix k1 = flow(rho);
    const Matrix k2 = flow(rho + 0.5 * step_dt * k1);
    const Matrix k3 = flow(rho + 0.5 * step_dt * k2);
    const Matrix k4 = flow(rho + step_dt * k3);
    rho += (step_dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho = 0.5 * (rho + rho.adjoint()).eval();          // exact Hermiticity
    rho /= rho.trace().real();                         // exact unit trace
    t = step == steps ? horizon : t + step_dt;

    for (Index d = 0; d < rho.rows(); ++d)
      if (rho(d, d).real() < -1e-6) {
        std::ostringstream msg;
        msg << "population " << rho(d, d).real() << " below -1e-6 at t = " << t
            << "; reduce the step size";
        throw StepRejected(msg.str());
      }
    if (step % stride == 0 || step == steps) record(t, rho);
  }
  return trace;
}

inline SimulationTrace integrate(const LindbladPair& pair, const DensityMatrix& rho0, double horizon,
                                 double dt, const DensityMatrix* target = nullptr,
                                 Index max_points = 1001) {
  if (pair.dim() != rho0.dim()) throw DimensionMismatch("pair and state dimensions differ");
  return integrate_channels(pair.hamiltonian.mat(), {pair.lindblad.mat()}, rho0, horizon, dt, target,
                            max_points);
}

inline double default_step(const LindbladPair& pair, double horizon) {
  const double bound = generator_norm_bound(pair.hamiltonian.mat(), {pair.lindblad.mat()});
  return bound > 0.0 ? 0.01 / bound : horizon / 100.0;
}

inline SimulationTrace integrate(const LindbladPair& pair, const DensityMatrix& rho0, double horizon,
                                 const DensityMatrix* target = nullptr, Index max_points = 1001) {
  return integrate(pair, rho0, horizon, default_step(pair, horizon), target, max_points);
}

}  // namespace qstab
