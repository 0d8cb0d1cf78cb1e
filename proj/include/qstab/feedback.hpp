// feedback.hpp: measurement-feedback synthesis stabilizing an encoded qubit state
// inside a noiseless subspace, plus the closed-loop master equation.
#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <utility>
#include <vector>

#include "qstab/core.hpp"
#include "qstab/dynamics.hpp"
#include "qstab/errors.hpp"
#include "qstab/synthesis.hpp"
#include "qstab/verify.hpp"

namespace qstab {

struct FeedbackSetup {
  HermitianMatrix drift;
  OperatorMatrix noise;
  HermitianMatrix measurement;
  HermitianMatrix feedback;
  HermitianMatrix control;
  BlockSplit split;
  double k_m = 0.0;
};

// The noise must act as a scalar on the encoded subspace and must not map it into the
// complement; returns that scalar.
inline Complex noise_eigenvalue(const OperatorMatrix& noise, const BlockSplit& split) {
  const BlockView blocks = block_view(noise.mat(), split);
  const Index ds = split.dim_s();
  const Complex lambda = blocks.s.trace() / static_cast<double>(ds);
  const double dev_s = (blocks.s - lambda * Matrix::Identity(ds, ds)).cwiseAbs().maxCoeff();
  const double dev_q = blocks.q.size() > 0 ? blocks.q.cwiseAbs().maxCoeff() : 0.0;
  if (dev_s > 1e-12 || dev_q > 1e-12) {
    std::ostringstream msg;
    msg << "noise operator is not scalar on the encoded subspace (deviation " << std::max(dev_s, dev_q)
        << ")";
    throw std::invalid_argument(msg.str());
  }
  return lambda;
}

inline FeedbackSetup make_setup(HermitianMatrix drift, OperatorMatrix noise, HermitianMatrix measurement,
                                BlockSplit split) {
  const Index n = split.basis().rows();
  if (drift.mat().rows() != n || noise.mat().rows() != n || measurement.mat().rows() != n)
    throw DimensionMismatch("setup operators must match the split dimension");
  if (split.dim_s() != 2) throw DimensionMismatch("encoded subspace must be two-dimensional");
  (void)noise_eigenvalue(noise, split);
  FeedbackSetup setup{std::move(drift),          std::move(noise), std::move(measurement),
                      HermitianMatrix::zero(n),  HermitianMatrix::zero(n),
                      std::move(split),          0.0};
  return setup;
}

// True iff the measurement connects the encoded subspace to its complement.
inline bool check_feedback_attractivity(const BlockSplit& split, const HermitianMatrix& m) {
  const Index n = split.basis().rows();
  Matrix proj = Matrix::Zero(n, n);
  proj.topLeftCorner(split.dim_s(), split.dim_s()) = Matrix::Identity(split.dim_s(), split.dim_s());
  proj = split.basis() * proj * split.basis().adjoint();
  const Matrix total = m.mat() + m.mat().adjoint();
  return commutator(proj, total).norm() > 1e-10;
}

// Closed-loop Hamiltonian: the measurement-feedback term is folded into the commutator.
inline Matrix fme_hamiltonian(const FeedbackSetup& setup) {
  const Matrix& f = setup.feedback.mat();
  const Matrix& m = setup.measurement.mat();
  return setup.drift.mat() + setup.control.mat() + 0.5 * (f * m + m * f);
}

inline std::vector<Matrix> fme_channels(const FeedbackSetup& setup) {
  return {setup.measurement.mat() - Complex(0.0, 1.0) * setup.feedback.mat(), setup.noise.mat()};
}

inline HermitianMatrix fme_generator(const FeedbackSetup& setup, const DensityMatrix& rho) {
  if (rho.dim() != setup.split.basis().rows())
    throw DimensionMismatch("state does not match the setup dimension");
  return HermitianMatrix(apply_generator_raw(fme_hamiltonian(setup), fme_channels(setup), rho.mat()),
                         1e-10);
}

// Places the qubit state on the encoded subspace of the full space.
inline DensityMatrix embed_target(const DensityMatrix& qubit, const BlockSplit& split) {
  if (qubit.dim() != split.dim_s()) throw DimensionMismatch("qubit state must match the subspace dimension");
  const Index n = split.basis().rows();
  Matrix padded = Matrix::Zero(n, n);
  padded.topLeftCorner(split.dim_s(), split.dim_s()) = qubit.mat();
  return validate_density(split.basis() * padded * split.basis().adjoint());
}

namespace detail {

// Descending eigendecomposition of a 2x2 density matrix; the basis is chosen so the
// measurement couples the encoded levels whenever the spectrum leaves a choice.
struct QubitFrame {
  double p1 = 0.0;
  double p2 = 0.0;
  Matrix basis;  // 2x2 unitary, columns are the target eigenvectors
};

inline QubitFrame qubit_frame(const DensityMatrix& qubit, const Matrix& m_s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(qubit.mat());
  if (es.info() != Eigen::Success) throw ConvergenceFailure("qubit eigendecomposition failed");
  QubitFrame frame;
  frame.p1 = es.eigenvalues()(1);
  frame.p2 = es.eigenvalues()(0);
  frame.basis = Matrix(2, 2);
  frame.basis.col(0) = es.eigenvectors().col(1);
  frame.basis.col(1) = es.eigenvectors().col(0);
  if (frame.p2 <= 1e-14) throw InvalidSpectrum("encoded target must have full rank on the subspace");

  // A degenerate target leaves the eigenbasis free; rotate to expose the measurement's
  // eigenvalue splitting as an off-diagonal coupling.
  const Complex coupling = (frame.basis.adjoint() * m_s * frame.basis)(0, 1);
  if (frame.p1 - frame.p2 <= 1e-12 && std::abs(coupling) <= 1e-12) {
    Eigen::SelfAdjointEigenSolver<Matrix> ms(m_s);
    if (ms.info() != Eigen::Success) throw ConvergenceFailure("measurement eigendecomposition failed");
    Matrix quarter(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    quarter << r, -r, r, r;
    frame.basis = ms.eigenvectors() * quarter;
  }
  return frame;
}

}  // namespace detail

inline FeedbackSetup synth_feedback(const DensityMatrix& target_qubit, const FeedbackSetup& setup) {
  const Index n = setup.split.basis().rows();
  if (setup.split.dim_s() != 2) throw DimensionMismatch("encoded subspace must be two-dimensional");
  if (target_qubit.dim() != 2) throw DimensionMismatch("target must be a qubit state");
  const Index dr = setup.split.dim_r();
  const Matrix& basis = setup.split.basis();
  const Complex lambda_s = noise_eigenvalue(setup.noise, setup.split);

  const Matrix m_split = basis.adjoint() * setup.measurement.mat() * basis;
  const detail::QubitFrame frame = detail::qubit_frame(target_qubit, m_split.topLeftCorner(2, 2));

  // Working frame: target diagonal descending and the coupling entry real non-negative.
  Matrix sub_frame = frame.basis;
  const Complex raw_coupling = (sub_frame.adjoint() * m_split.topLeftCorner(2, 2) * sub_frame)(0, 1);
  if (std::abs(raw_coupling) > 0.0)
    sub_frame.col(1) *= std::polar(1.0, -std::arg(raw_coupling));
  Matrix to_working = Matrix::Identity(n, n);
  to_working.topLeftCorner(2, 2) = sub_frame;

  const Matrix m_w = to_working.adjoint() * m_split * to_working;
  const Matrix l_w = to_working.adjoint() * (basis.adjoint() * setup.noise.mat() * basis) * to_working;
  const BlockSplit leading = BlockSplit::leading(n, 2);
  const BlockView m_blocks = block_view(m_w, leading);
  const BlockView l_blocks = block_view(l_w, leading);

  const double m3 = m_blocks.s(0, 1).real();
  const double m_p_norm = m_blocks.p.size() > 0 ? m_blocks.p.norm() : 0.0;
  const double l_p_norm = l_blocks.p.size() > 0 ? l_blocks.p.norm() : 0.0;
  if (std::abs(m3) <= 1e-12) {
    if (m_p_norm <= 1e-12 && l_p_norm <= 1e-12)
      throw MeasurementDecoupled("measurement and noise act trivially: no coupling into or inside the subspace");
    throw MeasurementDecoupled("measurement does not couple the encoded levels; perturb the target first");
  }

  const double s1 = std::sqrt(frame.p1);
  const double s2 = std::sqrt(frame.p2);
  const double k_m = 2.0 * m3 / (s1 + s2);

  // Feedback: diagonal entries stay zero, the subspace entry matches the ladder form,
  // and the coupling block turns the measurement into a one-way drain onto the subspace.
  Matrix f_w = Matrix::Zero(n, n);
  const Complex f3(0.0, 0.5 * k_m * (s1 - s2));
  f_w(0, 1) = f3;
  f_w(1, 0) = std::conj(f3);
  if (dr > 0) {
    f_w.topRightCorner(2, dr) = Complex(0.0, 1.0) * m_blocks.p;
    f_w.bottomLeftCorner(dr, 2) = f_w.topRightCorner(2, dr).adjoint();
  }
  const Matrix d_w = m_w - Complex(0.0, 1.0) * f_w;

  // Subspace Hamiltonian from the two-level synthesis of the scaled ladder channel.
  SynthesisConfig sub_cfg;
  sub_cfg.spectrum = RealVector(2);
  sub_cfg.spectrum << frame.p1, frame.p2;
  sub_cfg.a_diag = RealVector(2);
  sub_cfg.a_diag << m_blocks.s(0, 0).real() / k_m, m_blocks.s(1, 1).real() / k_m;
  const SynthesisResult sub_synth = synth_pair(sub_cfg);
  const Matrix h_s = (k_m * k_m) * sub_synth.pair.hamiltonian.mat();

  // Coupling block forced by stationarity of the embedded target.
  const Matrix d_p = dr > 0 ? Matrix(d_w.topRightCorner(2, dr)) : Matrix(2, 0);
  const Matrix h_p = Complex(0.0, -0.5) * (d_w.topLeftCorner(2, 2).adjoint() * d_p +
                                           std::conj(lambda_s) * Matrix(l_blocks.p));

  Matrix rho_embedded = Matrix::Zero(n, n);
  rho_embedded(0, 0) = frame.p1;
  rho_embedded(1, 1) = frame.p2;
  const DensityMatrix target_w = validate_density(rho_embedded);

  // The complement Hamiltonian is free; a scaled tridiagonal stirs the complement so no
  // stationary state can hide there. Certified numerically, retried with larger scales.
  const int attempts = dr > 0 ? 5 : 1;
  double scale = 1.0;
  Matrix h_w;
  bool certified = false;
  for (int attempt = 0; attempt < attempts && !certified; ++attempt, scale *= 3.0) {
    Matrix h_r = Matrix::Zero(dr, dr);
    for (Index i = 0; i < dr; ++i) {
      h_r(i, i) = scale * static_cast<double>(i + 1);
      if (i + 1 < dr) {
        h_r(i, i + 1) = scale;
        h_r(i + 1, i) = scale;
      }
    }
    BlockView control_blocks{h_s, h_p, h_p.adjoint(), h_r};
    h_w = assemble_blocks(leading, control_blocks);
    const Certificate cert = certify(target_w, h_w, {d_w, l_w});
    certified = cert.gas;
  }
  if (!certified)
    throw ConvergenceFailure("no scaling of the complement Hamiltonian removed all stray stationary states");

  // Transform back to the original basis and fold the feedback correction and the drift
  // into the control so the closed-loop Hamiltonian equals the designed one.
  const Matrix to_original = basis * to_working;
  const Matrix f_full = to_original * f_w * to_original.adjoint();
  const Matrix h_prime = to_original * h_w * to_original.adjoint();
  const Matrix& m_full = setup.measurement.mat();
  const Matrix h_c = h_prime - 0.5 * (f_full * m_full + m_full * f_full) - setup.drift.mat();

  FeedbackSetup result = setup;
  result.feedback = HermitianMatrix(f_full);
  result.control = HermitianMatrix(h_c);
  result.k_m = k_m;
  return result;
}

struct PracticalStabilization {
  DensityMatrix target;
  FeedbackSetup setup;
};

// When the measurement is silent on the encoded levels, tilt the target eigenbasis just
// enough to pick up the measurement's eigenvalue splitting as a coupling.
inline PracticalStabilization practical_stabilize(const DensityMatrix& target_qubit,
                                                  const FeedbackSetup& setup, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  if (target_qubit.dim() != 2) throw DimensionMismatch("target must be a qubit state");
  const Matrix& basis = setup.split.basis();
  const Matrix m_s =
      (basis.adjoint() * setup.measurement.mat() * basis).topLeftCorner(2, 2);

  Eigen::SelfAdjointEigenSolver<Matrix> es(target_qubit.mat());
  if (es.info() != Eigen::Success) throw ConvergenceFailure("qubit eigendecomposition failed");
  Matrix v(2, 2);
  v.col(0) = es.eigenvectors().col(1);
  v.col(1) = es.eigenvectors().col(0);
  const double p1 = es.eigenvalues()(1);
  const double p2 = es.eigenvalues()(0);

  const Matrix m_frame = v.adjoint() * m_s * v;
  if (std::abs(m_frame(0, 1)) > 1e-12) return {target_qubit, setup};

  const double mu1 = m_frame(0, 0).real();
  const double mu2 = m_frame(1, 1).real();
  const double m_scale = m_s.norm();
  if (std::abs(mu1 - mu2) <= 1e-12 * (1.0 + m_scale))
    throw DegenerateMeasurement("measurement spectrum on the subspace is degenerate");

  // A rotation by theta yields coupling (mu2 - mu1) sin(2 theta) / 2 at trace distance
  // (p1 - p2) sin(theta); take the smallest angle reaching a tenth of the measurement
  // scale, capped by the allowed distance.
  const double wanted = std::min(1.0, 0.2 * m_scale / std::abs(mu1 - mu2));
  double theta = 0.5 * std::asin(wanted);
  const double gap = p1 - p2;
  if (gap > 0.0) theta = std::min(theta, std::asin(std::min(1.0, epsilon / gap)));

  Matrix rotation(2, 2);
  rotation << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const Matrix new_basis = v * rotation;
  Matrix weights = Matrix::Zero(2, 2);
  weights(0, 0) = p1;
  weights(1, 1) = p2;
  return {validate_density(new_basis * weights * new_basis.adjoint()), setup};
}

// Bundled four-level demonstration: two noiseless levels, two noisy ones, measurement
// coupling both within the subspace and across to the complement.
inline FeedbackSetup demo_setup() {
  Matrix noise = Matrix::Zero(4, 4);
  noise(2, 2) = 1.0;
  noise(3, 3) = 2.0;
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = 0.3;
  m(1, 1) = -0.3;
  m(0, 1) = 0.5;
  m(1, 0) = 0.5;
  m(1, 2) = 1.0;
  m(2, 1) = 1.0;
  return make_setup(HermitianMatrix::zero(4), OperatorMatrix(noise), HermitianMatrix(m),
                    BlockSplit::leading(4, 2));
}

inline DensityMatrix demo_target() {
  Matrix rho = Matrix::Zero(2, 2);
  rho(0, 0) = 0.75;
  rho(1, 1) = 0.25;
  return validate_density(rho);
}

inline SimulationTrace integrate_fme(const FeedbackSetup& setup, const DensityMatrix& rho0,
                                     double horizon, double dt, const DensityMatrix* target = nullptr,
                                     Index max_points = 1001) {
  return integrate_channels(fme_hamiltonian(setup), fme_channels(setup), rho0, horizon, dt, target,
                            max_points);
}

inline SimulationTrace integrate_fme(const FeedbackSetup& setup, const DensityMatrix& rho0,
                                     double horizon, const DensityMatrix* target = nullptr,
                                     Index max_points = 1001) {
  const double bound = generator_norm_bound(fme_hamiltonian(setup), fme_channels(setup));
  const double dt = bound > 0.0 ? 0.01 / bound : horizon / 100.0;
  return integrate_fme(setup, rho0, horizon, dt, target, max_points);
}

}  // namespace qstab
