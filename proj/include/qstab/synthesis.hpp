// synthesis.hpp: construction of (H, L) pairs that make a target density matrix stationary.
#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qstab/core.hpp"
#include "qstab/errors.hpp"
#include "qstab/tridiag.hpp"

namespace qstab {

// Target spectrum p (descending, positive, sum <= 1; < 1 only for intermediate induction stages),
// free Lindblad diagonal a, and either an explicit Hamiltonian diagonal h or the auto rule
// h = (M, 0, ..., 0) with M = 2 max(M0, 1).
struct SynthesisConfig {
  RealVector spectrum;
  RealVector a_diag;
  std::optional<RealVector> h_diag;  // nullopt selects the auto rule
};

struct SynthesisStep {
  Index m = 0;       // block size before the step
  CVector K;         // affine term of the P-block condition
  double ell_q = 0;  // sqrt(p_{m+1})
  Matrix pi_p;       // projector onto the range of L_P
  Matrix pi_q;       // projector onto the support of L_Q (equal to pi_p by design)
};

struct SynthesisResult {
  LindbladPair pair;            // stepwise-built pair (ground truth)
  double m0 = 0.0;              // max |v_j^H H0 v_k| over orthogonal L-eigenvector pairs
  double m_used = 0.0;          // diagonal magnitude actually placed at h_1 (0 if explicit h)
  RealVector h_used;            // resolved Hamiltonian diagonal
  bool auto_m = false;
  double closed_form_max_dev = 0.0;  // max entrywise |H_stepwise - H_closedform|
};

inline void validate_config(const SynthesisConfig& cfg) {
  const Index n = cfg.spectrum.size();
  if (n < 1) throw InvalidSpectrum("spectrum must be non-empty");
  if (!cfg.spectrum.allFinite()) throw InvalidSpectrum("spectrum entries must be finite");
  for (Index k = 0; k < n; ++k)
    if (!(cfg.spectrum[k] > 0.0))
      throw InvalidSpectrum("spectrum entry " + std::to_string(k + 1) + " is " +
                            std::to_string(cfg.spectrum[k]) + ", need > 0");
  for (Index k = 0; k + 1 < n; ++k)
    if (cfg.spectrum[k] < cfg.spectrum[k + 1])
      throw InvalidSpectrum("spectrum must be descending; entry " + std::to_string(k + 2) +
                            " exceeds its predecessor");
  if (cfg.spectrum.sum() > 1.0 + 1e-12)
    throw InvalidSpectrum("spectrum sums to " + std::to_string(cfg.spectrum.sum()) + ", need <= 1");
  if (cfg.a_diag.size() != n)
    throw DimensionMismatch("a_diag has " + std::to_string(cfg.a_diag.size()) + " entries for dimension " +
                            std::to_string(n));
  if (!cfg.a_diag.allFinite()) throw std::invalid_argument("a_diag entries must be finite");
  if (cfg.h_diag) {
    if (cfg.h_diag->size() != n)
      throw DimensionMismatch("h_diag has " + std::to_string(cfg.h_diag->size()) + " entries for dimension " +
                              std::to_string(n));
    if (!cfg.h_diag->allFinite()) throw std::invalid_argument("h_diag entries must be finite");
  }
}

// L_{n,n} = a_n, L_{n,n+1} = sqrt(p_n), L_{n+1,n} = sqrt(p_{n+1}).
inline OperatorMatrix synth_L(const SynthesisConfig& cfg) {
  validate_config(cfg);
  const Index n = cfg.spectrum.size();
  Matrix l = Matrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) l(k, k) = cfg.a_diag[k];
  for (Index k = 0; k + 1 < n; ++k) {
    l(k, k + 1) = std::sqrt(cfg.spectrum[k]);
    l(k + 1, k) = std::sqrt(cfg.spectrum[k + 1]);
  }
  return OperatorMatrix(std::move(l));
}

namespace detail {

// Off-diagonal bands of the closed-form Hamiltonian, diagonal left at zero.
inline Matrix hamiltonian_bands(const RealVector& p, const RealVector& a) {
  const Index n = p.size();
  RealVector s(n);
  for (Index k = 0; k < n; ++k) s[k] = std::sqrt(p[k]);
  Matrix h = Matrix::Zero(n, n);
  for (Index k = 0; k + 1 < n; ++k) {
    const Complex band1 = Complex(0.0, -0.5) * ((s[k] - s[k + 1]) / (s[k] + s[k + 1])) *
                          (a[k] * s[k] + a[k + 1] * s[k + 1]);
    h(k, k + 1) = band1;
    h(k + 1, k) = std::conj(band1);
  }
  for (Index k = 0; k + 2 < n; ++k) {
    const Complex band2 = Complex(0.0, -0.5) * p[k + 1] * ((s[k] - s[k + 2]) / (s[k] + s[k + 2]));
    h(k, k + 2) = band2;
    h(k + 2, k) = std::conj(band2);
  }
  return h;
}

}  // namespace detail

inline double compute_M0(const OperatorMatrix& l, const HermitianMatrix& h0) {
  if (l.dim() != h0.dim()) throw DimensionMismatch("L and H0 dimensions differ");
  if (l.dim() == 1) return std::abs(h0.mat()(0, 0));
  const EigenSystem es = eigensolve(extract_tridiagonal(l.mat()));
  double m0 = 0.0;
  for (Index j = 0; j < l.dim(); ++j)
    for (Index k = 0; k < l.dim(); ++k) {
      const Complex overlap = es.eigenvectors.col(j).cast<Complex>().dot(h0.mat() * es.eigenvectors.col(k).cast<Complex>());
      m0 = std::max(m0, std::abs(overlap));
    }
  return m0;
}

// Same bound restricted to eigenvector pairs that are orthogonal within tolerance.
// Only those pairs constrain the diagonal lift: a nonzero mutual overlap already rules
// the pair out as a uniqueness obstruction, so its H coupling never needs to dominate.
// The unrestricted bound above can reach the product of eigenvector magnitudes, which
// grows exponentially with dimension and would push the lift far beyond a usable scale.
inline double compute_M0(const OperatorMatrix& l, const HermitianMatrix& h0, double orthogonal_tol) {
  if (l.dim() != h0.dim()) throw DimensionMismatch("L and H0 dimensions differ");
  if (l.dim() == 1) return 0.0;
  const EigenSystem es = eigensolve(extract_tridiagonal(l.mat()));
  double m0 = 0.0;
  for (Index j = 0; j < l.dim(); ++j)
    for (Index k = 0; k < l.dim(); ++k) {
      if (j == k) continue;
      const double scale = es.eigenvectors.col(j).norm() * es.eigenvectors.col(k).norm();
      if (std::abs(es.eigenvectors.col(j).dot(es.eigenvectors.col(k))) > orthogonal_tol * scale)
        continue;
      const Complex coupling = es.eigenvectors.col(j).cast<Complex>().dot(h0.mat() * es.eigenvectors.col(k).cast<Complex>());
      m0 = std::max(m0, std::abs(coupling));
    }
  return m0;
}

namespace detail {

struct ResolvedDiagonal {
  RealVector h;
  double m0 = 0.0;
  double m_used = 0.0;
  bool auto_m = false;
};

inline ResolvedDiagonal resolve_h(const SynthesisConfig& cfg) {
  ResolvedDiagonal out;
  if (cfg.h_diag) {
    out.h = *cfg.h_diag;
    return out;
  }
  const Index n = cfg.spectrum.size();
  const HermitianMatrix h0(hamiltonian_bands(cfg.spectrum, cfg.a_diag), 1e-12);
  out.m0 = compute_M0(synth_L(cfg), h0, 1e-8);
  out.m_used = 2.0 * std::max(out.m0, 1.0);
  out.auto_m = true;
  out.h = RealVector::Zero(n);
  out.h[0] = out.m_used;
  return out;
}

}  // namespace detail

// Closed-form quintdiagonal Hamiltonian; auto h resolved via compute_M0 when not explicit.
inline HermitianMatrix synth_H(const SynthesisConfig& cfg) {
  validate_config(cfg);
  Matrix h = detail::hamiltonian_bands(cfg.spectrum, cfg.a_diag);
  const detail::ResolvedDiagonal rd = detail::resolve_h(cfg);
  h += rd.h.cast<Complex>().asDiagonal().toDenseMatrix();
  return HermitianMatrix(std::move(h), 1e-12);
}

// Solves the P-block invariance condition -i(rho_R I - rho_S) H_P + K = 0 for H_P.
// rho_S is Hermitian positive definite (d_S x d_S), rho_R a positive scalar weight,
// L_S d_S x d_S, L_R scalar, L_P d_S x 1, L_Q 1 x d_S.
inline CVector solve_HP(const Matrix& rho_S, double rho_R, const Matrix& L_S, Complex L_R,
                        const Matrix& L_P, const Matrix& L_Q) {
  const Index m = rho_S.rows();
  detail::require_square(rho_S, "rho_S");
  detail::require_square(L_S, "L_S");
  if (L_S.rows() != m || L_P.rows() != m || L_P.cols() != 1 || L_Q.rows() != 1 || L_Q.cols() != m)
    throw DimensionMismatch("block shapes inconsistent with d_S = " + std::to_string(m));
  if (!(rho_R >= 0.0)) throw std::invalid_argument("rho_R must be non-negative");

  const CVector u = L_S.adjoint() * L_P + L_Q.adjoint() * L_R;
  const CVector k = L_S * rho_S * L_Q.adjoint() + rho_R * std::conj(L_R) * L_P -
                    0.5 * (rho_R * u + rho_S * u);

  Eigen::SelfAdjointEigenSolver<Matrix> es(rho_S);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("eigendecomposition of rho_S failed");
  const CVector k_tilde = es.eigenvectors().adjoint() * k;
  const double rho_scale = std::abs(rho_R) + es.eigenvalues().cwiseAbs().maxCoeff();
  const double op_scale = L_S.norm() + L_P.norm() + L_Q.norm() + std::abs(L_R);
  // K is quadratic in the operators and linear in the state; forcing below the
  // roundoff floor of that product counts as zero.
  const double k_floor = 1e-9 * (op_scale * op_scale * rho_scale + 1e-300);
  CVector h_tilde(m);
  for (Index j = 0; j < m; ++j) {
    const double denom = rho_R - es.eigenvalues()[j];
    if (std::abs(denom) <= 1e-12 * (1.0 + rho_scale)) {
      if (std::abs(k_tilde[j]) <= k_floor) {
        h_tilde[j] = 0.0;  // tied eigenvalue with no forcing: any value works, pick 0
        continue;
      }
      std::ostringstream msg;
      msg << "rho_R ties an eigenvalue of rho_S (gap " << denom << ") with non-vanishing forcing "
          << std::abs(k_tilde[j]);
      throw SingularSystem(msg.str());
    }
    h_tilde[j] = Complex(0.0, -1.0) * k_tilde[j] / denom;
  }
  return es.eigenvectors() * h_tilde;
}

// Inductive construction: grow the pair one level at a time, solving the P-block
// condition at each step. Cross-validates the closed forms.
inline LindbladPair synth_stepwise(const SynthesisConfig& cfg, std::vector<SynthesisStep>* steps = nullptr) {
  validate_config(cfg);
  const Index n = cfg.spectrum.size();
  const RealVector h = detail::resolve_h(cfg).h;

  Matrix l = Matrix::Zero(1, 1);
  l(0, 0) = cfg.a_diag[0];
  Matrix ham = Matrix::Zero(1, 1);
  ham(0, 0) = h[0];

  for (Index m = 1; m < n; ++m) {
    const Matrix rho_s = cfg.spectrum.head(m).cast<Complex>().asDiagonal();
    const double rho_r = cfg.spectrum[m];
    Matrix l_p = Matrix::Zero(m, 1);
    l_p(m - 1, 0) = std::sqrt(cfg.spectrum[m - 1]);
    Matrix l_q = Matrix::Zero(1, m);
    l_q(0, m - 1) = std::sqrt(cfg.spectrum[m]);
    const Complex l_r = cfg.a_diag[m];

    const CVector h_p = solve_HP(rho_s, rho_r, l, l_r, l_p, l_q);

    if (steps) {
      SynthesisStep step;
      step.m = m;
      const CVector u = l.adjoint() * l_p + l_q.adjoint() * l_r;
      step.K = l * rho_s * l_q.adjoint() + rho_r * std::conj(l_r) * l_p - 0.5 * (rho_r * u + rho_s * u);
      step.ell_q = std::sqrt(cfg.spectrum[m]);
      Matrix pi = Matrix::Zero(m, m);
      pi(m - 1, m - 1) = 1.0;
      step.pi_p = pi;
      step.pi_q = std::move(pi);
      steps->push_back(std::move(step));
    }

    Matrix l_next = Matrix::Zero(m + 1, m + 1);
    l_next.topLeftCorner(m, m) = l;
    l_next.block(0, m, m, 1) = l_p;
    l_next.block(m, 0, 1, m) = l_q;
    l_next(m, m) = l_r;
    l = std::move(l_next);

    Matrix h_next = Matrix::Zero(m + 1, m + 1);
    h_next.topLeftCorner(m, m) = ham;
    h_next.block(0, m, m, 1) = h_p;
    h_next.block(m, 0, 1, m) = h_p.adjoint();
    h_next(m, m) = h[m];
    ham = std::move(h_next);
  }

  return LindbladPair(HermitianMatrix(std::move(ham), 1e-10), OperatorMatrix(std::move(l)));
}

// Stepwise pair plus provenance: M0, the diagonal rule actually used, and the maximum
// entrywise deviation between the stepwise Hamiltonian and its closed form.
inline SynthesisResult synth_pair(const SynthesisConfig& cfg) {
  validate_config(cfg);
  const detail::ResolvedDiagonal rd = detail::resolve_h(cfg);
  SynthesisConfig resolved = cfg;
  resolved.h_diag = rd.h;
  LindbladPair pair = synth_stepwise(resolved);
  const HermitianMatrix closed = synth_H(resolved);
  const double dev = (pair.hamiltonian.mat() - closed.mat()).cwiseAbs().maxCoeff();
  return {std::move(pair), rd.m0, rd.m_used, rd.h, rd.auto_m, dev};
}

// Extends a pair defined on the support of a rank-deficient target to the full space:
// L gains a corner coefficient ells[0] linking the last support level to the first
// complement level and a ladder ells[1..] down the complement; the Q-block stays zero,
// so the support remains invariant. H gains the P-block forced by invariance; H_R = 0.
inline LindbladPair extend_to_support(const LindbladPair& pair_on_support, Index full_dim,
                                      const BlockSplit& split, const RealVector& ells) {
  const Index r = pair_on_support.dim();
  if (split.dim() != full_dim || split.dim_s() != r)
    throw DimensionMismatch("split must partition dimension " + std::to_string(full_dim) +
                            " with support size " + std::to_string(r));
  if (r > full_dim) throw DimensionMismatch("support exceeds full dimension");
  if (ells.size() != full_dim - r)
    throw DimensionMismatch("need " + std::to_string(full_dim - r) + " ladder coefficients, got " +
                            std::to_string(ells.size()));
  if (r == full_dim) return pair_on_support;
  for (Index k = 0; k < ells.size(); ++k)
    if (ells[k] == 0.0)
      throw ZeroLadderCoefficient("ladder coefficient " + std::to_string(k + 1) + " is zero");

  const Index d_r = full_dim - r;
  Matrix l_p = Matrix::Zero(r, d_r);
  l_p(r - 1, 0) = ells[0];
  Matrix l_r = Matrix::Zero(d_r, d_r);
  for (Index k = 0; k + 1 < d_r; ++k) l_r(k, k + 1) = ells[k + 1];

  const Matrix h_p = Complex(0.0, -0.5) * (pair_on_support.lindblad.mat().adjoint() * l_p);

  BlockView lv{pair_on_support.lindblad.mat(), l_p, Matrix::Zero(d_r, r), l_r};
  BlockView hv{pair_on_support.hamiltonian.mat(), h_p, h_p.adjoint(), Matrix::Zero(d_r, d_r)};
  return LindbladPair(HermitianMatrix(assemble_blocks(split, hv), 1e-10),
                      OperatorMatrix(assemble_blocks(split, lv)));
}

}  // namespace qstab
