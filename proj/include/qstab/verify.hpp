// verify.hpp: invariance residuals, algebraic uniqueness conditions, and GAS certificates.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qstab/core.hpp"
#include "qstab/dynamics.hpp"
#include "qstab/errors.hpp"
#include "qstab/tridiag.hpp"

namespace qstab {

struct BlockResiduals {
  double s = 0.0;
  double p = 0.0;
  double r = 0.0;
};

// Frobenius norms of the generator's blocks in the split basis. The state must be
// block-diagonal there; invariance is equivalent to all three vanishing.
inline BlockResiduals block_invariance_residuals(const Matrix& h, const std::vector<Matrix>& channels,
                                                 const Matrix& rho, const BlockSplit& split) {
  const BlockView state = block_view(rho, split);
  const double off = std::max(state.p.size() > 0 ? state.p.cwiseAbs().maxCoeff() : 0.0,
                              state.q.size() > 0 ? state.q.cwiseAbs().maxCoeff() : 0.0);
  if (off > 1e-12) {
    std::ostringstream msg;
    msg << "state has off-diagonal block magnitude " << off << " in the split basis";
    throw NotBlockDiagonal(msg.str());
  }
  const BlockView flow = block_view(apply_generator_raw(h, channels, rho), split);
  return {flow.s.norm(), flow.p.norm(), flow.r.norm()};
}

inline BlockResiduals block_invariance_residuals(const LindbladPair& pair, const DensityMatrix& rho,
                                                 const BlockSplit& split) {
  return block_invariance_residuals(pair.hamiltonian.mat(), {pair.lindblad.mat()}, rho.mat(), split);
}

struct UniquenessReport {
  double min_pair_overlap = std::numeric_limits<double>::quiet_NaN();
  double min_h_coupling = std::numeric_limits<double>::quiet_NaN();
  bool violated = false;
};

// Evaluates the obstruction to a second stationary state: for eigenvectors v_j of L,
// a second one can exist only if some pair satisfies v_j.v_k = v_j.H v_k = v_j.L v_k = 0.
// violated = every pair breaks at least one equality (sufficient for uniqueness).
inline UniquenessReport uniqueness_conditions(const LindbladPair& pair, double tol = 1e-8) {
  const EigenSystem es = eigensolve(extract_tridiagonal(pair.lindblad.mat()));
  const Index n = pair.dim();
  const Matrix h = pair.hamiltonian.mat();
  const Matrix l = pair.lindblad.mat();
  const double h_scale = 1.0 + h.norm();
  const double l_scale = 1.0 + l.norm();

  Matrix v(n, n);  // unit-norm eigenvector columns
  for (Index k = 0; k < n; ++k)
    v.col(k) = es.eigenvectors.col(k).cast<Complex>() / es.eigenvectors.col(k).norm();

  UniquenessReport report;
  report.violated = true;
  report.min_pair_overlap = std::numeric_limits<double>::infinity();
  double min_coupling_orthogonal = std::numeric_limits<double>::infinity();
  double min_coupling_all = std::numeric_limits<double>::infinity();
  bool any_orthogonal = false;
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < n; ++k) {
      if (j == k) continue;
      const double o_v = std::abs(v.col(j).dot(v.col(k)));
      const double o_h = std::abs(v.col(j).dot(h * v.col(k)));
      const double o_l = std::abs(v.col(j).dot(l * v.col(k)));
      report.min_pair_overlap = std::min(report.min_pair_overlap, o_v);
      min_coupling_all = std::min(min_coupling_all, o_h);
      if (o_v <= tol) {
        any_orthogonal = true;
        min_coupling_orthogonal = std::min(min_coupling_orthogonal, o_h);
      }
      const bool broken = o_v > tol || o_h > tol * h_scale || o_l > tol * l_scale;
      report.violated = report.violated && broken;
    }
  // With no orthogonal pair the coupling condition is moot; report the global minimum.
  report.min_h_coupling = any_orthogonal ? min_coupling_orthogonal : min_coupling_all;
  if (n < 2) {
    report.min_pair_overlap = std::numeric_limits<double>::quiet_NaN();
    report.min_h_coupling = std::numeric_limits<double>::quiet_NaN();
    report.violated = true;
  }
  return report;
}

struct Certificate {
  double stationarity_residual = 0.0;
  BlockResiduals block_residuals;
  Index kernel_dim = 0;  // -1 when the kernel cut is ambiguous
  bool gas = false;
  double min_pair_overlap = std::numeric_limits<double>::quiet_NaN();
  double min_h_coupling = std::numeric_limits<double>::quiet_NaN();
  double gap = 0.0;
  std::string notes;
};

namespace detail {

inline void append_note(std::string& notes, const std::string& note) {
  if (!notes.empty()) notes += "; ";
  notes += note;
}

}  // namespace detail

// Kernel-dimension certificate for a generator with arbitrarily many channels.
// The algebraic uniqueness route applies only to single tridiagonal-admissible channels;
// callers on that path should use the LindbladPair overload.
inline Certificate certify(const DensityMatrix& target, const Matrix& h, const std::vector<Matrix>& channels) {
  detail::require_square(h, "certify");
  if (h.rows() != target.dim()) throw DimensionMismatch("Hamiltonian does not match the target dimension");
  Certificate cert;

  cert.stationarity_residual = apply_generator_raw(h, channels, target.mat()).norm();

  const Index n = target.dim();
  const BlockSplit split(target.eigenbasis(), n > 1 ? n - 1 : n);
  cert.block_residuals = block_invariance_residuals(h, channels, target.mat(), split);

  const Liouvillian liou = build_liouvillian(h, channels);
  cert.gap = spectral_gap(liou);
  const KernelCut cut = kernel_cut(liou.singular_values, 1e-9);
  if (cut.count == 0 || cut.boundary_ratio < 10.0) {
    std::ostringstream msg;
    msg << "kernel cut indeterminate (count " << cut.count << ", boundary ratio " << cut.boundary_ratio
        << ")";
    detail::append_note(cert.notes, msg.str());
    cert.kernel_dim = -1;
    cert.gas = false;
    return cert;
  }
  cert.kernel_dim = cut.count;
  cert.gas = cert.stationarity_residual < 1e-9 && cert.kernel_dim == 1;
  return cert;
}

inline Certificate certify(const DensityMatrix& target, const LindbladPair& pair) {
  Certificate cert = certify(target, pair.hamiltonian.mat(), {pair.lindblad.mat()});
  if (is_admissible_tridiagonal(pair.lindblad.mat())) {
    const UniquenessReport report = uniqueness_conditions(pair);
    cert.min_pair_overlap = report.min_pair_overlap;
    cert.min_h_coupling = report.min_h_coupling;
    if (!report.violated)
      detail::append_note(cert.notes, "algebraic uniqueness conditions inconclusive");
  } else {
    detail::append_note(cert.notes, "kernel-only certification: L is not tridiagonal admissible");
  }
  return cert;
}

}  // namespace qstab
