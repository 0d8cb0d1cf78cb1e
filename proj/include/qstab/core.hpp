// core.hpp: Dense operator types, block decompositions, and distance measures
// for finite-dimensional open quantum systems.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <utility>

#include "qstab/errors.hpp"

namespace qstab {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kDefaultValidateTol = 1e-10;
inline constexpr double kUnitaryTol = 1e-12;
inline constexpr double kEigenvalueClampTol = 1e-12;
inline constexpr Complex kImag{0.0, 1.0};

namespace detail {

inline std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

inline void require_square(const Matrix& m, const char* context) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw DimensionMismatch(std::string(context) +
                            ": expected nonempty square matrix, got " + shape_string(m));
  }
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(context) + ": matrix has non-finite entries");
  }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* context) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(context) + ": operand shapes " + shape_string(a) +
                            " and " + shape_string(b) + " differ");
  }
}

}  // namespace detail

// Square complex matrix with finite entries; the common currency of the library.
class OperatorMatrix {
 public:
  explicit OperatorMatrix(Matrix m) : m_(std::move(m)) {
    detail::require_square(m_, "OperatorMatrix");
  }

  Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }

 private:
  Matrix m_;
};

// Hermitian matrix stored exactly: the lower triangle and the real part of the
// diagonal are kept and the upper triangle is their mirror, so
// mat() == mat().adjoint() holds entrywise with zero tolerance.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(const Matrix& m, double tol = kDefaultValidateTol) {
    detail::require_square(m, "HermitianMatrix");
    const double dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (dev > tol) {
      std::ostringstream os;
      os << "HermitianMatrix: max |X - X^dag| = " << dev << " exceeds tolerance " << tol;
      throw NotHermitian(os.str());
    }
    full_ = mirror_lower(m);
  }

  static HermitianMatrix zero(Index n) { return HermitianMatrix(Matrix::Zero(n, n)); }

  Index dim() const { return full_.rows(); }
  const Matrix& mat() const { return full_; }

 private:
  static Matrix mirror_lower(const Matrix& m) {
    Matrix full(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
      full(j, j) = Complex(m(j, j).real(), 0.0);
      for (Index i = j + 1; i < m.rows(); ++i) {
        full(i, j) = m(i, j);
        full(j, i) = std::conj(m(i, j));
      }
    }
    return full;
  }

  Matrix full_;
};

// Unit-trace positive semidefinite state. Construct through validate_density;
// the stored spectrum is sorted descending with near-zero negatives clamped.
class DensityMatrix {
 public:
  Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  const RealVector& spectrum() const { return spectrum_; }
  // Columns are eigenvectors in the same (descending) order as spectrum().
  const Matrix& eigenbasis() const { return basis_; }

  friend DensityMatrix validate_density(const Matrix& m, double tol);

 private:
  DensityMatrix() = default;

  Matrix m_;
  RealVector spectrum_;
  Matrix basis_;
};

inline DensityMatrix validate_density(const Matrix& m, double tol = kDefaultValidateTol) {
  detail::require_square(m, "validate_density");
  const double herm_dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm_dev > tol) {
    std::ostringstream os;
    os << "validate_density: max |X - X^dag| = " << herm_dev << " exceeds tolerance " << tol;
    throw NotHermitian(os.str());
  }
  Matrix full = HermitianMatrix(m, tol).mat();
  const double tr = full.trace().real();
  if (std::abs(tr - 1.0) > tol) {
    std::ostringstream os;
    os << "validate_density: trace = " << tr << " deviates from 1 by " << std::abs(tr - 1.0);
    throw TraceNotOne(os.str());
  }
  full /= tr;

  Eigen::SelfAdjointEigenSolver<Matrix> es(full);
  if (es.info() != Eigen::Success) {
    throw ConvergenceFailure("validate_density: eigendecomposition failed");
  }
  RealVector ev = es.eigenvalues().reverse();
  Matrix basis = es.eigenvectors().rowwise().reverse();
  const double min_ev = ev.minCoeff();
  if (min_ev < -tol) {
    std::ostringstream os;
    os << "validate_density: smallest eigenvalue " << min_ev << " below -" << tol;
    throw NotPositive(os.str());
  }
  for (Index k = 0; k < ev.size(); ++k) {
    if (ev[k] < 0.0) ev[k] = 0.0;
  }

  DensityMatrix rho;
  rho.m_ = std::move(full);
  rho.spectrum_ = std::move(ev);
  rho.basis_ = std::move(basis);
  return rho;
}

// Orthogonal decomposition H = H_S (+) H_R. Columns of basis() span H_S first.
class BlockSplit {
 public:
  BlockSplit(Matrix basis, Index dim_s, double tol = kUnitaryTol)
      : basis_(std::move(basis)), dim_s_(dim_s) {
    detail::require_square(basis_, "BlockSplit");
    if (dim_s_ < 1 || dim_s_ > basis_.rows()) {  // dim_s == dim gives an empty complement
      std::ostringstream os;
      os << "BlockSplit: dim_s = " << dim_s_ << " outside [1, " << basis_.rows() << "]";
      throw DimensionMismatch(os.str());
    }
    const Matrix gram = basis_.adjoint() * basis_;
    const double dev = (gram - Matrix::Identity(basis_.rows(), basis_.cols())).cwiseAbs().maxCoeff();
    if (dev > tol) {
      std::ostringstream os;
      os << "BlockSplit: basis unitarity deviation " << dev << " exceeds " << tol;
      throw std::invalid_argument(os.str());
    }
  }

  static BlockSplit leading(Index n, Index dim_s) {
    return BlockSplit(Matrix::Identity(n, n), dim_s);
  }

  Index dim() const { return basis_.rows(); }
  Index dim_s() const { return dim_s_; }
  Index dim_r() const { return basis_.rows() - dim_s_; }
  const Matrix& basis() const { return basis_; }

 private:
  Matrix basis_;
  Index dim_s_;
};

struct BlockView {
  Matrix s, p, q, r;  // p couples S->R rows/cols (upper right), q its mirror
};

inline BlockView block_view(const Matrix& x, const BlockSplit& split) {
  if (x.rows() != split.dim() || x.cols() != split.dim()) {
    throw DimensionMismatch("block_view: operator dimension " + detail::shape_string(x) +
                            " does not match split dimension");
  }
  const Matrix y = split.basis().adjoint() * x * split.basis();
  const Index ds = split.dim_s();
  const Index dr = split.dim_r();
  BlockView v;
  v.s = y.topLeftCorner(ds, ds);
  v.p = y.topRightCorner(ds, dr);
  v.q = y.bottomLeftCorner(dr, ds);
  v.r = y.bottomRightCorner(dr, dr);
  return v;
}

inline Matrix assemble_blocks(const BlockSplit& split, const BlockView& v) {
  const Index ds = split.dim_s();
  const Index dr = split.dim_r();
  Matrix y(ds + dr, ds + dr);
  y.topLeftCorner(ds, ds) = v.s;
  y.topRightCorner(ds, dr) = v.p;
  y.bottomLeftCorner(dr, ds) = v.q;
  y.bottomRightCorner(dr, dr) = v.r;
  return split.basis() * y * split.basis().adjoint();
}

// Hamiltonian plus a single Lindblad operator of equal dimension.
struct LindbladPair {
  HermitianMatrix hamiltonian;
  OperatorMatrix lindblad;

  LindbladPair(HermitianMatrix h, OperatorMatrix l)
      : hamiltonian(std::move(h)), lindblad(std::move(l)) {
    if (hamiltonian.dim() != lindblad.dim()) {
      std::ostringstream os;
      os << "LindbladPair: Hamiltonian dim " << hamiltonian.dim() << " != Lindblad dim "
         << lindblad.dim();
      throw DimensionMismatch(os.str());
    }
  }

  Index dim() const { return hamiltonian.dim(); }
};

inline Matrix commutator(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "commutator");
  return a * b - b * a;
}

inline Matrix anticommutator(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "anticommutator");
  return a * b + b * a;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Column stacking: vec(A X B) == kron(B^T, A) vec(X).
inline CVector vec(const Matrix& m) {
  return m.reshaped();
}

inline Matrix unvec(const CVector& v, Index n) {
  if (v.size() != n * n) {
    std::ostringstream os;
    os << "unvec: vector length " << v.size() << " is not " << n << "^2";
    throw DimensionMismatch(os.str());
  }
  return v.reshaped(n, n);
}

inline double frobenius(const Matrix& m) { return m.norm(); }

inline double trace_distance(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "trace_distance");
  Matrix d = a - b;
  d = (d + d.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(d);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es((m + m.adjoint()) / 2.0);
  RealVector ev = es.eigenvalues();
  for (Index k = 0; k < ev.size(); ++k) ev[k] = std::sqrt(std::max(ev[k], 0.0));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Uhlmann fidelity, squared convention: (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const Matrix& rho, const Matrix& sigma) {
  detail::require_same_shape(rho, sigma, "fidelity");
  const Matrix s = psd_sqrt(rho);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s * ((sigma + sigma.adjoint()) / 2.0) * s);
  double sum = 0.0;
  for (Index k = 0; k < es.eigenvalues().size(); ++k) {
    sum += std::sqrt(std::max(es.eigenvalues()[k], 0.0));
  }
  return sum * sum;
}

}  // namespace qstab
