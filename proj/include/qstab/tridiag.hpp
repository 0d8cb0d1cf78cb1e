// tridiag.hpp: real tridiagonal eigensystems via the three-term recurrence and symmetrization.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qstab/core.hpp"
#include "qstab/errors.hpp"

namespace qstab {

// Real tridiagonal matrix: diagonal alpha (N), superdiagonal beta (N-1), subdiagonal gamma (N-1).
struct TridiagonalReal {
  RealVector alpha;
  RealVector beta;
  RealVector gamma;

  TridiagonalReal(RealVector alpha_in, RealVector beta_in, RealVector gamma_in)
      : alpha(std::move(alpha_in)), beta(std::move(beta_in)), gamma(std::move(gamma_in)) {
    if (alpha.size() < 1) throw DimensionMismatch("tridiagonal needs dimension >= 1");
    if (beta.size() != alpha.size() - 1 || gamma.size() != alpha.size() - 1)
      throw DimensionMismatch("off-diagonals must have length dim-1, got beta " +
                              std::to_string(beta.size()) + ", gamma " + std::to_string(gamma.size()) +
                              " for dim " + std::to_string(alpha.size()));
    if (!alpha.allFinite() || !beta.allFinite() || !gamma.allFinite())
      throw std::invalid_argument("tridiagonal entries must be finite");
  }

  Index dim() const { return alpha.size(); }

  RealMatrix dense() const {
    RealMatrix m = RealMatrix::Zero(dim(), dim());
    m.diagonal() = alpha;
    for (Index n = 0; n + 1 < dim(); ++n) {
      m(n, n + 1) = beta[n];
      m(n + 1, n) = gamma[n];
    }
    return m;
  }
};

struct EigenSystem {
  RealVector eigenvalues;    // ascending, strictly distinct
  RealMatrix eigenvectors;   // column k solves T w = lambda_k w; first component exactly 1
  RealVector symmetrizer;    // d, positive, d[0] = 1
  RealMatrix charpoly_values;  // (N+1) x N; column k is f_0..f_N at lambda_k
};

struct OrthogonalityReport {
  RealMatrix gram;  // w_j . w_k, symmetric, positive diagonal
  double min_offdiag_abs = 0.0;
  std::vector<std::pair<Index, Index>> orthogonal_pairs;  // |gram_jk| < tol * |w_j| |w_k|
};

struct Symmetrized {
  RealVector d;       // positive scaling, d[0] = 1
  TridiagonalReal s;  // symmetric: off-diagonals sqrt(beta_n * gamma_n)
};

namespace detail {

inline void require_positive_offdiagonals(const TridiagonalReal& t) {
  for (Index n = 0; n + 1 < t.dim(); ++n) {
    if (!(t.beta[n] > 0.0) || !(t.gamma[n] > 0.0))
      throw NonPositiveProduct("off-diagonal pair " + std::to_string(n + 1) + " not strictly positive: beta = " +
                               std::to_string(t.beta[n]) + ", gamma = " + std::to_string(t.gamma[n]));
  }
}

// Value carried as sign * exp(log_abs); sign 0 means exact zero.
struct SignedLog {
  int sign = 0;
  double log_abs = 0.0;

  static SignedLog from(double x) {
    if (x == 0.0) return {0, 0.0};
    return {x > 0.0 ? 1 : -1, std::log(std::abs(x))};
  }
  double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
};

inline SignedLog sl_mul(SignedLog a, SignedLog b) {
  if (a.sign == 0 || b.sign == 0) return {0, 0.0};
  return {a.sign * b.sign, a.log_abs + b.log_abs};
}

inline SignedLog sl_add(SignedLog a, SignedLog b) {
  if (a.sign == 0) return b;
  if (b.sign == 0) return a;
  if (a.log_abs < b.log_abs) std::swap(a, b);
  const double r = std::exp(b.log_abs - a.log_abs);  // in (0, 1]
  const double combined = (a.sign == b.sign) ? 1.0 + r : 1.0 - r;
  if (combined == 0.0) return {0, 0.0};
  return {a.sign, a.log_abs + std::log(combined)};
}

}  // namespace detail

// f_0 = 1, f_1 = lambda - alpha_1, f_{n+1} = (lambda - alpha_{n+1}) f_n - beta_n gamma_n f_{n-1}.
// f_N is the monic characteristic polynomial det(lambda I - T) of T (and of its symmetrized form).
inline RealVector charpoly_sequence(const TridiagonalReal& t, double lambda) {
  const Index n = t.dim();
  RealVector f(n + 1);
  f[0] = 1.0;
  f[1] = lambda - t.alpha[0];
  for (Index k = 1; k < n; ++k)
    f[k + 1] = (lambda - t.alpha[k]) * f[k] - t.beta[k - 1] * t.gamma[k - 1] * f[k - 1];
  return f;
}

// Number of eigenvalues of T strictly below lambda: sign agreements between consecutive
// entries of the monic charpoly sequence; a zero entry adopts the opposite sign of its predecessor.
inline Index eigenvalues_below(const TridiagonalReal& t, double lambda) {
  const RealVector f = charpoly_sequence(t, lambda);
  Index agreements = 0;
  int prev = 1;  // f_0 = 1
  for (Index k = 1; k < f.size(); ++k) {
    const int cur = f[k] > 0.0 ? 1 : (f[k] < 0.0 ? -1 : -prev);
    if (cur == prev) ++agreements;
    prev = cur;
  }
  return agreements;
}

// D with d_1 = 1, d_{n+1} = d_n sqrt(gamma_n / beta_n); S = D^{-1} T D has off-diagonals sqrt(beta_n gamma_n).
inline Symmetrized symmetrize(const TridiagonalReal& t) {
  const Index n = t.dim();
  for (Index k = 0; k + 1 < n; ++k)
    if (!(t.beta[k] * t.gamma[k] > 0.0))
      throw NonPositiveProduct("off-diagonal product " + std::to_string(k + 1) + " is " +
                               std::to_string(t.beta[k] * t.gamma[k]) + ", need > 0");
  RealVector d(n);
  d[0] = 1.0;
  RealVector off(n > 1 ? n - 1 : 0);
  for (Index k = 0; k + 1 < n; ++k) {
    d[k + 1] = d[k] * std::sqrt(t.gamma[k] / t.beta[k]);
    off[k] = std::sqrt(t.beta[k] * t.gamma[k]);
  }
  return {std::move(d), TridiagonalReal(t.alpha, off, off)};
}

inline EigenSystem eigensolve(const TridiagonalReal& t) {
  detail::require_positive_offdiagonals(t);
  const Index n = t.dim();

  // Gershgorin bracket of the (isospectral) symmetrized matrix.
  double lo = t.alpha[0], hi = t.alpha[0];
  {
    RealVector s = RealVector::Zero(n > 1 ? n - 1 : 0);
    for (Index k = 0; k + 1 < n; ++k) s[k] = std::sqrt(t.beta[k] * t.gamma[k]);
    for (Index k = 0; k < n; ++k) {
      const double radius = (k > 0 ? s[k - 1] : 0.0) + (k + 1 < n ? s[k] : 0.0);
      lo = std::min(lo, t.alpha[k] - radius);
      hi = std::max(hi, t.alpha[k] + radius);
    }
  }
  const double pad = 1e-8 * (1.0 + hi - lo);
  lo -= pad;
  hi += pad;

  // f_N and its derivative at lambda, via the differentiated recurrence.
  const auto charpoly_and_derivative = [&](double lambda) {
    double fm1 = 1.0, f = lambda - t.alpha[0];
    double gm1 = 0.0, g = 1.0;
    for (Index k = 1; k < n; ++k) {
      const double bg = t.beta[k - 1] * t.gamma[k - 1];
      const double fn = (lambda - t.alpha[k]) * f - bg * fm1;
      const double gn = f + (lambda - t.alpha[k]) * g - bg * gm1;
      fm1 = f; f = fn;
      gm1 = g; g = gn;
    }
    return std::pair<double, double>{f, g};
  };

  RealVector eigenvalues(n);
  for (Index j = 0; j < n; ++j) {
    // Bisect until exactly eigenvalue j lies in (a, b).
    double a = lo, b = hi;
    for (int it = 0; it < 200 && (b - a) > 1e-13 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
      const double mid = 0.5 * (a + b);
      if (eigenvalues_below(t, mid) > j) b = mid; else a = mid;
    }
    double x = 0.5 * (a + b);
    // Newton polish on f_N, confined to the isolating bracket.
    for (int it = 0; it < 8; ++it) {
      const auto [f, g] = charpoly_and_derivative(x);
      if (g == 0.0) break;
      const double step = f / g;
      const double next = x - step;
      if (!(next > a && next < b)) break;
      x = next;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
    }
    eigenvalues[j] = x;
  }

  for (Index j = 0; j + 1 < n; ++j)
    if (!(eigenvalues[j] < eigenvalues[j + 1]))
      throw ConvergenceFailure("root isolation produced non-increasing eigenvalues at index " + std::to_string(j));

  // Entry j of eigenvector k: f_{j-1}(lambda_k) / (beta_1 ... beta_{j-1}), in log-space.
  RealVector log_beta_prefix = RealVector::Zero(n);  // log of the denominator product for row j
  for (Index j = 1; j < n; ++j) log_beta_prefix[j] = log_beta_prefix[j - 1] + std::log(t.beta[j - 1]);

  RealMatrix eigenvectors(n, n);
  RealMatrix charpoly_values(n + 1, n);
  for (Index k = 0; k < n; ++k) {
    const double lambda = eigenvalues[k];
    charpoly_values.col(k) = charpoly_sequence(t, lambda);
    detail::SignedLog fm1 = detail::SignedLog::from(1.0);
    detail::SignedLog f = fm1;
    for (Index j = 0; j < n; ++j) {
      if (j > 0) {
        const detail::SignedLog term1 = detail::sl_mul(detail::SignedLog::from(lambda - t.alpha[j - 1]), f);
        const detail::SignedLog term2 =
            j > 1 ? detail::sl_mul(detail::SignedLog::from(-t.beta[j - 2] * t.gamma[j - 2]), fm1)
                  : detail::SignedLog{0, 0.0};
        fm1 = f;
        f = detail::sl_add(term1, term2);
      }
      eigenvectors(j, k) = f.sign == 0 ? 0.0 : f.sign * std::exp(f.log_abs - log_beta_prefix[j]);
    }
    eigenvectors(0, k) = 1.0;  // f_0 = 1 and empty product, exactly
  }

  RealVector d(n);
  d[0] = 1.0;
  for (Index k = 0; k + 1 < n; ++k) d[k + 1] = d[k] * std::sqrt(t.gamma[k] / t.beta[k]);

  return {std::move(eigenvalues), std::move(eigenvectors), std::move(d), std::move(charpoly_values)};
}

inline OrthogonalityReport orthogonality_report(const EigenSystem& es, double tol = 1e-8) {
  const Index n = es.eigenvectors.cols();
  OrthogonalityReport report;
  report.gram = es.eigenvectors.transpose() * es.eigenvectors;
  report.min_offdiag_abs = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j)
    for (Index k = j + 1; k < n; ++k) {
      const double g = std::abs(report.gram(j, k));
      report.min_offdiag_abs = std::min(report.min_offdiag_abs, g);
      if (g < tol * std::sqrt(report.gram(j, j) * report.gram(k, k)))
        report.orthogonal_pairs.emplace_back(j, k);
    }
  if (n < 2) report.min_offdiag_abs = 0.0;
  return report;
}

// True when m is real, tridiagonal, and has strictly positive off-diagonals (within tol).
inline bool is_admissible_tridiagonal(const Matrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols() || m.rows() < 1) return false;
  const Index n = m.rows();
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) {
      if (std::abs(m(r, c).imag()) > tol) return false;
      if (std::abs(static_cast<std::ptrdiff_t>(r - c)) > 1 && std::abs(m(r, c)) > tol) return false;
    }
  for (Index k = 0; k + 1 < n; ++k)
    if (m(k, k + 1).real() <= tol || m(k + 1, k).real() <= tol) return false;
  return true;
}

inline TridiagonalReal extract_tridiagonal(const Matrix& m, double tol = 1e-12) {
  if (!is_admissible_tridiagonal(m, tol))
    throw std::invalid_argument("matrix is not an admissible real tridiagonal");
  const Index n = m.rows();
  RealVector alpha(n), beta(n > 1 ? n - 1 : 0), gamma(n > 1 ? n - 1 : 0);
  for (Index k = 0; k < n; ++k) alpha[k] = m(k, k).real();
  for (Index k = 0; k + 1 < n; ++k) {
    beta[k] = m(k, k + 1).real();
    gamma[k] = m(k + 1, k).real();
  }
  return TridiagonalReal(std::move(alpha), std::move(beta), std::move(gamma));
}

}  // namespace qstab
