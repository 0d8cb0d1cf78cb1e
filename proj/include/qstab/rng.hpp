// rng.hpp: Counter-based deterministic randomness: draw k is a pure function
// of (seed, k), so runs with the same seed reproduce byte-identical streams.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>

#include "qstab/core.hpp"

namespace qstab {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives independent sub-stream seeds, e.g. one per sweep trial.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k) {
  return splitmix64(splitmix64(base) ^ (k * 0xC2B2AE3D27D4EB4Full + 0x165667B19E3779F9ull));
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(splitmix64(seed ^ 0x5851F42D4C957F2Dull)) {}

  std::uint64_t next_u64() { return splitmix64(seed_ ^ (0x9E3779B97F4A7C15ull * ++counter_)); }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Sorted normalized exponentials: a strictly descending probability vector
// almost surely (uniform on the simplex).
inline RealVector random_spectrum(CounterRng& rng, Index n) {
  RealVector p(n);
  for (Index k = 0; k < n; ++k) {
    double u = rng.uniform();
    while (u >= 1.0 || u < 1e-300) u = rng.uniform();
    p[k] = -std::log1p(-u);
  }
  p /= p.sum();
  std::sort(p.data(), p.data() + n, std::greater<double>());
  return p;
}

inline Matrix random_operator(CounterRng& rng, Index n, double scale = 1.0) {
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      g(i, j) = scale * Complex(rng.gaussian(), rng.gaussian());
    }
  }
  return g;
}

inline HermitianMatrix random_hermitian(CounterRng& rng, Index n, double scale = 1.0) {
  const Matrix g = random_operator(rng, n, scale);
  return HermitianMatrix((g + g.adjoint()) / 2.0);
}

inline DensityMatrix random_density(CounterRng& rng, Index n) {
  const Matrix g = random_operator(rng, n);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return validate_density(rho, 1e-8);
}

inline Matrix random_unitary(CounterRng& rng, Index n) {
  const Matrix g = random_operator(rng, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    const Complex d = r(j, j);
    const double a = std::abs(d);
    q.col(j) *= (a > 0.0) ? std::conj(d / a) : Complex(1.0, 0.0);
  }
  return q;
}

}  // namespace qstab
