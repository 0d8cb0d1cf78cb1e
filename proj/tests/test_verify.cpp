#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qstab/core.hpp"
#include "qstab/dynamics.hpp"
#include "qstab/errors.hpp"
#include "qstab/rng.hpp"
#include "qstab/synthesis.hpp"
#include "qstab/verify.hpp"

using namespace qstab;

namespace {

// Block-diagonal density matrix with respect to a random split, plus the split itself.
struct BlockState {
  Matrix rho;
  BlockSplit split;
};

BlockState random_block_state(CounterRng& rng, Index n) {
  const Index dim_s = 1 + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(n - 1));
  const Matrix basis = random_unitary(rng, n);
  const BlockSplit split(basis, dim_s);
  const double weight = rng.uniform(0.1, 0.9);
  Matrix diag_blocks = Matrix::Zero(n, n);
  diag_blocks.topLeftCorner(dim_s, dim_s) = weight * random_density(rng, dim_s).mat();
  diag_blocks.bottomRightCorner(n - dim_s, n - dim_s) =
      (1.0 - weight) * random_density(rng, n - dim_s).mat();
  return {basis * diag_blocks * basis.adjoint(), split};
}

SynthesisConfig random_config(CounterRng& rng, Index n) {
  SynthesisConfig cfg;
  cfg.spectrum = random_spectrum(rng, n);
  cfg.a_diag = RealVector(n);
  for (Index i = 0; i < n; ++i) cfg.a_diag(i) = rng.uniform(-2.0, 2.0);
  return cfg;
}

}  // namespace

TEST_CASE("block residual norms split the generator norm exactly") {
  CounterRng rng(20250819);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 5);
    const BlockState state = random_block_state(rng, n);
    const Matrix h = random_hermitian(rng, n).mat();
    const Matrix l = random_operator(rng, n);

    const BlockResiduals res = block_invariance_residuals(h, {l}, state.rho, state.split);
    const double total = apply_generator_raw(h, {l}, state.rho).norm();
    const double lhs = res.s * res.s + 2.0 * res.p * res.p + res.r * res.r;
    const double rhs = total * total;
    REQUIRE(std::abs(lhs - rhs) <= 1e-12 * (1.0 + rhs));
  }
}

TEST_CASE("constructed pair has vanishing block residuals at its target") {
  CounterRng rng(415);
  for (Index n = 2; n <= 6; ++n) {
    SynthesisConfig cfg = random_config(rng, n);
    const SynthesisResult synth = synth_pair(cfg);
    Matrix rho = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) rho(i, i) = cfg.spectrum(i);
    const BlockSplit split = BlockSplit::leading(n, n - 1);
    const BlockResiduals res = block_invariance_residuals(
        synth.pair.hamiltonian.mat(), {synth.pair.lindblad.mat()}, rho, split);
    CHECK(res.s <= 1e-11);
    CHECK(res.p <= 1e-11);
    CHECK(res.r <= 1e-11);
  }
}

TEST_CASE("a coupling-block perturbation shows up only in the coupling residual") {
  SynthesisConfig cfg;
  cfg.spectrum = RealVector(4);
  cfg.spectrum << 0.4, 0.3, 0.2, 0.1;
  cfg.a_diag = RealVector(4);
  cfg.a_diag << 0.7, -0.4, 0.2, 1.1;
  const SynthesisResult synth = synth_pair(cfg);
  Matrix rho = Matrix::Zero(4, 4);
  rho.diagonal() = cfg.spectrum.cast<Complex>();
  const BlockSplit split = BlockSplit::leading(4, 3);

  const BlockResiduals clean = block_invariance_residuals(
      synth.pair.hamiltonian.mat(), {synth.pair.lindblad.mat()}, rho, split);

  Matrix h = synth.pair.hamiltonian.mat();
  h(0, 3) += Complex(0.0, 0.1);
  h(3, 0) -= Complex(0.0, 0.1);
  const BlockResiduals bumped =
      block_invariance_residuals(h, {synth.pair.lindblad.mat()}, rho, split);

  CHECK(bumped.p > 0.01);
  CHECK(std::abs(bumped.s - clean.s) <= 1e-12);
  CHECK(std::abs(bumped.r - clean.r) <= 1e-12);
}

TEST_CASE("maximally mixed state with no dissipation has zero residuals") {
  CounterRng rng(88);
  const Index n = 4;
  const Matrix h = random_hermitian(rng, n).mat();
  const Matrix rho = Matrix::Identity(n, n) / static_cast<double>(n);
  const BlockResiduals res =
      block_invariance_residuals(h, {Matrix::Zero(n, n)}, rho, BlockSplit::leading(n, 2));
  CHECK(res.s == 0.0);
  CHECK(res.p == 0.0);
  CHECK(res.r == 0.0);
}

TEST_CASE("states with coupling blocks are rejected") {
  const Index n = 3;
  Matrix rho = Matrix::Zero(n, n);
  rho.diagonal() << 0.5, 0.3, 0.2;
  rho(0, 2) = Complex(1e-6, 0.0);
  rho(2, 0) = Complex(1e-6, 0.0);
  const Matrix h = Matrix::Zero(n, n);
  REQUIRE_THROWS_AS(block_invariance_residuals(h, {Matrix::Zero(n, n)}, rho, BlockSplit::leading(n, 2)),
                    NotBlockDiagonal);
}

TEST_CASE("generic two-level pairs break the pairwise equalities") {
  CounterRng rng(5150);
  for (int trial = 0; trial < 20; ++trial) {
    const SynthesisResult synth = synth_pair(random_config(rng, 2));
    const UniquenessReport report = uniqueness_conditions(synth.pair);
    CHECK(report.violated);
  }
}

TEST_CASE("flat spectrum with zero drift admits orthogonal silent pairs") {
  const Index n = 4;
  SynthesisConfig cfg;
  cfg.spectrum = RealVector::Constant(n, 1.0 / static_cast<double>(n));
  cfg.a_diag = RealVector::Zero(n);
  cfg.h_diag = RealVector::Zero(n);
  const SynthesisResult degenerate = synth_pair(cfg);
  const UniquenessReport silent = uniqueness_conditions(degenerate.pair);
  CHECK_FALSE(silent.violated);
  CHECK(silent.min_pair_overlap <= 1e-10);
  CHECK(silent.min_h_coupling <= 1e-10);

  // The same ladder with the automatic leading diagonal entry restores the obstruction.
  cfg.h_diag.reset();
  const SynthesisResult lifted = synth_pair(cfg);
  REQUIRE(lifted.auto_m);
  const UniquenessReport loud = uniqueness_conditions(lifted.pair);
  CHECK(loud.violated);
  CHECK(loud.min_h_coupling > 0.01);
}

TEST_CASE("broken equalities imply a one-dimensional kernel") {
  CounterRng rng(31102);
  int violated_count = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 4);
    SynthesisConfig cfg = random_config(rng, n);
    const SynthesisResult synth = synth_pair(cfg);
    const UniquenessReport report = uniqueness_conditions(synth.pair);
    if (!report.violated) continue;
    ++violated_count;
    const Liouvillian liou = build_liouvillian(synth.pair);
    CHECK(liou.kernel_basis.size() == 1);
  }
  CHECK(violated_count >= 20);
}

TEST_CASE("certificates for synthesized pairs") {
  CounterRng rng(9090);
  SynthesisConfig cfg = random_config(rng, 4);
  const SynthesisResult synth = synth_pair(cfg);
  Matrix rho = Matrix::Zero(4, 4);
  rho.diagonal() = cfg.spectrum.cast<Complex>();
  const DensityMatrix target = validate_density(rho);

  const Certificate cert = certify(target, synth.pair);
  CHECK(cert.gas);
  CHECK(cert.kernel_dim == 1);
  CHECK(cert.stationarity_residual < 1e-9);
  CHECK(cert.gap > 0.0);
  CHECK(cert.block_residuals.s <= 1e-11);
  CHECK(cert.block_residuals.p <= 1e-11);
  CHECK(cert.block_residuals.r <= 1e-11);
  CHECK(std::isfinite(cert.min_pair_overlap));
  CHECK(std::isfinite(cert.min_h_coupling));
}

TEST_CASE("null generator is certified as non-attracting") {
  const Index n = 4;
  const DensityMatrix target = validate_density(Matrix::Identity(n, n) / static_cast<double>(n));
  const Certificate cert =
      certify(target, Matrix::Zero(n, n), {Matrix::Zero(n, n)});
  CHECK_FALSE(cert.gas);
  CHECK(cert.kernel_dim == n * n);
  CHECK(cert.gap == 0.0);
  CHECK(cert.stationarity_residual == 0.0);
}

TEST_CASE("certifying against the wrong target reports the residual") {
  CounterRng rng(7777);
  SynthesisConfig cfg = random_config(rng, 3);
  const SynthesisResult synth = synth_pair(cfg);
  const DensityMatrix wrong = random_density(rng, 3);
  const Certificate cert = certify(wrong, synth.pair);
  CHECK(cert.stationarity_residual > 1e-4);
  CHECK_FALSE(cert.gas);
  // The kernel itself is still one-dimensional; only stationarity fails.
  CHECK(cert.kernel_dim == 1);
}

TEST_CASE("ambiguous kernel cuts mark the certificate indeterminate") {
  // Three decay ladders tied together by two weak links whose rates are picked so that
  // one singular value falls below the kernel threshold but within a factor ten of the
  // smallest one above it.
  const Index n = 6;
  Matrix damp = Matrix::Zero(n, n);
  damp(0, 1) = 1.0;
  damp(2, 3) = 1.0;
  damp(4, 5) = 1.0;

  const Liouvillian base = build_liouvillian(Matrix::Zero(n, n), {damp});
  const double cut = 1e-9 * base.singular_values(0);

  Matrix link_a = Matrix::Zero(n, n);
  link_a(0, 2) = std::sqrt(0.4 * cut);
  Matrix link_b = Matrix::Zero(n, n);
  link_b(0, 4) = std::sqrt(2.5 * cut);

  Matrix rho = Matrix::Zero(n, n);
  rho(0, 0) = 1.0;
  const DensityMatrix target = validate_density(rho);
  const Certificate cert =
      certify(target, Matrix::Zero(n, n), {damp, link_a, link_b});
  CHECK(cert.kernel_dim == -1);
  CHECK_FALSE(cert.gas);
  CHECK_FALSE(cert.notes.empty());
}

TEST_CASE("multi-channel certificates skip the eigenvector route") {
  CounterRng rng(4242);
  SynthesisConfig cfg = random_config(rng, 3);
  const SynthesisResult synth = synth_pair(cfg);
  Matrix rho = Matrix::Zero(3, 3);
  rho.diagonal() = cfg.spectrum.cast<Complex>();
  const DensityMatrix target = validate_density(rho);
  const Certificate cert = certify(target, synth.pair.hamiltonian.mat(),
                                   {synth.pair.lindblad.mat(), Matrix::Zero(3, 3)});
  CHECK(cert.gas);
  CHECK(cert.kernel_dim == 1);
  CHECK(std::isnan(cert.min_pair_overlap));
  CHECK(std::isnan(cert.min_h_coupling));
}

TEST_CASE("non-ladder channels fall back to kernel-only certification") {
  CounterRng rng(3131);
  const Index n = 3;
  // Dissipator built from a dense channel; certification must still settle the kernel.
  const Matrix l = random_operator(rng, n) * 0.5;
  const Liouvillian liou = build_liouvillian(Matrix::Zero(n, n), {l});
  const StationaryAnalysis analysis = stationary_states(liou);
  REQUIRE(analysis.unique);
  REQUIRE(analysis.steady.has_value());
  const LindbladPair pair{HermitianMatrix::zero(n), OperatorMatrix(l)};
  const Certificate cert = certify(*analysis.steady, pair);
  CHECK(cert.kernel_dim == 1);
  CHECK(std::isnan(cert.min_pair_overlap));
  CHECK(cert.notes.find("kernel-only") != std::string::npos);
}

TEST_CASE("positive certificates predict convergence in simulation") {
  CounterRng rng(606);
  SynthesisConfig cfg = random_config(rng, 3);
  const SynthesisResult synth = synth_pair(cfg);
  Matrix rho = Matrix::Zero(3, 3);
  rho.diagonal() = cfg.spectrum.cast<Complex>();
  const DensityMatrix target = validate_density(rho);
  const Certificate cert = certify(target, synth.pair);
  REQUIRE(cert.gas);
  REQUIRE(cert.gap > 0.0);

  const double horizon = 50.0 / cert.gap;
  const double dt = 0.25 / generator_norm_bound(synth.pair.hamiltonian.mat(), {synth.pair.lindblad.mat()});
  for (int seed = 0; seed < 5; ++seed) {
    CounterRng start_rng(derive_seed(606, static_cast<std::uint64_t>(seed)));
    const DensityMatrix start = random_density(start_rng, 3);
    const SimulationTrace trace = integrate(synth.pair, start, horizon, dt, &target, 41);
    REQUIRE_FALSE(trace.distances.empty());
    CHECK(trace.distances.back() < 1e-6);
  }
}
