#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qstab/core.hpp"
#include "qstab/dynamics.hpp"
#include "qstab/errors.hpp"
#include "qstab/feedback.hpp"
#include "qstab/rng.hpp"
#include "qstab/verify.hpp"

using namespace qstab;

namespace {

// Demo variant with the in-subspace coupling entry replaced.
FeedbackSetup demo_with_coupling(double coupling) {
  FeedbackSetup setup = demo_setup();
  Matrix m = setup.measurement.mat();
  m(0, 1) = coupling;
  m(1, 0) = coupling;
  return make_setup(setup.drift, setup.noise, HermitianMatrix(m), setup.split);
}

DensityMatrix qubit_state(double p1, Complex coherence) {
  Matrix rho(2, 2);
  rho << p1, coherence, std::conj(coherence), 1.0 - p1;
  return validate_density(rho);
}

}  // namespace

TEST_CASE("feedback scale and ladder entry at unit scale") {
  // Coupling chosen so the scale factor is exactly one.
  const double coupling = 0.5 * (std::sqrt(0.75) + std::sqrt(0.25));
  const FeedbackSetup fb = synth_feedback(demo_target(), demo_with_coupling(coupling));
  CHECK(fb.k_m == Catch::Approx(1.0).margin(1e-12));
  const Complex f3 = fb.feedback.mat()(0, 1);
  CHECK(f3.real() == Catch::Approx(0.0).margin(1e-12));
  CHECK(f3.imag() == Catch::Approx(0.5 * (std::sqrt(0.75) - std::sqrt(0.25))).margin(1e-12));
  CHECK(f3.imag() == Catch::Approx(0.18301270189221933).margin(1e-12));
}

TEST_CASE("balanced target produces no in-subspace feedback") {
  Matrix rho = 0.5 * Matrix::Identity(2, 2);
  const FeedbackSetup fb = synth_feedback(validate_density(rho), demo_setup());
  CHECK(std::abs(fb.feedback.mat()(0, 1)) <= 1e-13);
  CHECK(fb.k_m == Catch::Approx(2.0 * 0.5 / (2.0 * std::sqrt(0.5))).margin(1e-12));
}

TEST_CASE("effective channel on the subspace is the scaled ladder") {
  const FeedbackSetup fb = synth_feedback(demo_target(), demo_setup());
  const Matrix d = fb.measurement.mat() - Complex(0.0, 1.0) * fb.feedback.mat();
  const double s1 = std::sqrt(0.75);
  const double s2 = std::sqrt(0.25);
  Matrix expected(2, 2);
  expected << Complex(0.3), Complex(fb.k_m * s1), Complex(fb.k_m * s2), Complex(-0.3);
  CHECK((d.topLeftCorner(2, 2) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  // The drain block doubles the measurement coupling; nothing flows the other way.
  CHECK((d.topRightCorner(2, 2) - 2.0 * fb.measurement.mat().topRightCorner(2, 2)).norm() <= 1e-12);
  CHECK(d.bottomLeftCorner(2, 2).norm() <= 1e-12);
}

TEST_CASE("demo synthesis stabilizes the embedded target") {
  const FeedbackSetup fb = synth_feedback(demo_target(), demo_setup());
  CHECK(fb.k_m == Catch::Approx(2.0 * 0.5 / (std::sqrt(0.75) + std::sqrt(0.25))).margin(1e-12));

  const DensityMatrix embedded = embed_target(demo_target(), fb.split);
  CHECK(fme_generator(fb, embedded).mat().norm() <= 1e-10);

  const Certificate cert = certify(embedded, fme_hamiltonian(fb), fme_channels(fb));
  CHECK(cert.gas);
  CHECK(cert.kernel_dim == 1);
  CHECK(cert.gap > 0.0);
}

TEST_CASE("switching off measurement and feedback recovers the free evolution") {
  CounterRng rng(2024);
  const FeedbackSetup base = demo_setup();
  const FeedbackSetup off =
      make_setup(random_hermitian(rng, 4), base.noise, HermitianMatrix::zero(4), base.split);
  for (int trial = 0; trial < 10; ++trial) {
    const DensityMatrix rho = random_density(rng, 4);
    const Matrix via_fme = fme_generator(off, rho).mat();
    const Matrix direct =
        apply_generator_raw(off.drift.mat(), {off.noise.mat()}, rho.mat());
    CHECK((via_fme - direct).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("noiseless subspace holds states without leakage") {
  const FeedbackSetup base = demo_setup();
  const FeedbackSetup off =
      make_setup(HermitianMatrix::zero(4), base.noise, HermitianMatrix::zero(4), base.split);
  const DensityMatrix rho0 = embed_target(qubit_state(0.6, Complex(0.2, 0.1)), base.split);
  const SimulationTrace trace = integrate_fme(off, rho0, 10.0, nullptr, 51);
  double worst = 0.0;
  for (const DensityMatrix& state : trace.states) {
    const double leak = state.mat().bottomRightCorner(2, 2).trace().real();
    worst = std::max(worst, leak);
  }
  CHECK(worst < 1e-10);
  // With zero drift and zero noise eigenvalue the subspace state does not move at all.
  CHECK(trace_distance(trace.states.back().mat(), rho0.mat()) <= 1e-9);
}

TEST_CASE("states in the complement flow toward the subspace") {
  const FeedbackSetup fb = synth_feedback(demo_target(), demo_setup());
  Matrix rho = Matrix::Zero(4, 4);
  rho(2, 2) = 1.0;
  const Matrix flow = fme_generator(fb, validate_density(rho)).mat();
  CHECK(flow.topLeftCorner(2, 2).trace().real() > 0.1);
}

TEST_CASE("attractivity check keys on the coupling block") {
  const BlockSplit split = BlockSplit::leading(4, 2);
  Matrix block_diag = Matrix::Zero(4, 4);
  block_diag(0, 0) = 1.0;
  block_diag(0, 1) = 0.5;
  block_diag(1, 0) = 0.5;
  block_diag(2, 3) = Complex(0.0, 1.0);
  block_diag(3, 2) = Complex(0.0, -1.0);
  CHECK_FALSE(check_feedback_attractivity(split, HermitianMatrix(block_diag)));
  CHECK_FALSE(check_feedback_attractivity(split, HermitianMatrix(Matrix::Identity(4, 4))));
  CHECK(check_feedback_attractivity(split, demo_setup().measurement));
}

TEST_CASE("fully decoupled measurements are rejected") {
  const FeedbackSetup base = demo_setup();
  Matrix m = Matrix::Zero(4, 4);
  m.diagonal() << 0.3, -0.3, 0.1, 0.2;
  const FeedbackSetup decoupled = make_setup(base.drift, base.noise, HermitianMatrix(m), base.split);
  REQUIRE_THROWS_AS(synth_feedback(demo_target(), decoupled), MeasurementDecoupled);

  // Coupling into the complement exists, but the encoded levels stay silent.
  Matrix m2 = m;
  m2(1, 2) = 1.0;
  m2(2, 1) = 1.0;
  const FeedbackSetup silent = make_setup(base.drift, base.noise, HermitianMatrix(m2), base.split);
  REQUIRE_THROWS_AS(synth_feedback(demo_target(), silent), MeasurementDecoupled);
}

TEST_CASE("practical stabilization leaves coupled targets untouched") {
  const FeedbackSetup base = demo_setup();
  const DensityMatrix target = demo_target();
  const PracticalStabilization fixed = practical_stabilize(target, base, 0.01);
  CHECK((fixed.target.mat() - target.mat()).norm() == 0.0);
  CHECK(fixed.setup.k_m == base.k_m);
}

TEST_CASE("practical stabilization tilts a silent target into coupling") {
  const FeedbackSetup base = demo_setup();
  Matrix m = base.measurement.mat();
  m(0, 1) = 0.0;
  m(1, 0) = 0.0;
  const FeedbackSetup silent = make_setup(base.drift, base.noise, HermitianMatrix(m), base.split);
  const DensityMatrix target = demo_target();

  const PracticalStabilization moved = practical_stabilize(target, silent, 0.01);
  CHECK(trace_distance(moved.target.mat(), target.mat()) <= 0.01 + 1e-12);
  CHECK(trace_distance(moved.target.mat(), target.mat()) > 1e-4);

  const FeedbackSetup fb = synth_feedback(moved.target, moved.setup);
  CHECK(fb.k_m > 0.0);
  const DensityMatrix embedded = embed_target(moved.target, base.split);
  CHECK(fme_generator(fb, embedded).mat().norm() <= 1e-10);
  const Certificate cert = certify(embedded, fme_hamiltonian(fb), fme_channels(fb));
  CHECK(cert.gas);
  CHECK(trace_distance(embedded.mat(), embed_target(target, base.split).mat()) <= 0.01 + 1e-12);
}

TEST_CASE("degenerate measurements cannot be tilted into coupling") {
  const FeedbackSetup base = demo_setup();
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = 0.5;
  m(1, 1) = 0.5;
  m(2, 2) = 0.1;
  const FeedbackSetup degenerate = make_setup(base.drift, base.noise, HermitianMatrix(m), base.split);
  REQUIRE_THROWS_AS(practical_stabilize(demo_target(), degenerate, 0.01), DegenerateMeasurement);
}

TEST_CASE("degenerate targets pick a coupled eigenbasis automatically") {
  const FeedbackSetup base = demo_setup();
  Matrix m = base.measurement.mat();
  m(0, 1) = 0.0;
  m(1, 0) = 0.0;
  const FeedbackSetup silent = make_setup(base.drift, base.noise, HermitianMatrix(m), base.split);
  const DensityMatrix mixed = validate_density(0.5 * Matrix::Identity(2, 2));

  const FeedbackSetup fb = synth_feedback(mixed, silent);
  CHECK(fb.k_m == Catch::Approx(2.0 * 0.3 / (2.0 * std::sqrt(0.5))).margin(1e-10));
  const DensityMatrix embedded = embed_target(mixed, base.split);
  CHECK(fme_generator(fb, embedded).mat().norm() <= 1e-10);
  const Certificate cert = certify(embedded, fme_hamiltonian(fb), fme_channels(fb));
  CHECK(cert.gas);
}

TEST_CASE("setup validation enforces the noiseless-subspace premise") {
  Matrix bad_s = Matrix::Zero(4, 4);
  bad_s(0, 0) = 1.0;  // not scalar on the subspace
  bad_s(2, 2) = 1.0;
  REQUIRE_THROWS_AS(make_setup(HermitianMatrix::zero(4), OperatorMatrix(bad_s),
                               HermitianMatrix::zero(4), BlockSplit::leading(4, 2)),
                    std::invalid_argument);

  Matrix bad_q = Matrix::Zero(4, 4);
  bad_q(2, 0) = 0.5;  // maps the subspace into the complement
  REQUIRE_THROWS_AS(make_setup(HermitianMatrix::zero(4), OperatorMatrix(bad_q),
                               HermitianMatrix::zero(4), BlockSplit::leading(4, 2)),
                    std::invalid_argument);

  REQUIRE_THROWS_AS(make_setup(HermitianMatrix::zero(4), OperatorMatrix(Matrix::Zero(4, 4)),
                               HermitianMatrix::zero(4), BlockSplit::leading(4, 3)),
                    DimensionMismatch);
  REQUIRE_THROWS_AS(make_setup(HermitianMatrix::zero(3), OperatorMatrix(Matrix::Zero(4, 4)),
                               HermitianMatrix::zero(4), BlockSplit::leading(4, 2)),
                    DimensionMismatch);
}

TEST_CASE("dimension mismatches in the closed loop are rejected") {
  const FeedbackSetup base = demo_setup();
  REQUIRE_THROWS_AS(fme_generator(base, demo_target()), DimensionMismatch);
  REQUIRE_THROWS_AS(embed_target(validate_density(Matrix::Identity(3, 3) / 3.0), base.split),
                    DimensionMismatch);
}

TEST_CASE("closed loop drives generic states to the embedded target") {
  const FeedbackSetup fb = synth_feedback(demo_target(), demo_setup());
  const DensityMatrix embedded = embed_target(demo_target(), fb.split);
  const Certificate cert = certify(embedded, fme_hamiltonian(fb), fme_channels(fb));
  REQUIRE(cert.gas);
  REQUIRE(cert.gap > 0.0);

  const double horizon = 50.0 / cert.gap;
  const double dt = 0.25 / generator_norm_bound(fme_hamiltonian(fb), fme_channels(fb));
  CounterRng rng(3407);
  for (int seed = 0; seed < 3; ++seed) {
    const DensityMatrix start = random_density(rng, 4);
    const SimulationTrace trace = integrate_fme(fb, start, horizon, dt, &embedded, 41);
    REQUIRE_FALSE(trace.distances.empty());
    CHECK(trace.distances.back() < 1e-6);
  }
}
