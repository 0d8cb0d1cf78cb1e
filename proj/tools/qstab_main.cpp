// qstab command-line front end: synthesis, certification, simulation, spectra,
// tridiagonal eigensolves, the feedback demo, and Monte-Carlo sweeps.
#include <algorithm>
#include <cstdint>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qstab/core.hpp"
#include "qstab/dynamics.hpp"
#include "qstab/errors.hpp"
#include "qstab/feedback.hpp"
#include "qstab/io.hpp"
#include "qstab/rng.hpp"
#include "qstab/synthesis.hpp"
#include "qstab/tridiag.hpp"
#include "qstab/verify.hpp"

namespace {

using namespace qstab;

// Everything a run needs, gathered before any work happens.
struct RunConfig {
  std::string subcommand;
  std::vector<double> spectrum;
  std::vector<double> a_diag;
  std::vector<double> h_diag;
  bool auto_m = false;
  double horizon = 0.0;
  double dt = 0.0;
  std::vector<std::uint64_t> seeds;
  std::string target_path;
  std::string pair_path;
  std::string initial_path;
  std::string matrix_path;
  std::string out_path;
  std::string out_target_path;
  std::string out_cert_path;
  std::string out_csv_path;
  Index max_points = 201;
  Index sweep_n = 4;
  int trials = 100;
  double p1 = 0.75;
  double m1 = 0.3;
  double m2 = -0.3;
  double m3 = 0.5;
  double m_couple = 1.0;
  double epsilon = 0.01;
};

RealVector to_vector(const std::vector<double>& v) {
  RealVector out(static_cast<Index>(v.size()));
  for (Index i = 0; i < out.size(); ++i) out(i) = v[static_cast<std::size_t>(i)];
  return out;
}

DensityMatrix diagonal_target(const RealVector& spectrum) {
  Matrix rho = Matrix::Zero(spectrum.size(), spectrum.size());
  for (Index i = 0; i < spectrum.size(); ++i) rho(i, i) = spectrum(i);
  return validate_density(rho);
}

SynthesisConfig build_config(const RunConfig& run) {
  SynthesisConfig cfg;
  if (!run.target_path.empty()) {
    cfg.spectrum = load_density(run.target_path).spectrum();
  } else if (!run.spectrum.empty()) {
    cfg.spectrum = to_vector(run.spectrum);
  } else {
    throw ConfigParse("provide --spectrum or --target");
  }
  const Index n = cfg.spectrum.size();
  cfg.a_diag = run.a_diag.empty() ? RealVector::Zero(n) : to_vector(run.a_diag);
  if (!run.h_diag.empty()) {
    cfg.h_diag = to_vector(run.h_diag);
  } else if (!run.auto_m) {
    throw ConfigParse("pass --auto-M or an explicit --h-diag list");
  }
  return cfg;
}

int run_synthesize(const RunConfig& run) {
  const SynthesisConfig cfg = build_config(run);
  const SynthesisResult result = synth_pair(cfg);
  save_pair(run.out_path, result, cfg);
  save_density(run.out_target_path, diagonal_target(cfg.spectrum));
  std::cout << "wrote " << run.out_path << " and " << run.out_target_path
            << " (M0 = " << format_double(result.m0) << ", M = " << format_double(result.m_used)
            << ", closed-form deviation = " << format_double(result.closed_form_max_dev) << ")\n";
  return 0;
}

int run_verify(const RunConfig& run) {
  const LindbladPair pair = load_pair(run.pair_path);
  const DensityMatrix target = load_density(run.target_path);
  const Certificate cert = certify(target, pair);
  save_certificate(run.out_path, cert);
  std::cout << "gas = " << (cert.gas ? "true" : "false") << ", kernel_dim = " << cert.kernel_dim
            << ", gap = " << format_double(cert.gap) << " -> " << run.out_path << '\n';
  return cert.gas ? 0 : 1;
}

int run_simulate(const RunConfig& run) {
  if (run.horizon <= 0.0) throw ConfigParse("horizon must be positive");
  const LindbladPair pair = load_pair(run.pair_path);
  const DensityMatrix target = load_density(run.target_path);
  if (target.dim() != pair.dim()) throw ConfigParse("target and pair dimensions differ");
  DensityMatrix initial = [&] {
    if (!run.initial_path.empty()) return load_density(run.initial_path);
    CounterRng rng(run.seeds.empty() ? 0 : run.seeds.front());
    return random_density(rng, pair.dim());
  }();
  if (initial.dim() != pair.dim()) throw ConfigParse("initial state and pair dimensions differ");
  double dt = run.dt;
  if (dt < 0.0) throw ConfigParse("dt must be positive");
  if (dt == 0.0) dt = default_step(pair, run.horizon);
  const SimulationTrace trace =
      integrate(pair, initial, run.horizon, dt, &target, run.max_points);
  save_trace_csv(run.out_path, trace, target);
  std::cout << "wrote " << run.out_path << " (" << trace.times.size()
            << " rows, final distance = " << format_double(trace.distances.back()) << ")\n";
  return 0;
}

int run_spectrum(const RunConfig& run) {
  const LindbladPair pair = load_pair(run.pair_path);
  const Liouvillian liou = build_liouvillian(pair);
  save_spectrum_csv(run.out_path, liou.eigenvalues);
  std::cout << "wrote " << run.out_path << " (" << liou.eigenvalues.size()
            << " eigenvalues, gap = " << format_double(spectral_gap(liou)) << ")\n";
  return 0;
}

int run_eigensolve(const RunConfig& run) {
  const Matrix m = load_matrix(run.matrix_path);
  const TridiagonalReal t = extract_tridiagonal(m);
  const EigenSystem es = eigensolve(t);
  const nlohmann::json j = eigensystem_to_json(es);
  if (run.out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    save_json(run.out_path, j);
    std::cout << "wrote " << run.out_path << " (" << es.eigenvalues.size() << " eigenvalues)\n";
  }
  return 0;
}

int run_feedback_demo(const RunConfig& run) {
  if (run.p1 <= 0.0 || run.p1 >= 1.0) throw ConfigParse("p1 must lie strictly between 0 and 1");
  if (run.epsilon <= 0.0) throw ConfigParse("epsilon must be positive");

  FeedbackSetup base = demo_setup();
  Matrix m = base.measurement.mat();
  m(0, 0) = run.m1;
  m(1, 1) = run.m2;
  m(0, 1) = run.m3;
  m(1, 0) = run.m3;
  m(1, 2) = run.m_couple;
  m(2, 1) = run.m_couple;
  base = make_setup(base.drift, base.noise, HermitianMatrix(m), base.split);

  Matrix qubit = Matrix::Zero(2, 2);
  qubit(0, 0) = run.p1;
  qubit(1, 1) = 1.0 - run.p1;
  DensityMatrix target = validate_density(qubit);

  if (std::abs(run.m3) <= 1e-12) {
    const PracticalStabilization moved = practical_stabilize(target, base, run.epsilon);
    std::cout << "measurement silent on the encoded levels; perturbed target by "
              << format_double(trace_distance(moved.target.mat(), target.mat())) << '\n';
    target = moved.target;
  }
  const FeedbackSetup fb = synth_feedback(target, base);
  const DensityMatrix embedded = embed_target(target, fb.split);
  const Certificate cert = certify(embedded, fme_hamiltonian(fb), fme_channels(fb));
  save_certificate(run.out_cert_path, cert);

  double horizon = run.horizon;
  if (horizon < 0.0) throw ConfigParse("horizon must be positive");
  // Default horizon targets full convergence but stays bounded for slow gaps.
  if (horizon == 0.0) horizon = cert.gap > 0.0 ? std::min(50.0 / cert.gap, 200.0) : 50.0;
  const double bound = generator_norm_bound(fme_hamiltonian(fb), fme_channels(fb));
  const double dt = bound > 0.0 ? 0.25 / bound : horizon / 100.0;
  const DensityMatrix start =
      validate_density(Matrix::Identity(4, 4) / 4.0);
  const SimulationTrace trace = integrate_fme(fb, start, horizon, dt, &embedded, run.max_points);
  save_trace_csv(run.out_csv_path, trace, embedded);

  std::cout << "gas = " << (cert.gas ? "true" : "false") << ", k_M = " << format_double(fb.k_m)
            << ", final distance = " << format_double(trace.distances.back()) << " -> "
            << run.out_cert_path << ", " << run.out_csv_path << '\n';
  return cert.gas ? 0 : 1;
}

struct SweepOutcome {
  int trial = 0;
  bool gas = false;
  double gap = 0.0;
};

SweepOutcome sweep_trial(std::uint64_t base_seed, Index n, int trial) {
  CounterRng rng(derive_seed(base_seed, static_cast<std::uint64_t>(trial)));
  SynthesisConfig cfg;
  cfg.spectrum = random_spectrum(rng, n);
  cfg.a_diag = RealVector(n);
  for (Index i = 0; i < n; ++i) cfg.a_diag(i) = rng.uniform(-2.0, 2.0);
  const SynthesisResult result = synth_pair(cfg);
  const Certificate cert = certify(diagonal_target(cfg.spectrum), result.pair);
  return {trial, cert.gas, cert.gap};
}

int run_sweep(const RunConfig& run) {
  if (run.trials < 1) throw ConfigParse("trials must be at least 1");
  if (run.sweep_n < 2) throw ConfigParse("n must be at least 2");
  const std::uint64_t seed = run.seeds.empty() ? 7 : run.seeds.front();

  std::vector<std::future<SweepOutcome>> futures;
  futures.reserve(static_cast<std::size_t>(run.trials));
  for (int t = 0; t < run.trials; ++t)
    futures.push_back(
        std::async(std::launch::async, sweep_trial, seed, run.sweep_n, t));
  std::vector<SweepOutcome> outcomes;
  outcomes.reserve(futures.size());
  for (auto& f : futures) outcomes.push_back(f.get());
  std::sort(outcomes.begin(), outcomes.end(),
            [](const SweepOutcome& a, const SweepOutcome& b) { return a.trial < b.trial; });

  int gas_count = 0;
  std::vector<double> gaps;
  nlohmann::json rows = nlohmann::json::array();
  for (const SweepOutcome& o : outcomes) {
    gas_count += o.gas ? 1 : 0;
    gaps.push_back(o.gap);
    rows.push_back({{"trial", o.trial},
                    {"seed", derive_seed(seed, static_cast<std::uint64_t>(o.trial))},
                    {"gas", o.gas},
                    {"gap", o.gap}});
  }
  std::sort(gaps.begin(), gaps.end());
  const std::size_t mid = gaps.size() / 2;
  const double median = gaps.size() % 2 == 1 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);

  nlohmann::json summary;
  summary["n"] = run.sweep_n;
  summary["trials"] = run.trials;
  summary["seed"] = seed;
  summary["gas_true_fraction"] = static_cast<double>(gas_count) / static_cast<double>(run.trials);
  summary["min_gap"] = gaps.front();
  summary["median_gap"] = median;
  summary["results"] = std::move(rows);

  if (run.out_path.empty()) {
    std::cout << summary.dump(2) << '\n';
  } else {
    save_json(run.out_path, summary);
    std::cout << "wrote " << run.out_path
              << " (gas fraction = " << summary["gas_true_fraction"].dump() << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lindblad pair synthesis, certification, and simulation"};
  app.require_subcommand(1);
  // Flat key = value run files; subcommand options use dotted keys (simulate.horizon=5),
  // lists stay comma-separated. fallthrough lets --config appear after the subcommand.
  app.set_config("--config")->configurable(false);
  app.fallthrough();

  RunConfig run;

  CLI::App* synth = app.add_subcommand("synthesize", "build (H, L) for a target spectrum");
  synth->add_option("--spectrum", run.spectrum, "target spectrum, descending")->delimiter(',');
  synth->add_option("--target", run.target_path, "density matrix file supplying the spectrum");
  synth->add_option("--a-diag", run.a_diag, "ladder diagonal entries")->delimiter(',');
  synth->add_option("--h-diag", run.h_diag, "Hamiltonian diagonal entries")->delimiter(',');
  synth->add_flag("--auto-M", run.auto_m, "choose the leading diagonal entry automatically");
  synth->add_option("--out", run.out_path, "pair output file (default: pair.json)");
  synth->add_option("--out-target", run.out_target_path, "target output file (default: target.json)");

  CLI::App* verify_cmd = app.add_subcommand("verify", "certify a pair against a target");
  verify_cmd->add_option("--pair", run.pair_path, "pair file")->required();
  verify_cmd->add_option("--target", run.target_path, "target density file")->required();
  verify_cmd->add_option("--out", run.out_path, "certificate output file");

  CLI::App* simulate = app.add_subcommand("simulate", "integrate the master equation");
  simulate->add_option("--pair", run.pair_path, "pair file")->required();
  simulate->add_option("--target", run.target_path, "target density file")->required();
  simulate->add_option("--initial", run.initial_path, "initial density file (default: seeded random)");
  simulate->add_option("--seed", run.seeds, "seed for the random initial state")->delimiter(',');
  simulate->add_option("--horizon", run.horizon, "integration horizon")->required();
  simulate->add_option("--dt", run.dt, "step size (default: stability-derived)");
  simulate->add_option("--max-points", run.max_points, "recorded grid budget");
  simulate->add_option("--out", run.out_path, "trace CSV output file");

  CLI::App* spectrum_cmd = app.add_subcommand("spectrum", "write the Liouvillian eigenvalues");
  spectrum_cmd->add_option("--pair", run.pair_path, "pair file")->required();
  spectrum_cmd->add_option("--out", run.out_path, "spectrum CSV output file");

  CLI::App* eigensolve_cmd = app.add_subcommand("eigensolve", "eigensystem of a ladder matrix");
  eigensolve_cmd->add_option("--matrix", run.matrix_path, "matrix file")->required();
  eigensolve_cmd->add_option("--out", run.out_path, "eigensystem JSON output (default: stdout)");

  CLI::App* demo = app.add_subcommand("feedback-demo", "run the bundled four-level demo");
  demo->add_option("--p1", run.p1, "larger target eigenvalue")->capture_default_str();
  demo->add_option("--m1", run.m1, "measurement entry on level 1")->capture_default_str();
  demo->add_option("--m2", run.m2, "measurement entry on level 2")->capture_default_str();
  demo->add_option("--m3", run.m3, "in-subspace measurement coupling")->capture_default_str();
  demo->add_option("--m-couple", run.m_couple, "subspace-complement coupling")->capture_default_str();
  demo->add_option("--epsilon", run.epsilon, "allowed target perturbation")->capture_default_str();
  demo->add_option("--horizon", run.horizon, "integration horizon (default: 50/gap)");
  demo->add_option("--max-points", run.max_points, "recorded grid budget");
  demo->add_option("--out-cert", run.out_cert_path, "certificate output (default: feedback_cert.txt)");
  demo->add_option("--out-csv", run.out_csv_path, "convergence CSV output (default: feedback_trace.csv)");

  CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo synthesis + certification");
  sweep->add_option("--n", run.sweep_n, "system dimension")->capture_default_str();
  sweep->add_option("--trials", run.trials, "number of trials")->capture_default_str();
  sweep->add_option("--seed", run.seeds, "base seed")->delimiter(',');
  sweep->add_option("--out", run.out_path, "summary JSON output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      run.subcommand = "synthesize";
      if (run.out_path.empty()) run.out_path = "pair.json";
      if (run.out_target_path.empty()) run.out_target_path = "target.json";
      return run_synthesize(run);
    }
    if (verify_cmd->parsed()) {
      run.subcommand = "verify";
      if (run.out_path.empty()) run.out_path = "certificate.txt";
      return run_verify(run);
    }
    if (simulate->parsed()) {
      run.subcommand = "simulate";
      if (run.out_path.empty()) run.out_path = "trace.csv";
      return run_simulate(run);
    }
    if (spectrum_cmd->parsed()) {
      run.subcommand = "spectrum";
      if (run.out_path.empty()) run.out_path = "spectrum.csv";
      return run_spectrum(run);
    }
    if (eigensolve_cmd->parsed()) {
      run.subcommand = "eigensolve";
      return run_eigensolve(run);
    }
    if (demo->parsed()) {
      run.subcommand = "feedback-demo";
      if (run.out_cert_path.empty()) run.out_cert_path = "feedback_cert.txt";
      if (run.out_csv_path.empty()) run.out_csv_path = "feedback_trace.csv";
      return run_feedback_demo(run);
    }
    if (sweep->parsed()) {
      run.subcommand = "sweep";
      return run_sweep(run);
    }
    throw ConfigParse("no subcommand selected");
  } catch (const ConfigParse& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoFailure& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
