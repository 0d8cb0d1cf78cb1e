// io.hpp: serialization of matrices and pairs as JSON, certificates as flat key = value
// text, traces and spectra as CSV. Doubles are written in shortest round-trip form so
// identical runs produce identical bytes.
#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "qstab/core.hpp"
#include "qstab/errors.hpp"
#include "qstab/synthesis.hpp"
#include "qstab/tridiag.hpp"
#include "qstab/verify.hpp"

namespace qstab {

inline std::string format_double(double x) {
  char buf[64];
  const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  bool negative = false;
  if (begin < end && (*begin == '+' || *begin == '-')) {
    negative = *begin == '-';
    ++begin;
  }
  double value = 0.0;
  const std::from_chars_result res = std::from_chars(begin, end, value);
  if (res.ec != std::errc()) throw IoFailure("not a number: '" + text + "'");
  return negative ? -value : value;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace detail

inline nlohmann::json matrix_to_json(const Matrix& m) {
  detail::require_square(m, "matrix_to_json");
  nlohmann::json entries = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      entries.push_back({m(i, j).real(), m(i, j).imag()});
  return {{"dim", m.rows()}, {"entries", std::move(entries)}};
}

inline Matrix json_to_matrix(const nlohmann::json& j) {
  try {
    const Index n = j.at("dim").get<Index>();
    if (n < 1) throw IoFailure("matrix dimension must be positive");
    const nlohmann::json& entries = j.at("entries");
    if (static_cast<Index>(entries.size()) != n * n)
      throw IoFailure("matrix entry count does not match dim*dim");
    Matrix m(n, n);
    Index k = 0;
    for (Index i = 0; i < n; ++i)
      for (Index jj = 0; jj < n; ++jj, ++k)
        m(i, jj) = Complex(entries[k].at(0).get<double>(), entries[k].at(1).get<double>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure(std::string("malformed matrix record: ") + e.what());
  }
}

inline nlohmann::json density_to_json(const DensityMatrix& rho) {
  nlohmann::json j = matrix_to_json(rho.mat());
  j["spectrum"] =
      std::vector<double>(rho.spectrum().data(), rho.spectrum().data() + rho.spectrum().size());
  return j;
}

inline void save_json(const std::string& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoFailure("write to '" + path + "' failed");
}

inline nlohmann::json load_json(const std::string& path) {
  auto in = detail::open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure("malformed JSON in '" + path + "': " + e.what());
  }
}

inline void save_matrix(const std::string& path, const Matrix& m) { save_json(path, matrix_to_json(m)); }

inline Matrix load_matrix(const std::string& path) { return json_to_matrix(load_json(path)); }

inline void save_density(const std::string& path, const DensityMatrix& rho) {
  save_json(path, density_to_json(rho));
}

inline DensityMatrix load_density(const std::string& path) {
  return validate_density(json_to_matrix(load_json(path)), 1e-8);
}

inline nlohmann::json pair_to_json(const SynthesisResult& result, const SynthesisConfig& cfg) {
  nlohmann::json provenance;
  provenance["spectrum"] = std::vector<double>(cfg.spectrum.data(), cfg.spectrum.data() + cfg.spectrum.size());
  provenance["a_diag"] = std::vector<double>(cfg.a_diag.data(), cfg.a_diag.data() + cfg.a_diag.size());
  provenance["h_used"] =
      std::vector<double>(result.h_used.data(), result.h_used.data() + result.h_used.size());
  provenance["auto_M"] = result.auto_m;
  provenance["M0"] = result.m0;
  provenance["chosen_M"] = result.m_used;
  provenance["closed_form_max_dev"] = result.closed_form_max_dev;
  return {{"hamiltonian", matrix_to_json(result.pair.hamiltonian.mat())},
          {"lindblad", matrix_to_json(result.pair.lindblad.mat())},
          {"provenance", std::move(provenance)}};
}

inline LindbladPair json_to_pair(const nlohmann::json& j) {
  try {
    return LindbladPair{HermitianMatrix(json_to_matrix(j.at("hamiltonian")), 1e-8),
                        OperatorMatrix(json_to_matrix(j.at("lindblad")))};
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure(std::string("malformed pair record: ") + e.what());
  }
}

inline void save_pair(const std::string& path, const SynthesisResult& result, const SynthesisConfig& cfg) {
  save_json(path, pair_to_json(result, cfg));
}

inline LindbladPair load_pair(const std::string& path) { return json_to_pair(load_json(path)); }

inline nlohmann::json eigensystem_to_json(const EigenSystem& es) {
  const Index n = es.eigenvalues.size();
  nlohmann::json vectors = nlohmann::json::array();
  for (Index k = 0; k < n; ++k) {
    nlohmann::json column = nlohmann::json::array();
    for (Index i = 0; i < n; ++i) column.push_back(es.eigenvectors(i, k));
    vectors.push_back(std::move(column));
  }
  nlohmann::json j;
  j["eigenvalues"] = std::vector<double>(es.eigenvalues.data(), es.eigenvalues.data() + n);
  j["eigenvectors"] = std::move(vectors);
  return j;
}

inline std::pair<RealVector, RealMatrix> json_to_eigensystem(const nlohmann::json& j) {
  try {
    const std::vector<double> values = j.at("eigenvalues").get<std::vector<double>>();
    const Index n = static_cast<Index>(values.size());
    RealVector lambda(n);
    for (Index k = 0; k < n; ++k) lambda(k) = values[k];
    RealMatrix vectors(n, n);
    const nlohmann::json& cols = j.at("eigenvectors");
    if (static_cast<Index>(cols.size()) != n) throw IoFailure("eigenvector count mismatch");
    for (Index k = 0; k < n; ++k) {
      if (static_cast<Index>(cols[k].size()) != n) throw IoFailure("eigenvector length mismatch");
      for (Index i = 0; i < n; ++i) vectors(i, k) = cols[k][i].get<double>();
    }
    return {std::move(lambda), std::move(vectors)};
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure(std::string("malformed eigensystem record: ") + e.what());
  }
}

// Certificate text: one `key = value` line per field, fixed key order.
inline std::string certificate_to_text(const Certificate& cert) {
  std::ostringstream out;
  out << "stationarity_residual = " << format_double(cert.stationarity_residual) << '\n';
  out << "block_residuals = " << format_double(cert.block_residuals.s) << ", "
      << format_double(cert.block_residuals.p) << ", " << format_double(cert.block_residuals.r) << '\n';
  out << "kernel_dim = " << cert.kernel_dim << '\n';
  out << "gas = " << (cert.gas ? "true" : "false") << '\n';
  out << "min_pair_overlap = " << format_double(cert.min_pair_overlap) << '\n';
  out << "min_H_coupling = " << format_double(cert.min_h_coupling) << '\n';
  out << "gap = " << format_double(cert.gap) << '\n';
  std::string notes = cert.notes;
  for (char& c : notes)
    if (c == '\n' || c == '\r') c = ' ';
  out << "notes = " << notes << '\n';
  return out.str();
}

inline void save_certificate(const std::string& path, const Certificate& cert) {
  auto out = detail::open_out(path);
  out << certificate_to_text(cert);
  if (!out) throw IoFailure("write to '" + path + "' failed");
}

inline Certificate parse_certificate_text(const std::string& text) {
  Certificate cert;
  std::istringstream in(text);
  std::string line;
  bool seen[8] = {};
  auto mark = [&](int slot) {
    if (seen[slot]) throw IoFailure("duplicate certificate key");
    seen[slot] = true;
  };
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoFailure("certificate line without '=': " + line);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "stationarity_residual") {
      mark(0);
      cert.stationarity_residual = parse_double(value);
    } else if (key == "block_residuals") {
      mark(1);
      std::istringstream parts(value);
      std::string part;
      std::vector<double> vals;
      while (std::getline(parts, part, ',')) vals.push_back(parse_double(detail::trim(part)));
      if (vals.size() != 3) throw IoFailure("block_residuals must have three components");
      cert.block_residuals = {vals[0], vals[1], vals[2]};
    } else if (key == "kernel_dim") {
      mark(2);
      try {
        cert.kernel_dim = static_cast<Index>(std::stoll(value));
      } catch (const std::exception&) {
        throw IoFailure("kernel_dim must be an integer");
      }
    } else if (key == "gas") {
      mark(3);
      if (value != "true" && value != "false") throw IoFailure("gas must be true or false");
      cert.gas = value == "true";
    } else if (key == "min_pair_overlap") {
      mark(4);
      cert.min_pair_overlap = parse_double(value);
    } else if (key == "min_H_coupling") {
      mark(5);
      cert.min_h_coupling = parse_double(value);
    } else if (key == "gap") {
      mark(6);
      cert.gap = parse_double(value);
    } else if (key == "notes") {
      mark(7);
      cert.notes = value;
    } else {
      throw IoFailure("unknown certificate key: " + key);
    }
  }
  for (bool flag : seen)
    if (!flag) throw IoFailure("certificate is missing a required key");
  return cert;
}

inline Certificate load_certificate(const std::string& path) {
  auto in = detail::open_in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_certificate_text(buf.str());
}

struct TraceTable {
  std::vector<double> times;
  std::vector<double> distances;
  std::vector<double> fidelities;
  std::vector<std::vector<double>> populations;  // one row per grid point
};

// CSV columns: t, trace_distance, fidelity, p_1..p_N with populations taken in the
// target eigenbasis.
inline std::string trace_to_csv(const SimulationTrace& trace, const DensityMatrix& target) {
  const Matrix basis = target.eigenbasis();
  const Index n = target.dim();
  std::ostringstream out;
  out << "t,trace_distance,fidelity";
  for (Index i = 0; i < n; ++i) out << ",p_" << (i + 1);
  out << '\n';
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    const Matrix& rho = trace.states[k].mat();
    out << format_double(trace.times[k]) << ',' << format_double(trace_distance(rho, target.mat()))
        << ',' << format_double(fidelity(rho, target.mat()));
    const Matrix rotated = basis.adjoint() * rho * basis;
    for (Index i = 0; i < n; ++i) out << ',' << format_double(rotated(i, i).real());
    out << '\n';
  }
  return out.str();
}

inline void save_trace_csv(const std::string& path, const SimulationTrace& trace,
                           const DensityMatrix& target) {
  auto out = detail::open_out(path);
  out << trace_to_csv(trace, target);
  if (!out) throw IoFailure("write to '" + path + "' failed");
}

inline TraceTable parse_trace_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoFailure("trace CSV is empty");
  if (line.rfind("t,trace_distance,fidelity", 0) != 0)
    throw IoFailure("trace CSV header mismatch: " + line);
  TraceTable table;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    std::istringstream parts(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(parts, cell, ',')) row.push_back(parse_double(cell));
    if (row.size() < 4) throw IoFailure("trace CSV row too short: " + line);
    table.times.push_back(row[0]);
    table.distances.push_back(row[1]);
    table.fidelities.push_back(row[2]);
    table.populations.emplace_back(row.begin() + 3, row.end());
  }
  return table;
}

inline TraceTable load_trace_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace_csv_text(buf.str());
}

inline std::string spectrum_to_csv(const CVector& eigenvalues) {
  std::ostringstream out;
  out << "re,im\n";
  for (Index k = 0; k < eigenvalues.size(); ++k)
    out << format_double(eigenvalues(k).real()) << ',' << format_double(eigenvalues(k).imag()) << '\n';
  return out.str();
}

inline void save_spectrum_csv(const std::string& path, const CVector& eigenvalues) {
  auto out = detail::open_out(path);
  out << spectrum_to_csv(eigenvalues);
  if (!out) throw IoFailure("write to '" + path + "' failed");
}

inline CVector parse_spectrum_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "re,im")
    throw IoFailure("spectrum CSV header mismatch");
  std::vector<Complex> values;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoFailure("spectrum CSV row without comma: " + line);
    values.emplace_back(parse_double(line.substr(0, comma)), parse_double(line.substr(comma + 1)));
  }
  CVector v(static_cast<Index>(values.size()));
  for (Index k = 0; k < v.size(); ++k) v(k) = values[static_cast<std::size_t>(k)];
  return v;
}

inline CVector load_spectrum_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spectrum_csv_text(buf.str());
}

}  // namespace qstab
