#include "gramsyn/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "gramsyn/errors.hpp"

namespace gramsyn::io {

std::string format_full(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << "t";
  for (int i = 1; i <= traj.dimension; ++i) out << ",x" << i;
  out << "\n";
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    out << format_full(traj.times[j]);
    for (int i = 0; i < traj.dimension; ++i)
      out << ',' << format_full(traj.states[j * traj.dimension + i]);
    out << "\n";
  }
}

void write_control_csv(const std::string& path, const ControlGrid& u) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << "t";
  for (int c = 1; c <= u.inputs(); ++c) out << ",u" << c;
  out << "\n";
  for (int j = 0; j < u.nodes(); ++j) {
    out << format_full(u.node_time(j));
    for (int c = 0; c < u.inputs(); ++c) out << ',' << format_full(u.at(j, c));
    out << "\n";
  }
}

ControlGrid read_control_csv(const std::string& path, double t0, double T, int nodes, int k) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open control file '" + path + "'");
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) fail(ErrorKind::Schema, "control file '" + path + "' is empty");
  ++lineno;

  ControlGrid u(t0, T, nodes, k);
  int row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= nodes)
      fail(ErrorKind::GridMismatch, "control file has more than " + std::to_string(nodes) +
                                        " rows (line " + std::to_string(lineno) + ")");
    std::istringstream ss(line);
    std::string cellstr;
    for (int col = 0; col <= k; ++col) {
      if (!std::getline(ss, cellstr, ','))
        fail(ErrorKind::Schema, "control file row " + std::to_string(lineno) + ": expected " +
                                    std::to_string(k + 1) + " columns");
      char* end = nullptr;
      const double v = std::strtod(cellstr.c_str(), &end);
      if (end == cellstr.c_str() || !std::isfinite(v))
        fail(ErrorKind::Schema,
             "control file row " + std::to_string(lineno) + ": malformed number '" + cellstr +
                 "'");
      if (col == 0) {
        const double expected = u.node_time(row);
        if (std::abs(v - expected) > 1e-9 * (1.0 + std::abs(expected)))
          fail(ErrorKind::GridMismatch, "control file row " + std::to_string(lineno) +
                                            ": time " + cellstr + " off the configured grid");
      } else {
        u.at(row, col - 1) = v;
      }
    }
    ++row;
  }
  if (row != nodes)
    fail(ErrorKind::GridMismatch, "control file has " + std::to_string(row) + " rows, expected " +
                                      std::to_string(nodes));
  return u;
}

nlohmann::json to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const GramianReport& rep) {
  nlohmann::json j;
  j["which"] = rep.which;
  j["matrix"] = to_json(rep.matrix);
  j["eigenvalues"] = rep.eigenvalues;
  j["lambda_min"] = rep.lambda_min;
  j["lambda_min_nonzero"] = rep.lambda_min_nonzero;
  j["quadrature"] = {{"rule", rep.quadrature_rule}, {"samples", rep.sample_count}};
  if (rep.coercive_for)
    j["coercive_for"] = *rep.coercive_for;
  else
    j["coercive_for"] = nullptr;
  return j;
}

nlohmann::json to_json(const ContractionEstimate& est) {
  return {{"e0", est.e0},         {"e1_inf", est.e1_inf}, {"e2_inf", est.e2_inf},
          {"alpha1", est.alpha1}, {"alpha2", est.alpha2}, {"k", est.k}};
}

nlohmann::json to_json(const SynthesisResult& res) {
  nlohmann::json j;
  j["converged"] = res.converged;
  j["iterations"] = res.iterations;
  j["iterate_deltas"] = res.iterate_deltas;
  j["endpoint"] = res.endpoint;
  j["endpoint_residual"] = res.endpoint_residual;
  j["energy"] = res.energy;
  j["energy_quadrature"] = res.energy_quadrature;
  j["energy_identity_residual"] = res.energy_identity_residual;
  j["energy_identity_relative"] = res.energy_identity_relative;
  j["gramian"] = to_json(res.gramian);
  j["contraction"] = to_json(res.contraction);
  return j;
}

nlohmann::json to_json(const AlignmentReport& rep) {
  return {{"kernel_dimension", rep.kernel_dimension},
          {"k_norm_on_kernel", rep.k_norm_on_kernel},
          {"orthogonality_residual", rep.orthogonality_residual},
          {"tolerance", rep.tolerance},
          {"pass", rep.pass}};
}

nlohmann::json to_json(const Certificate& cert) {
  nlohmann::json j;
  j["which"] = cert.which;
  j["theta"] = cert.theta;
  j["lipschitz"] = cert.lipschitz;
  j["lipschitz_kind"] = cert.lipschitz_kind;
  j["zeta"] = cert.zeta;
  j["lambda_min_ref"] = cert.lambda_min_ref;
  j["reference_sup"] = cert.reference_sup;
  j["radius"] = std::isfinite(cert.radius) ? nlohmann::json(cert.radius) : nlohmann::json("inf");
  j["self_consistent"] = cert.self_consistent;
  if (cert.target_norm) j["target_norm"] = *cert.target_norm;
  j["admissible"] = cert.admissible;
  if (cert.energy_bound) j["energy_bound"] = *cert.energy_bound;
  if (!cert.note.empty()) j["note"] = cert.note;
  j["constants"] = {{"lambda1", cert.lambda1}, {"lambda2", cert.lambda2},
                    {"l_b", cert.l_b},         {"b_sup", cert.b_sup},
                    {"dt0", cert.dt0},         {"coercivity_c", cert.coercivity_c}};
  return j;
}

nlohmann::json to_json(const FreezeResult& res) {
  nlohmann::json j;
  j["converged"] = res.converged;
  j["outer_iterations"] = res.outer_iterations;
  j["outer_residuals"] = res.outer_residuals;
  j["endpoint_general"] = res.endpoint_general;
  j["endpoint_residual_general"] = res.endpoint_residual_general;
  j["energy"] = res.energy;
  j["initial_certificate"] = to_json(res.initial_certificate);
  j["last_inner"] = to_json(res.last_inner);
  return j;
}

}  // namespace gramsyn::io
