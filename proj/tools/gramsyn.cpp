#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "gramsyn/certify.hpp"
#include "gramsyn/config.hpp"
#include "gramsyn/errors.hpp"
#include "gramsyn/freeze.hpp"
#include "gramsyn/io.hpp"
#include "gramsyn/synthesis.hpp"

namespace {

using namespace gramsyn;
using nlohmann::json;

// Stable CLI contract: 0 ok, 2 config, 3 numeric, 4 not admissible,
// 5 not converged.
int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax:
    case ErrorKind::UnknownIdentifier:
    case ErrorKind::Arity:
    case ErrorKind::Schema:
    case ErrorKind::InconsistentDimensions:
    case ErrorKind::GridMismatch:
    case ErrorKind::Io:
      return 2;
    case ErrorKind::Domain:
    case ErrorKind::NonFinite:
    case ErrorKind::SingularGramian:
    case ErrorKind::UndefinedBound:
    case ErrorKind::MaxOuterIterations:
      return 3;
    case ErrorKind::NotInRange:
    case ErrorKind::NotAdmissible:
    case ErrorKind::EmptyAdmissibleSet:
      return 4;
    case ErrorKind::NotConverged:
      return 5;
    case ErrorKind::NotGeneralModel:
      return 2;
  }
  return 3;
}

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  int which = 2;
  double theta = 0.5;
  std::uint64_t seed = 0;
  std::string control_file;
  std::string reference_file;
  std::string target_text;
  bool optimize_basis = false;
  bool force = false;
  int windows = 0;
};

Vec parse_vector(const std::string& text, int expected, const char* what) {
  Vec out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string cell =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str())
      fail(ErrorKind::Schema, std::string(what) + ": malformed number '" + cell + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (expected > 0 && static_cast<int>(out.size()) != expected)
    fail(ErrorKind::Schema,
         std::string(what) + " needs " + std::to_string(expected) + " components");
  return out;
}

Vec json_vector(const json& j, int expected, const char* what) {
  if (!j.is_array() || (expected > 0 && static_cast<int>(j.size()) != expected))
    fail(ErrorKind::Schema,
         std::string(what) + " must be an array of " + std::to_string(expected) + " numbers");
  Vec out;
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

Vec initial_state(const RunConfig& cfg) {
  if (cfg.run.is_object() && cfg.run.contains("x0"))
    return json_vector(cfg.run["x0"], cfg.model.dimension, "run.x0");
  return Vec(static_cast<std::size_t>(cfg.model.dimension), 0.0);
}

Vec target_state(const RunConfig& cfg, const Options& opt) {
  if (!opt.target_text.empty())
    return parse_vector(opt.target_text, cfg.model.dimension, "--target");
  if (cfg.run.is_object() && cfg.run.contains("target"))
    return json_vector(cfg.run["target"], cfg.model.dimension, "run.target");
  fail(ErrorKind::Schema, "a target is required (run.target or --target)");
}

PicardOptions picard_options(const RunConfig& cfg, const Options& opt, int nodes) {
  PicardOptions p;
  p.nodes = nodes;
  p.step = cfg.grid.integrator_step;
  p.theta = opt.theta;
  if (cfg.run.is_object()) {
    if (cfg.run.contains("max_iter")) p.max_iter = cfg.run["max_iter"].get<int>();
    if (cfg.run.contains("tol_fp")) p.tol_fp = cfg.run["tol_fp"].get<double>();
    if (cfg.run.contains("tol_endpoint")) p.tol_endpoint = cfg.run["tol_endpoint"].get<double>();
  }
  return p;
}

void emit(const json& payload, const std::string& out_dir, const std::string& filename) {
  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/" + filename;
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write report '" + path + "'");
  out << payload.dump(2) << "\n";
  std::cout << payload.dump(2) << std::endl;
}

json base_report(const char* command, const RunConfig& cfg, const Options& opt) {
  json j;
  j["command"] = command;
  j["config_hash"] = cfg.config_hash;
  j["which"] = opt.which;
  j["seed"] = opt.seed;
  j["grid"] = {{"nodes", cfg.grid.nodes}, {"integrator_step", cfg.grid.integrator_step}};
  return j;
}

bool is_zero_control(const ControlGrid& u) {
  for (double v : u.values())
    if (v != 0.0) return false;
  return true;
}

int cmd_simulate(const RunConfig& cfg, const Options& opt) {
  const SystemModel model = build_model(cfg.model);
  std::unique_ptr<Dynamics> general;
  const Dynamics* dyn = &model;
  if (model.is_general()) {
    general = general_dynamics(model);
    dyn = general.get();
  }

  ControlGrid u = opt.control_file.empty()
                      ? ControlGrid::zero(model.start_time(), model.end_time(), cfg.grid.nodes,
                                          model.inputs())
                      : io::read_control_csv(opt.control_file, model.start_time(),
                                             model.end_time(), cfg.grid.nodes, model.inputs());
  const Vec x0 = initial_state(cfg);
  const Trajectory traj = integrate_controlled(*dyn, u, x0, cfg.grid.integrator_step);

  std::filesystem::create_directories(opt.out_dir);
  io::write_trajectory_csv(opt.out_dir + "/trajectory.csv", traj);

  double sup = 0.0;
  for (std::size_t j = 0; j < traj.times.size(); ++j)
    sup = std::max(sup, norm2(traj.state(static_cast<int>(j))));

  json rep = base_report("simulate", cfg, opt);
  rep["endpoint"] = traj.back();
  rep["sup_norm"] = sup;
  rep["control"] = opt.control_file.empty() ? "zero" : opt.control_file;
  emit(rep, opt.out_dir, "summary.json");
  return 0;
}

int cmd_gramian(const RunConfig& cfg, const Options& opt) {
  const SystemModel model = build_model(cfg.model);
  if (model.is_general())
    fail(ErrorKind::Schema, "gramian applies to baseline models; use the freeze command");
  ControlGrid u = opt.control_file.empty()
                      ? ControlGrid::zero(model.start_time(), model.end_time(), cfg.grid.nodes,
                                          model.inputs())
                      : io::read_control_csv(opt.control_file, model.start_time(),
                                             model.end_time(), cfg.grid.nodes, model.inputs());
  const Vec x0 = initial_state(cfg);
  const GramianReport rep =
      assemble_gramian(model, u, x0, opt.which, cfg.grid.integrator_step);

  json out = base_report("gramian", cfg, opt);
  out["gramian"] = io::to_json(rep);

  if (opt.which == 2 && is_zero_control(u)) {
    const Mat w_ode = lyapunov_w2(model, x0, cfg.grid.integrator_step);
    const double denom = std::max(spectral_norm(rep.matrix), 1e-300);
    out["lyapunov_w2"] = io::to_json(w_ode);
    out["lyapunov_rel_diff"] = spectral_norm(w_ode - rep.matrix) / denom;
    out["congruence_residual"] =
        congruence_check(model, x0, cfg.grid.nodes, cfg.grid.integrator_step);
  }
  emit(out, opt.out_dir, "gramian.json");
  return 0;
}

int cmd_synthesize(const RunConfig& cfg, const Options& opt) {
  const SystemModel model = build_model(cfg.model);
  if (model.is_general())
    fail(ErrorKind::Schema, "synthesize applies to baseline models; use the freeze command");
  const Vec x0 = initial_state(cfg);
  const Vec x1 = target_state(cfg, opt);
  const TargetSpec spec =
      target_displacement(model, x0, x1, opt.which, cfg.grid.integrator_step);

  Certificate cert;
  if (!opt.reference_file.empty()) {
    const ControlGrid u_ref =
        io::read_control_csv(opt.reference_file, model.start_time(), model.end_time(),
                             cfg.grid.nodes, model.inputs());
    cert = certify_target(model, u_ref, spec, opt.theta, cfg.grid.integrator_step, false);
  } else {
    cert = zero_reference_certificate(model, x0, x1, opt.which, opt.theta, cfg.grid.nodes,
                                      cfg.grid.integrator_step);
  }

  json rep = base_report("synthesize", cfg, opt);
  rep["certificate"] = io::to_json(cert);
  rep["certified"] = cert.admissible;
  if (!cert.admissible && !opt.force) {
    rep["refused"] = true;
    emit(rep, opt.out_dir, "synthesis.json");
    return 4;
  }

  const PicardOptions popt = picard_options(cfg, opt, cfg.grid.nodes);
  const SynthesisResult result = picard_synthesize(model, spec, popt);
  rep["refused"] = false;
  rep["target"] = x1;
  rep["displacement"] = spec.y;
  rep["synthesis"] = io::to_json(result);
  std::filesystem::create_directories(opt.out_dir);
  io::write_control_csv(opt.out_dir + "/control.csv", result.control);
  emit(rep, opt.out_dir, "synthesis.json");
  return result.converged ? 0 : 5;
}

int cmd_certify(const RunConfig& cfg, const Options& opt) {
  const SystemModel model = build_model(cfg.model);
  if (model.is_general())
    fail(ErrorKind::Schema, "certify applies to baseline models; use the freeze command");
  const Vec x0 = initial_state(cfg);
  const double step = cfg.grid.integrator_step;

  const bool has_target =
      !opt.target_text.empty() || (cfg.run.is_object() && cfg.run.contains("target"));

  json rep = base_report("certify", cfg, opt);
  rep["theta"] = opt.theta;

  Certificate cert;
  if (opt.optimize_basis) {
    if (!cfg.run.is_object() || !cfg.run.contains("basis"))
      fail(ErrorKind::Schema, "--optimize-basis needs run.basis definitions");
    ReferenceSearchSpec search;
    for (const auto& fn : cfg.run["basis"]) {
      std::vector<expr::Expr> channels;
      if (!fn.is_array() || static_cast<int>(fn.size()) != model.inputs())
        fail(ErrorKind::Schema, "each basis entry needs one expression per input channel");
      for (const auto& e : fn)
        channels.push_back(expr::Expr::parse(e.get<std::string>(), 0));
      ControlGrid phi(model.start_time(), model.end_time(), cfg.grid.nodes, model.inputs());
      const Vec no_state;
      for (int j = 0; j < phi.nodes(); ++j)
        for (int c = 0; c < model.inputs(); ++c)
          phi.at(j, c) = channels[c].eval(phi.node_time(j), no_state);
      search.basis.push_back(std::move(phi));
    }
    if (cfg.run.contains("coeff_box")) search.coeff_box = cfg.run["coeff_box"].get<double>();
    if (cfg.run.contains("budget")) search.budget = cfg.run["budget"].get<int>();
    search.seed = opt.seed;
    auto [u_best, best_cert] =
        optimize_reference(model, x0, search, opt.which, opt.theta, step);
    if (has_target) {
      const Vec x1 = target_state(cfg, opt);
      const TargetSpec spec = target_displacement(model, x0, x1, opt.which, step);
      cert = certify_target(model, u_best, spec, opt.theta, step, false);
    } else {
      cert = best_cert;
    }
    std::filesystem::create_directories(opt.out_dir);
    io::write_control_csv(opt.out_dir + "/reference.csv", u_best);
    rep["optimized_reference"] = true;
  } else if (!opt.reference_file.empty()) {
    const ControlGrid u_ref = io::read_control_csv(
        opt.reference_file, model.start_time(), model.end_time(), cfg.grid.nodes, model.inputs());
    if (has_target) {
      const Vec x1 = target_state(cfg, opt);
      const TargetSpec spec = target_displacement(model, x0, x1, opt.which, step);
      cert = certify_target(model, u_ref, spec, opt.theta, step, false);
    } else {
      cert = admissible_radius(model, u_ref, x0, opt.which, opt.theta, step);
    }
  } else if (has_target) {
    const Vec x1 = target_state(cfg, opt);
    cert = zero_reference_certificate(model, x0, x1, opt.which, opt.theta, cfg.grid.nodes, step);
  } else {
    const ControlGrid zero =
        ControlGrid::zero(model.start_time(), model.end_time(), cfg.grid.nodes, model.inputs());
    cert = admissible_radius(model, zero, x0, opt.which, opt.theta, step);
  }

  rep["certificate"] = io::to_json(cert);
  emit(rep, opt.out_dir, "certificate.json");
  return 0;
}

int cmd_freeze(const RunConfig& cfg, const Options& opt) {
  const SystemModel model = build_model(cfg.model);
  if (!model.is_general())
    fail(ErrorKind::NotGeneralModel, "freeze needs a model with a modulation block");
  const Vec x0 = initial_state(cfg);
  const Vec x1 = target_state(cfg, opt);

  FreezeOptions fopt;
  fopt.inner = picard_options(cfg, opt, cfg.grid.nodes);
  fopt.theta = opt.theta;
  fopt.force = opt.force;
  if (cfg.run.is_object() && cfg.run.contains("freeze")) {
    const json& f = cfg.run["freeze"];
    if (f.contains("max_outer")) fopt.max_outer = f["max_outer"].get<int>();
    if (f.contains("tol_outer")) fopt.tol_outer = f["tol_outer"].get<double>();
    if (f.contains("damping")) fopt.damping = f["damping"].get<double>();
    if (f.contains("tol_endpoint_general"))
      fopt.tol_endpoint_general = f["tol_endpoint_general"].get<double>();
  }

  const FreezeResult result = freeze_iterate(model, x0, x1, fopt);
  json rep = base_report("freeze", cfg, opt);
  rep["target"] = x1;
  rep["freeze"] = io::to_json(result);
  std::filesystem::create_directories(opt.out_dir);
  io::write_control_csv(opt.out_dir + "/control.csv", result.control);
  io::write_trajectory_csv(opt.out_dir + "/frozen_trajectory.csv", result.z_star);
  emit(rep, opt.out_dir, "freeze.json");
  return result.converged ? 0 : 5;
}

int cmd_window(const RunConfig& cfg, const Options& opt) {
  const SystemModel model = build_model(cfg.model);
  if (model.is_general())
    fail(ErrorKind::Schema, "window applies to baseline models; use the freeze command");
  const Vec x0 = initial_state(cfg);
  const Vec x1 = target_state(cfg, opt);

  int n = opt.windows;
  if (n <= 0 && cfg.run.is_object() && cfg.run.contains("windows"))
    n = cfg.run["windows"].get<int>();
  if (n <= 0) n = 1;
  if ((cfg.grid.nodes - 1) % n != 0)
    fail(ErrorKind::Schema, "grid.nodes - 1 must be divisible by the window count");
  const int nodes_w = (cfg.grid.nodes - 1) / n + 1;

  const double dt_window = (cfg.model.T - cfg.model.t0) / n;
  json windows = json::array();
  double total_energy = 0.0;
  Vec state = x0;
  ControlGrid combined(cfg.model.t0, cfg.model.T, cfg.grid.nodes, model.inputs());
  bool all_converged = true;

  for (int w = 0; w < n; ++w) {
    ModelConfig sub = cfg.model;
    sub.t0 = cfg.model.t0 + w * dt_window;
    sub.T = cfg.model.t0 + (w + 1) * dt_window;
    const SystemModel wmodel = build_model(sub);

    // Straight-line waypoint in state space.
    Vec waypoint(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i)
      waypoint[i] = x0[i] + (x1[i] - x0[i]) * static_cast<double>(w + 1) / n;

    const Certificate cert = zero_reference_certificate(
        wmodel, state, waypoint, opt.which, opt.theta, nodes_w, cfg.grid.integrator_step);
    json wrep;
    wrep["index"] = w;
    wrep["start"] = state;
    wrep["waypoint"] = waypoint;
    wrep["certificate"] = io::to_json(cert);
    if (!cert.admissible && !opt.force) {
      wrep["refused"] = true;
      windows.push_back(std::move(wrep));
      json rep = base_report("window", cfg, opt);
      rep["windows"] = std::move(windows);
      rep["failed_window"] = w;
      emit(rep, opt.out_dir, "window.json");
      return 4;
    }

    const TargetSpec spec =
        target_displacement(wmodel, state, waypoint, opt.which, cfg.grid.integrator_step);
    PicardOptions popt = picard_options(cfg, opt, nodes_w);
    const SynthesisResult result = picard_synthesize(wmodel, spec, popt);
    wrep["synthesis"] = io::to_json(result);
    windows.push_back(std::move(wrep));
    if (!result.converged) {
      all_converged = false;
      json rep = base_report("window", cfg, opt);
      rep["windows"] = std::move(windows);
      rep["failed_window"] = w;
      emit(rep, opt.out_dir, "window.json");
      return 5;
    }

    total_energy += result.energy;
    state = result.endpoint;
    const int offset = w * (nodes_w - 1);
    for (int j = (w == 0 ? 0 : 1); j < nodes_w; ++j)
      for (int c = 0; c < model.inputs(); ++c)
        combined.at(offset + j, c) = result.control.at(j, c);
  }

  json rep = base_report("window", cfg, opt);
  rep["windows"] = std::move(windows);
  rep["window_count"] = n;
  rep["total_energy"] = total_energy;
  rep["final_endpoint"] = state;
  rep["endpoint_residual"] = norm2(vec_sub(state, x1));
  rep["converged"] = all_converged;
  std::filesystem::create_directories(opt.out_dir);
  io::write_control_csv(opt.out_dir + "/control.csv", combined);
  emit(rep, opt.out_dir, "window.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-dependent Gramian control synthesis"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", opt.config_path, "JSON configuration file")->required();
    cmd->add_option("--which", opt.which, "Gramian anchor: 1 (start) or 2 (end)")
        ->check(CLI::IsMember({1, 2}));
    cmd->add_option("--theta", opt.theta, "coercivity margin in (0,1)");
    cmd->add_option("--seed", opt.seed, "seed for randomized pieces");
    cmd->add_option("--out-dir", opt.out_dir, "directory for reports and signals");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "integrate the controlled system");
  add_common(simulate);
  simulate->add_option("--control", opt.control_file, "control CSV (defaults to u = 0)");

  CLI::App* gramian = app.add_subcommand("gramian", "assemble the trajectory-dependent Gramian");
  add_common(gramian);
  gramian->add_option("--control", opt.control_file, "control CSV (defaults to u = 0)");

  CLI::App* synthesize = app.add_subcommand("synthesize", "fixed-point steering control");
  add_common(synthesize);
  synthesize->add_option("--target", opt.target_text, "target state, comma separated");
  synthesize->add_option("--reference", opt.reference_file, "reference control CSV");
  synthesize->add_flag("--force", opt.force, "synthesize even when not certified");

  CLI::App* certify = app.add_subcommand("certify", "admissible radius and energy bound");
  add_common(certify);
  certify->add_option("--target", opt.target_text, "target state, comma separated");
  certify->add_option("--reference", opt.reference_file, "reference control CSV");
  certify->add_flag("--optimize-basis", opt.optimize_basis,
                    "maximize the radius over run.basis");

  CLI::App* freeze = app.add_subcommand("freeze", "outer freezing loop for modulated drift");
  add_common(freeze);
  freeze->add_option("--target", opt.target_text, "target state, comma separated");
  freeze->add_flag("--force", opt.force, "iterate even when not certified");

  CLI::App* window = app.add_subcommand("window", "concatenated per-window synthesis");
  add_common(window);
  window->add_option("--target", opt.target_text, "target state, comma separated");
  window->add_option("--windows", opt.windows, "number of equal windows");
  window->add_flag("--force", opt.force, "synthesize even when not certified");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_config(opt.config_path);
    if (simulate->parsed()) return cmd_simulate(cfg, opt);
    if (gramian->parsed()) return cmd_gramian(cfg, opt);
    if (synthesize->parsed()) return cmd_synthesize(cfg, opt);
    if (certify->parsed()) return cmd_certify(cfg, opt);
    if (freeze->parsed()) return cmd_freeze(cfg, opt);
    if (window->parsed()) return cmd_window(cfg, opt);
  } catch (const Error& e) {
    std::cerr << error_kind_name(e.kind()) << ": " << e.what() << std::endl;
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
  return 0;
}
