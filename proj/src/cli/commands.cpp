#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gramstab/cli.hpp"

namespace gramstab::cli {
namespace {

using json = nlohmann::json;

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// NaN and infinities have no JSON spelling; they become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string cell(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::filesystem::path prepare(const CommandOptions& opts, const char* file) {
  std::filesystem::create_directories(opts.out_dir);
  return opts.out_dir / file;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kConfig, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kConfig, "failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
  spdlog::info("wrote {}", path.string());
}

StabilizerConfig with_omega(const RunConfig& cfg, double omega) {
  StabilizerConfig st = cfg.stabilizer;
  st.omega = omega;
  return st;
}

// One closed-loop run as configured, shared by stabilize and sweep so that a
// singleton sweep reproduces the stabilize summary.
struct ClosedLoopRun {
  Trajectory traj;
  VerificationReport decay;
  double allowance = 0.0;
  std::optional<double> fitted_rate;
};

ClosedLoopRun run_closed_loop(const RunConfig& cfg, const SystemModel& sys,
                              const GramianBundle& bundle) {
  const FeedbackLaw fb = feedback_gain(bundle, sys);
  Vector x0 = Vector::Zero(sys.state_dim());
  if (cfg.x0) {
    x0 = *cfg.x0;
  } else {
    x0(0) = 1.0;
  }
  const double horizon = cfg.horizon ? *cfg.horizon : 10.0 / bundle.omega;
  const double step = cfg.stabilizer.step > 0.0 ? cfg.stabilizer.step : default_step(sys, bundle, fb);

  ClosedLoopRun run;
  run.traj = simulate_direct(sys, bundle, fb, x0, horizon, step, cfg.integrator);
  const size_t steps = run.traj.size() - 1;
  const double h = steps > 0 ? run.traj.times[1] : 0.0;
  const double gen_norm = omega_operator_norm(bundle, sys.a + sys.b * fb.f_matrix);
  run.allowance = integrator_allowance(cfg.integrator, h, steps, gen_norm);
  run.decay = verify_decay(run.traj, bundle.omega, cfg.tolerances.decay + run.allowance);
  const bool fittable =
      run.traj.size() >= 10 &&
      std::all_of(run.traj.omega_norms.begin(), run.traj.omega_norms.end(),
                  [](double v) { return v > 0.0; });
  if (fittable) run.fitted_rate = fitted_decay_rate(run.traj);
  return run;
}

json report_json(const VerificationReport& report) {
  json residuals = json::object();
  json tolerances = json::object();
  for (const auto& [name, r] : report.residuals()) residuals[name] = number(r);
  for (const auto& [name, t] : report.tolerances()) tolerances[name] = number(t);
  return {{"residuals", residuals}, {"tolerances", tolerances},
          {"passed", report.passed()}, {"failed", report.failures()}};
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotObservable: return kNotObservable;
    case ErrorKind::kIllConditioned: return kIllConditioned;
    case ErrorKind::kDivergence: return kDecayViolated;
    default: return kConfigError;
  }
}

int cmd_gramian(const RunConfig& cfg, const CommandOptions& opts) {
  const SystemModel& sys = cfg.system;
  const GramianBundle bundle = build_bundle(sys, cfg.stabilizer);
  spdlog::info("{}: cond(Lambda) = {:.3e}, c1 = {:.6g}, c2 = {:.6g}", sys.name,
               bundle.cond_lambda, bundle.c1, bundle.c2);
  json doc = {
      {"system", sys.name},
      {"omega", bundle.omega},
      {"T", cfg.stabilizer.horizon},
      {"T_omega", bundle.t_omega},
      {"quadrature_order", bundle.quadrature_order},
      {"lambda", to_json(bundle.lambda)},
      {"m", to_json(bundle.m_matrix)},
      {"l", to_json(bundle.l_matrix)},
      {"c", to_json(bundle.c_matrix)},
      {"diagnostics",
       {{"c1", bundle.c1},
        {"c2", bundle.c2},
        {"cond_lambda", bundle.cond_lambda},
        {"riccati_residual", number(riccati_residual(bundle, sys))}}},
  };
  write_json(prepare(opts, "gramian.json"), doc);
  return kOk;
}

int cmd_stabilize(const RunConfig& cfg, const CommandOptions& opts) {
  const SystemModel& sys = cfg.system;
  const GramianBundle bundle = build_bundle(sys, cfg.stabilizer);
  const ClosedLoopRun run = run_closed_loop(cfg, sys, bundle);

  std::ostringstream csv;
  csv << "t";
  for (Eigen::Index i = 0; i < sys.state_dim(); ++i) csv << ",x_" << (i + 1);
  csv << ",omega_norm,bound\n";
  const double n0 = run.traj.omega_norms.front();
  for (size_t k = 0; k < run.traj.size(); ++k) {
    const double t = run.traj.times[k];
    csv << cell(t);
    for (Eigen::Index i = 0; i < sys.state_dim(); ++i) csv << ',' << cell(run.traj.states[k](i));
    csv << ',' << cell(run.traj.omega_norms[k]) << ','
        << cell(std::exp(-bundle.omega * t) * n0) << '\n';
  }
  const auto csv_path = prepare(opts, "trajectory.csv");
  write_text(csv_path, csv.str());
  spdlog::info("wrote {} ({} rows)", csv_path.string(), run.traj.size());

  json summary = report_json(run.decay);
  summary["system"] = sys.name;
  summary["omega"] = bundle.omega;
  summary["fitted_rate"] = run.fitted_rate ? number(*run.fitted_rate) : json(nullptr);
  summary["integrator_allowance"] = run.allowance;
  write_json(prepare(opts, "summary.json"), summary);

  if (run.fitted_rate) spdlog::info("fitted decay rate {:.6g}", *run.fitted_rate);
  if (!run.decay.passed()) {
    spdlog::error("decay bound violated: {}", run.decay.failures().front());
    return kDecayViolated;
  }
  return kOk;
}

int cmd_verify(const RunConfig& cfg, const CommandOptions& opts) {
  const SystemModel& sys = cfg.system;
  GramianBundle bundle = build_bundle(sys, cfg.stabilizer);
  if (opts.zero_c) {
    spdlog::warn("C replaced by 0; identities are expected to fail");
    bundle.c_matrix.setZero();
    bundle.l_matrix.setZero();
  }
  VerificationOptions vo;
  vo.seed = cfg.seed;
  vo.draws = cfg.draws;
  vo.decay_states = cfg.decay_states;
  vo.decay_samples = cfg.decay_samples;
  vo.tolerances = cfg.tolerances;
  const VerificationReport report = verify_all(sys, bundle, vo);

  json doc = report_json(report);
  doc["system"] = sys.name;
  doc["omega"] = bundle.omega;
  doc["seed"] = cfg.seed;
  write_json(prepare(opts, "report.json"), doc);

  for (const std::string& name : report.failures()) {
    spdlog::error("{} failed: residual {:.3e} > tolerance {:.3e}", name,
                  report.residuals().at(name), report.tolerances().at(name));
  }
  return report.passed() ? kOk : kVerificationFailed;
}

int cmd_sweep(const RunConfig& cfg, const CommandOptions& opts) {
  const SystemModel& sys = cfg.system;
  const std::vector<double> omegas =
      cfg.omegas.empty() ? std::vector<double>{cfg.stabilizer.omega} : cfg.omegas;

  int code = kOk;
  std::ostringstream csv;
  csv << "omega,T_omega,cond_lambda,c1,c2,riccati_residual,fitted_rate,decay_margin\n";
  for (double omega : omegas) {
    int row_code = kOk;
    try {
      const GramianBundle bundle = build_bundle(sys, with_omega(cfg, omega));
      const ClosedLoopRun run = run_closed_loop(cfg, sys, bundle);
      if (!run.fitted_rate) {
        throw Error(ErrorKind::kDegenerateFit, "trajectory too short to fit a rate");
      }
      const double rate = *run.fitted_rate;
      csv << cell(omega) << ',' << cell(bundle.t_omega) << ',' << cell(bundle.cond_lambda)
          << ',' << cell(bundle.c1) << ',' << cell(bundle.c2) << ','
          << cell(riccati_residual(bundle, sys)) << ',' << cell(rate) << ','
          << cell(rate - omega) << '\n';
      spdlog::info("omega {:g}: fitted rate {:.6g}, cond {:.3e}", omega, rate,
                   bundle.cond_lambda);
      if (!run.decay.passed() || !(rate >= omega)) {
        spdlog::error("omega {:g}: decay requirement not met", omega);
        row_code = kDecayViolated;
      }
    } catch (const Error& e) {
      spdlog::error("omega {:g}: {}", omega, e.what());
      row_code = exit_code_for(e.kind());
    }
    if (code == kOk) code = row_code;
  }
  const auto path = prepare(opts, "sweep.csv");
  write_text(path, csv.str());
  spdlog::info("wrote {}", path.string());
  return code;
}

int run(const std::string& command, const std::filesystem::path& config_path,
        const CommandOptions& opts, std::optional<std::uint64_t> seed) {
  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (command == "gramian") return cmd_gramian(cfg, opts);
    if (command == "stabilize") return cmd_stabilize(cfg, opts);
    if (command == "verify") return cmd_verify(cfg, opts);
    if (command == "sweep") return cmd_sweep(cfg, opts);
    spdlog::error("unknown command '{}'", command);
    return kConfigError;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
}

}  // namespace gramstab::cli
