#include "gramstab/closedloop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "gramstab/error.hpp"

namespace gramstab {
namespace {

void require_matching(const SystemModel& sys, const GramianBundle& bundle) {
  if (bundle.lambda.rows() != sys.state_dim() ||
      bundle.c_matrix.rows() != sys.state_dim()) {
    throw Error(ErrorKind::kDimension, "bundle does not match the system");
  }
}

void require_state(const SystemModel& sys, const Vector& v, const char* what) {
  if (v.size() != sys.state_dim()) {
    std::ostringstream os;
    os << what << " has size " << v.size() << ", expected " << sys.state_dim();
    throw Error(ErrorKind::kDimension, os.str());
  }
}

// Uniform grid 0 = t_0 < ... < t_N = horizon with spacing <= step.
std::vector<double> time_grid(double horizon, double step) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorKind::kDomain, "horizon must be non-negative");
  }
  if (!(step > 0.0)) throw Error(ErrorKind::kDomain, "step must be positive");
  if (horizon == 0.0) return {0.0};
  const auto steps = static_cast<size_t>(std::max(1.0, std::ceil(horizon / step - 1e-9)));
  const double h = horizon / static_cast<double>(steps);
  std::vector<double> grid(steps + 1);
  for (size_t k = 0; k <= steps; ++k) grid[k] = static_cast<double>(k) * h;
  grid.back() = horizon;
  return grid;
}

// Integrates x' = gen x over the grid; `observe` maps the internal state to
// the reported state.
template <typename Observe>
Trajectory integrate_linear(const GramianBundle& bundle, const Matrix& gen,
                            const Vector& start, const Vector& x0,
                            double horizon, double step, StepMode mode,
                            Observe observe) {
  Trajectory traj;
  traj.times = time_grid(horizon, step);
  traj.states.reserve(traj.times.size());
  traj.omega_norms.reserve(traj.times.size());
  traj.states.push_back(x0);
  traj.omega_norms.push_back(omega_norm(bundle, x0));
  if (traj.times.size() == 1) return traj;

  const double h = traj.times[1] - traj.times[0];
  Matrix propagator;
  if (mode == StepMode::kExact) propagator = transition_matrix(gen, h);
  Vector z = start;
  for (size_t k = 1; k < traj.times.size(); ++k) {
    if (mode == StepMode::kExact) {
      z = propagator * z;
    } else {
      const Vector k1 = gen * z;
      const Vector k2 = gen * (z + 0.5 * h * k1);
      const Vector k3 = gen * (z + 0.5 * h * k2);
      const Vector k4 = gen * (z + h * k3);
      z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!z.allFinite()) {
      std::ostringstream os;
      os << "state became non-finite at t = " << traj.times[k];
      throw Error(ErrorKind::kDivergence, os.str());
    }
    Vector x = observe(z);
    traj.omega_norms.push_back(omega_norm(bundle, x));
    traj.states.push_back(std::move(x));
  }
  return traj;
}

// Accumulates |lhs - sum(terms)| against the magnitude of every contribution.
class Balance {
 public:
  explicit Balance(double lhs) : lhs_(lhs), scale_(std::abs(lhs)) {}

  void term(double v) {
    rhs_ += v;
    scale_ += std::abs(v);
  }
  void integral_sample(double weight, double integrand) {
    rhs_ += weight * integrand;
    scale_ += std::abs(weight * integrand);
  }
  double residual() const {
    const double diff = std::abs(lhs_ - rhs_);
    if (diff == 0.0) return 0.0;
    return scale_ > 0.0 ? diff / scale_ : std::numeric_limits<double>::infinity();
  }

 private:
  double lhs_;
  double rhs_ = 0.0;
  double scale_;
};

double rule_rate(const SystemModel& sys, const GramianBundle& bundle) {
  return std::max(spectral_radius(sys.a),
                  spectral_radius(conjugated_generator(sys, bundle)));
}

TimeQuadrature rep_rule(const SystemModel& sys, const GramianBundle& bundle,
                        double t) {
  return time_quadrature(0.0, t, rule_rate(sys, bundle), bundle.quadrature_order,
                   bundle.panel_phase);
}

Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v / v.norm();
}

}  // namespace

void VerificationReport::add(const std::string& name, double residual,
                             double tolerance) {
  residuals_[name] = residual;
  tolerances_[name] = tolerance;
}

bool VerificationReport::passed() const { return failures().empty(); }

std::vector<std::string> VerificationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& [name, r] : residuals_) {
    if (!(r <= tolerances_.at(name))) out.push_back(name);
  }
  return out;
}

void VerificationReport::merge(const VerificationReport& other) {
  for (const auto& [name, r] : other.residuals_) {
    auto it = residuals_.find(name);
    if (it == residuals_.end() || !(r <= it->second)) {
      residuals_[name] = r;
    }
    tolerances_[name] = other.tolerances_.at(name);
  }
}

FeedbackLaw feedback_gain(const GramianBundle& bundle, const SystemModel& sys) {
  require_matching(sys, bundle);
  return {-bundle.lambda_factor.solve_columns(sys.b).transpose()};
}

Matrix conjugated_generator(const SystemModel& sys, const GramianBundle& bundle) {
  require_matching(sys, bundle);
  const Matrix& c = bundle.c_matrix;
  return -sys.a.transpose() - c.transpose() * (c * bundle.lambda);
}

Matrix conjugated_group(const SystemModel& sys, const GramianBundle& bundle,
                        double t) {
  return transition_matrix(conjugated_generator(sys, bundle), t);
}

Matrix closed_loop_group(const SystemModel& sys, const GramianBundle& bundle,
                         double t) {
  if (t == 0.0) return Matrix::Identity(sys.state_dim(), sys.state_dim());
  const Matrix v = conjugated_group(sys, bundle, t);
  // Lambda V Lambda^{-1} = Lambda (Lambda^{-1} V^T)^T, Lambda symmetric.
  const Matrix right = bundle.lambda_factor.solve_columns(v.transpose()).transpose();
  return bundle.lambda * right;
}

double omega_operator_norm(const GramianBundle& bundle, const Matrix& generator) {
  if (generator.rows() != bundle.lambda.rows() || generator.cols() != bundle.lambda.cols()) {
    throw Error(ErrorKind::kDimension, "generator does not match the bundle");
  }
  const Matrix r = bundle.lambda_factor.lower();
  const Matrix similar = r.triangularView<Eigen::Lower>().solve(generator * r);
  return Eigen::JacobiSVD<Matrix>(similar).singularValues()(0);
}

double default_step(const SystemModel& sys, const GramianBundle& bundle,
                    const FeedbackLaw& fb) {
  // The 1-norm of A + BF can exceed this by orders of magnitude when Lambda
  // is ill conditioned, which would only shrink the step for nothing.
  const double norm = omega_operator_norm(bundle, sys.a + sys.b * fb.f_matrix);
  return norm > 0.0 ? std::min(0.01, 0.1 / norm) : 0.01;
}

Trajectory simulate_direct(const SystemModel& sys, const GramianBundle& bundle,
                           const FeedbackLaw& fb, const Vector& x0,
                           double horizon, double step, StepMode mode) {
  require_matching(sys, bundle);
  require_state(sys, x0, "initial state");
  if (fb.f_matrix.rows() != sys.control_dim() ||
      fb.f_matrix.cols() != sys.state_dim()) {
    throw Error(ErrorKind::kDimension, "feedback has the wrong shape");
  }
  const Matrix gen = sys.a + sys.b * fb.f_matrix;
  return integrate_linear(bundle, gen, x0, x0, horizon, step, mode,
                          [](const Vector& z) { return z; });
}

Trajectory simulate_conjugated(const SystemModel& sys, const GramianBundle& bundle,
                               const Vector& x0, double horizon, double step,
                               StepMode mode) {
  require_matching(sys, bundle);
  require_state(sys, x0, "initial state");
  const Matrix gen = conjugated_generator(sys, bundle);
  const Vector y0 = bundle.lambda_factor.solve(x0);
  const Matrix& lam = bundle.lambda;
  return integrate_linear(bundle, gen, y0, x0, horizon, step, mode,
                          [&lam](const Vector& y) -> Vector { return lam * y; });
}

double omega_norm(const GramianBundle& bundle, const Vector& x) {
  if (x.size() != bundle.lambda.rows()) {
    throw Error(ErrorKind::kDimension, "state size does not match the bundle");
  }
  if (x.isZero(0.0)) return 0.0;
  return bundle.lambda_factor.lower_solve(x).norm();
}

double integrator_allowance(StepMode mode, double step, size_t steps,
                            double generator_norm) {
  const double n = static_cast<double>(steps);
  if (mode == StepMode::kExact) return n * 1e-13;
  const double z = step * generator_norm;
  // Taylor remainder of exp(z) after the degree-4 term, per step.
  return n * std::pow(z, 5) / 120.0 * std::exp(z);
}

VerificationReport verify_decay(const Trajectory& traj, double omega,
                                double tolerance) {
  if (traj.size() == 0 || traj.omega_norms.size() != traj.size()) {
    throw Error(ErrorKind::kDomain, "empty trajectory");
  }
  VerificationReport report;
  const double n0 = traj.omega_norms.front();
  double bound = 0.0;
  double monotone = 0.0;
  if (n0 > 0.0) {
    double prev = n0;
    for (size_t k = 1; k < traj.size(); ++k) {
      const double t = traj.times[k];
      const double nk = traj.omega_norms[k];
      bound = std::max(bound, (nk - std::exp(-omega * t) * n0) / n0);
      const double scaled = std::exp(omega * t) * nk;
      monotone = std::max(monotone, (scaled - prev) / n0);
      prev = scaled;
    }
  }
  report.add("decay_bound", bound, tolerance);
  report.add("decay_monotone", monotone, tolerance);
  return report;
}

double fitted_decay_rate(const Trajectory& traj) {
  if (traj.size() < 10) {
    throw Error(ErrorKind::kDegenerateFit, "need at least 10 samples");
  }
  double mean_t = 0.0;
  double mean_y = 0.0;
  std::vector<double> ys(traj.size());
  for (size_t k = 0; k < traj.size(); ++k) {
    if (!(traj.omega_norms[k] > 0.0)) {
      throw Error(ErrorKind::kDegenerateFit, "zero norm in the fit window");
    }
    ys[k] = -std::log(traj.omega_norms[k]);
    mean_t += traj.times[k];
    mean_y += ys[k];
  }
  const auto count = static_cast<double>(traj.size());
  mean_t /= count;
  mean_y /= count;
  double sxy = 0.0;
  double sxx = 0.0;
  for (size_t k = 0; k < traj.size(); ++k) {
    const double dt = traj.times[k] - mean_t;
    sxy += dt * (ys[k] - mean_y);
    sxx += dt * dt;
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::kDegenerateFit, "zero time spread");
  return sxy / sxx;
}

double verify_conjugation(const SystemModel& sys, const GramianBundle& bundle,
                          const FeedbackLaw& fb) {
  require_matching(sys, bundle);
  if (fb.f_matrix.rows() != sys.control_dim() ||
      fb.f_matrix.cols() != sys.state_dim()) {
    throw Error(ErrorKind::kDimension, "feedback has the wrong shape");
  }
  const Matrix closed = (sys.a + sys.b * fb.f_matrix) * bundle.lambda;
  const Matrix conj = bundle.lambda_factor.solve_columns(closed);
  const Matrix r = conj - conjugated_generator(sys, bundle);
  return r.norm() / (1.0 + sys.a.norm());
}

double psd_gap(const GramianBundle& bundle) {
  const Eigen::Index n = bundle.lambda.rows();
  const Matrix ctc = symmetrize(bundle.c_matrix.transpose() * bundle.c_matrix);
  const Matrix inv = symmetrize(bundle.lambda_factor.solve_columns(Matrix::Identity(n, n)));
  const EigExtremes gap = sym_eig_extremes(symmetrize(ctc - 2.0 * bundle.omega * inv));
  const double scale = sym_eig_extremes(ctc).max;
  if (!(scale > 0.0)) return gap.min < 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::max(0.0, -gap.min) / scale;
}

double verify_rep_u(const SystemModel& sys, const GramianBundle& bundle,
                    const Vector& x0, const Vector& y, double t) {
  require_matching(sys, bundle);
  require_state(sys, x0, "x0");
  require_state(sys, y, "y");
  const Vector ut_x0 = closed_loop_group(sys, bundle, t) * x0;
  const Vector et_x0 = transition_matrix(sys.a, t) * x0;
  Balance bal(ut_x0.dot(y));
  bal.term(et_x0.dot(y));
  const Matrix bt = sys.b.transpose();
  const TimeQuadrature q = rep_rule(sys, bundle, t);
  const GroupTable v_table(conjugated_generator(sys, bundle), q);
  const GroupTable adj_table(sys.a.transpose(), q);
  // Lambda^{-1} U(r) x0 = V(r) Lambda^{-1} x0. The nodes are symmetric in
  // [0, t], so t - r_k is node N - 1 - k.
  const Vector w0 = bundle.lambda_factor.solve(x0);
  const size_t count = q.size();
  for (size_t k = 0; k < count; ++k) {
    const Vector u = v_table.apply(k, w0);
    const Vector adj = adj_table.apply(count - 1 - k, y);
    bal.integral_sample(-q.weight(k), (bt * u).dot(bt * adj));
  }
  return bal.residual();
}

double verify_rep_l1(const SystemModel& sys, const GramianBundle& bundle,
                     const Vector& x, const Vector& y, double t) {
  require_matching(sys, bundle);
  require_state(sys, x, "x");
  require_state(sys, y, "y");
  const Matrix gen = conjugated_generator(sys, bundle);
  const Matrix minus_at = -sys.a.transpose();
  const Matrix bt = sys.b.transpose();
  Balance bal((bundle.lambda * x).dot(y));
  bal.term((bundle.lambda * (transition_matrix(gen, t) * x))
               .dot(transition_matrix(minus_at, t) * y));
  const TimeQuadrature q = rep_rule(sys, bundle, t);
  const GroupTable v_table(gen, q);
  const GroupTable e_table(minus_at, q);
  for (size_t k = 0; k < q.size(); ++k) {
    const Vector vx = v_table.apply(k, x);
    const Vector ey = e_table.apply(k, y);
    bal.integral_sample(q.weight(k), (bt * vx).dot(bt * ey));
  }
  return bal.residual();
}

double verify_rep_l2(const SystemModel& sys, const GramianBundle& bundle,
                     const Vector& x, const Vector& y, double t) {
  require_matching(sys, bundle);
  require_state(sys, x, "x");
  require_state(sys, y, "y");
  const Matrix gen = conjugated_generator(sys, bundle);
  const Matrix bt = sys.b.transpose();
  const Matrix c_lam = bundle.c_matrix * bundle.lambda;
  Balance bal((bundle.lambda * x).dot(y));
  const Matrix vt = transition_matrix(gen, t);
  bal.term((bundle.lambda * (vt * x)).dot(vt * y));
  const TimeQuadrature q = rep_rule(sys, bundle, t);
  const GroupTable v_table(gen, q);
  for (size_t k = 0; k < q.size(); ++k) {
    const Vector vx = v_table.apply(k, x);
    const Vector vy = v_table.apply(k, y);
    bal.integral_sample(q.weight(k), (bt * vx).dot(bt * vy));
    bal.integral_sample(q.weight(k), (c_lam * vx).dot(c_lam * vy));
  }
  return bal.residual();
}

double verify_rep_il(const SystemModel& sys, const GramianBundle& bundle,
                     const Vector& x, const Vector& y, double s, double t) {
  require_matching(sys, bundle);
  require_state(sys, x, "x");
  require_state(sys, y, "y");
  if (s > t) throw Error(ErrorKind::kDomain, "verify_rep_il needs s <= t");
  const double span = t - s;
  const SpdFactor& lam = bundle.lambda_factor;
  const Matrix bt = sys.b.transpose();
  const Matrix c_lam = bundle.c_matrix * bundle.lambda;
  const Matrix gen = conjugated_generator(sys, bundle);
  // U(r) = Lambda V(r) Lambda^{-1}, so Lambda^{-1} U(r) x = V(r) Lambda^{-1} x.
  const Vector lx = lam.solve(x);
  const Vector ly = lam.solve(y);
  Balance bal(lx.dot(y));
  const Matrix vspan = transition_matrix(gen, span);
  // U(span) y through closed_loop_group, which is the exact identity at 0.
  bal.term((vspan * lx).dot(closed_loop_group(sys, bundle, span) * y));
  const TimeQuadrature q = rep_rule(sys, bundle, span);
  const GroupTable v_table(gen, q);
  for (size_t k = 0; k < q.size(); ++k) {
    const Vector vx = v_table.apply(k, lx);
    const Vector vy = v_table.apply(k, ly);
    bal.integral_sample(q.weight(k), (bt * vx).dot(bt * vy));
    bal.integral_sample(q.weight(k), (c_lam * vx).dot(c_lam * vy));
  }
  return bal.residual();
}

double route_discrepancy(const Trajectory& direct, const Trajectory& conjugated) {
  if (direct.size() != conjugated.size()) {
    throw Error(ErrorKind::kDimension, "trajectories have different lengths");
  }
  double worst = 0.0;
  for (size_t k = 0; k < direct.size(); ++k) {
    const double scale = direct.states[k].norm();
    const double diff = (direct.states[k] - conjugated.states[k]).norm();
    if (scale > 0.0) {
      worst = std::max(worst, diff / scale);
    } else if (diff > 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return worst;
}

double representation_time_span(const GramianBundle& bundle) {
  return std::min(bundle.t_omega > 0.0 ? bundle.t_omega : 1.0 / bundle.omega,
                  1.0 / bundle.omega);
}

VerificationReport verify_all(const SystemModel& sys, const GramianBundle& bundle,
                              const VerificationOptions& opts) {
  require_matching(sys, bundle);
  const Tolerances& tol = opts.tolerances;
  const Eigen::Index n = sys.state_dim();
  const FeedbackLaw fb = feedback_gain(bundle, sys);
  VerificationReport report;

  report.add("riccati", riccati_residual(bundle, sys), tol.riccati);
  report.add("conjugation", verify_conjugation(sys, bundle, fb), tol.conjugation);
  report.add("psd_gap", psd_gap(bundle), tol.psd_gap);

  std::mt19937_64 rng(opts.seed);
  const double span = representation_time_span(bundle);
  std::uniform_real_distribution<double> time_dist(-span, span);
  double ri = integral_riccati_residual(bundle, sys, 0.0, 1, opts.seed);
  double rep_u = 0.0, rep_l1 = 0.0, rep_l2 = 0.0, rep_il = 0.0;
  for (int d = 0; d < opts.draws; ++d) {
    const Vector x = random_unit(rng, n);
    const Vector y = random_unit(rng, n);
    const double t = time_dist(rng);
    double s = time_dist(rng);
    double t2 = time_dist(rng);
    if (s > t2) std::swap(s, t2);
    ri = std::max(ri, integral_riccati_residual(bundle, sys, t, 1, opts.seed + 1 + d));
    rep_u = std::max(rep_u, verify_rep_u(sys, bundle, x, y, t));
    rep_l1 = std::max(rep_l1, verify_rep_l1(sys, bundle, x, y, t));
    rep_l2 = std::max(rep_l2, verify_rep_l2(sys, bundle, x, y, t));
    rep_il = std::max(rep_il, verify_rep_il(sys, bundle, x, y, s, t2));
  }
  report.add("integral_riccati", ri, tol.integral_riccati);
  report.add("rep_u", rep_u, tol.representation);
  report.add("rep_l1", rep_l1, tol.representation);
  report.add("rep_l2", rep_l2, tol.representation);
  report.add("rep_il", rep_il, tol.representation);

  const double horizon = opts.decay_horizon > 0.0 ? opts.decay_horizon : 10.0 / bundle.omega;
  const double step = horizon / std::max(1, opts.decay_samples);
  const double allowance = integrator_allowance(
      StepMode::kExact, step, static_cast<size_t>(opts.decay_samples), 0.0);
  double route = 0.0;
  double rate_deficit = 0.0;
  VerificationReport decay;
  for (int k = 0; k < opts.decay_states; ++k) {
    const Vector x0 = random_unit(rng, n);
    const Trajectory direct = simulate_direct(sys, bundle, fb, x0, horizon, step, StepMode::kExact);
    const Trajectory conj = simulate_conjugated(sys, bundle, x0, horizon, step, StepMode::kExact);
    route = std::max(route, route_discrepancy(direct, conj));
    decay.merge(verify_decay(direct, bundle.omega, tol.decay + allowance));
    const double rate = fitted_decay_rate(direct);
    rate_deficit = std::max(rate_deficit, (0.99 * bundle.omega - rate) / bundle.omega);
  }
  report.add("route_equivalence", route, tol.route);
  report.merge(decay);
  report.add("fitted_rate_deficit", rate_deficit, 0.0);
  return report;
}

}  // namespace gramstab
