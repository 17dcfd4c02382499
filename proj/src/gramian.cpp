#include "gramstab/gramian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "gramstab/error.hpp"

namespace gramstab {
namespace {

struct GramianIntegrals {
  Matrix lambda;      // weight e
  Matrix m_matrix;    // weight -e'
  Matrix unweighted;  // weight 1 on [0, T]
};

// Single pass over the Gauss-Legendre nodes of [0, T] and [T, T_w]. The first
// piece also feeds the unweighted Gramian used for the observability constants.
// Nodes are visited in a fixed order so results are bit-reproducible.
GramianIntegrals integrate(const SystemModel& sys, const StabilizerConfig& cfg) {
  sys.validate();
  cfg.validate();
  const WeightFunction weight(cfg.omega, cfg.horizon);
  const Eigen::Index n = sys.state_dim();
  const Matrix minus_a = -sys.a;
  const double rate = spectral_radius(sys.a);

  GramianIntegrals out{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
  const double breaks[3] = {0.0, weight.horizon(), weight.t_omega()};
  for (int piece = 0; piece < 2; ++piece) {
    const double lo = breaks[piece];
    const double hi = breaks[piece + 1];
    const TimeQuadrature q =
        time_quadrature(lo, hi, rate, cfg.quadrature_order, cfg.panel_phase);
    const GroupTable table(minus_a, q);
    for (size_t k = 0; k < q.size(); ++k) {
      const double s = q.node(k);
      const double w = q.weight(k);
      const Matrix eb = table.apply(k, sys.b);
      const Matrix g = eb * eb.transpose();
      out.lambda.noalias() += (w * weight.value(s)) * g;
      out.m_matrix.noalias() += (-w * weight.derivative(s)) * g;
      if (piece == 0) out.unweighted.noalias() += w * g;
    }
  }
  out.lambda = symmetrize(out.lambda);
  out.m_matrix = symmetrize(out.m_matrix);
  out.unweighted = symmetrize(out.unweighted);
  return out;
}

ObservabilityConstants extremes_of(const Matrix& unweighted) {
  const EigExtremes ext = sym_eig_extremes(unweighted);
  return {std::max(ext.max, 0.0), std::max(ext.min, 0.0)};
}

void require_observable(const ObservabilityConstants& oc,
                        const StabilizerConfig& cfg) {
  if (!(oc.c1 > 0.0) || oc.c2 / oc.c1 < cfg.observability_ratio) {
    std::ostringstream os;
    os << "observability constants c1 = " << oc.c1 << ", c2 = " << oc.c2
       << " (ratio below " << cfg.observability_ratio << ")";
    throw Error(ErrorKind::kNotObservable, os.str());
  }
}

Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v / v.norm();
}

}  // namespace

void StabilizerConfig::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw Error(ErrorKind::kConfig, "omega must be positive");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorKind::kConfig, "observability horizon T must be positive");
  }
  if (quadrature_order < 1) {
    throw Error(ErrorKind::kConfig, "quadrature order must be positive");
  }
  if (!(panel_phase > 0.0)) {
    throw Error(ErrorKind::kConfig, "panel phase must be positive");
  }
  if (step < 0.0) throw Error(ErrorKind::kConfig, "step must be non-negative");
  if (!(cond_guard > 1.0)) throw Error(ErrorKind::kConfig, "cond guard must exceed 1");
}

WeightFunction::WeightFunction(double omega, double horizon)
    : omega_(omega), horizon_(horizon), t_omega_(horizon + 1.0 / (2.0 * omega)) {
  if (!(omega > 0.0) || !(horizon > 0.0)) {
    throw Error(ErrorKind::kDomain, "weight needs omega > 0 and T > 0");
  }
}

double WeightFunction::value(double s) const {
  if (s < 0.0 || s > t_omega_) {
    throw Error(ErrorKind::kDomain, "weight evaluated outside [0, T_omega]");
  }
  if (s <= horizon_) return std::exp(-2.0 * omega_ * s);
  return 2.0 * omega_ * std::exp(-2.0 * omega_ * horizon_) * (t_omega_ - s);
}

double WeightFunction::derivative(double s) const {
  if (s < 0.0 || s > t_omega_) {
    throw Error(ErrorKind::kDomain, "weight derivative outside [0, T_omega]");
  }
  if (s == horizon_) {
    throw Error(ErrorKind::kKink, "weight derivative undefined at s = T");
  }
  if (s < horizon_) return -2.0 * omega_ * std::exp(-2.0 * omega_ * s);
  return -2.0 * omega_ * std::exp(-2.0 * omega_ * horizon_);
}

ObservabilityConstants observability_constants(const SystemModel& sys,
                                               double horizon,
                                               const StabilizerConfig& cfg) {
  sys.validate();
  if (!(horizon > 0.0)) {
    throw Error(ErrorKind::kDomain, "observability horizon must be positive");
  }
  const Eigen::Index n = sys.state_dim();
  const Matrix minus_a = -sys.a;
  const TimeQuadrature q = time_quadrature(0.0, horizon, spectral_radius(sys.a),
                                           cfg.quadrature_order, cfg.panel_phase);
  const GroupTable table(minus_a, q);
  Matrix g = Matrix::Zero(n, n);
  for (size_t k = 0; k < q.size(); ++k) {
    const Matrix eb = table.apply(k, sys.b);
    g.noalias() += q.weight(k) * (eb * eb.transpose());
  }
  return extremes_of(symmetrize(g));
}

Matrix compute_gramian(const SystemModel& sys, const StabilizerConfig& cfg) {
  GramianIntegrals ints = integrate(sys, cfg);
  require_observable(extremes_of(ints.unweighted), cfg);
  SpdFactor check(ints.lambda, cfg.cond_guard);
  return ints.lambda;
}

Matrix compute_derivative_gramian(const SystemModel& sys,
                                  const StabilizerConfig& cfg) {
  return integrate(sys, cfg).m_matrix;
}

GramianBundle assemble_bundle(const Matrix& lambda, const Matrix& m_matrix,
                              double omega, double cond_guard) {
  if (lambda.rows() != m_matrix.rows() || lambda.cols() != m_matrix.cols()) {
    throw Error(ErrorKind::kDimension, "Lambda and M must have the same shape");
  }
  GramianBundle b;
  b.omega = omega;
  b.lambda = symmetrize(lambda);
  b.m_matrix = symmetrize(m_matrix);
  b.lambda_factor = SpdFactor(b.lambda, cond_guard);
  b.cond_lambda = b.lambda_factor.cond();
  // L = Lambda^{-1} M Lambda^{-1} through two solves; M is symmetric, so the
  // transpose of Lambda^{-1} M is M Lambda^{-1}.
  const Matrix left = b.lambda_factor.solve_columns(b.m_matrix);
  b.l_matrix = symmetrize(b.lambda_factor.solve_columns(left.transpose()));
  b.c_matrix = sym_sqrt(b.l_matrix);
  return b;
}

GramianBundle build_bundle(const SystemModel& sys, const StabilizerConfig& cfg) {
  GramianIntegrals ints = integrate(sys, cfg);
  const ObservabilityConstants oc = extremes_of(ints.unweighted);
  require_observable(oc, cfg);
  GramianBundle b = assemble_bundle(ints.lambda, ints.m_matrix, cfg.omega, cfg.cond_guard);
  b.t_omega = WeightFunction(cfg.omega, cfg.horizon).t_omega();
  b.c1 = oc.c1;
  b.c2 = oc.c2;
  b.quadrature_order = cfg.quadrature_order;
  b.panel_phase = cfg.panel_phase;
  return b;
}

double riccati_residual(const GramianBundle& bundle, const SystemModel& sys) {
  const Eigen::Index n = sys.state_dim();
  if (bundle.lambda.rows() != n || bundle.c_matrix.rows() != n ||
      sys.b.rows() != n) {
    throw Error(ErrorKind::kDimension, "bundle does not match the system");
  }
  const Matrix& lam = bundle.lambda;
  const Matrix c_lam = bundle.c_matrix * lam;
  const Matrix bbt = sys.b * sys.b.transpose();
  const Matrix r = sys.a * lam + lam * sys.a.transpose() +
                   c_lam.transpose() * c_lam - bbt;
  return r.norm() / (1.0 + bbt.norm());
}

double integral_riccati_residual(const GramianBundle& bundle,
                                 const SystemModel& sys, double t, int trials,
                                 std::uint64_t seed) {
  const Eigen::Index n = sys.state_dim();
  if (bundle.lambda.rows() != n) {
    throw Error(ErrorKind::kDimension, "bundle does not match the system");
  }
  const Matrix minus_at = -sys.a.transpose();
  const TimeQuadrature q = time_quadrature(0.0, t, spectral_radius(sys.a),
                                           bundle.quadrature_order, bundle.panel_phase);
  const GroupTable table(minus_at, q);
  const Matrix end = transition_matrix(minus_at, t);
  const Matrix c_lam = bundle.c_matrix * bundle.lambda;
  const double lam_norm = bundle.lambda_factor.lambda_max();

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const Vector x = random_unit(rng, n);
    const Vector y = random_unit(rng, n);
    const double lhs = (bundle.lambda * x).dot(y);
    double c_term = 0.0;
    double b_term = 0.0;
    for (size_t k = 0; k < q.size(); ++k) {
      const Vector z = table.apply(k, x);
      const Vector w = table.apply(k, y);
      c_term += q.weight(k) * (c_lam * z).dot(c_lam * w);
      b_term += q.weight(k) * (sys.b.transpose() * z).dot(sys.b.transpose() * w);
    }
    const double rhs = (bundle.lambda * (end * x)).dot(end * y) - c_term + b_term;
    worst = std::max(worst, std::abs(lhs - rhs) / (lam_norm * x.norm() * y.norm()));
  }
  return worst;
}

}  // namespace gramstab
