#pragma once

// Closed-loop synthesis and the numerical checks of the identities satisfied
// by the Gramian feedback F = -B^T Lambda^{-1}.
//
// Two routes produce the closed-loop flow:
//   direct      x' = (A + B F) x
//   conjugated  y' = G y,  G = -A^T - C^T C Lambda,  x = Lambda y
// The Riccati equation makes A + BF = Lambda G Lambda^{-1}, so the two agree;
// U(t) = Lambda V(t) Lambda^{-1} with V(t) = exp(tG) is the closed-loop group.
// Along trajectories |x|_w^2 = <Lambda^{-1} x, x> decays at least like
// exp(-2 omega t).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gramstab/gramian.hpp"

namespace gramstab {

struct FeedbackLaw {
  Matrix f_matrix;  ///< m x n
};

enum class StepMode {
  kRk4,    ///< classical fixed-step fourth-order Runge-Kutta
  kExact,  ///< x_{k+1} = exp(h G) x_k
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> omega_norms;

  size_t size() const { return times.size(); }
};

class VerificationReport {
 public:
  void add(const std::string& name, double residual, double tolerance);

  const std::map<std::string, double>& residuals() const { return residuals_; }
  const std::map<std::string, double>& tolerances() const { return tolerances_; }
  bool passed() const;
  /// Names whose residual exceeds the tolerance (or is NaN).
  std::vector<std::string> failures() const;

  /// Merges another report; entries with equal names keep the worse residual.
  void merge(const VerificationReport& other);

 private:
  std::map<std::string, double> residuals_;
  std::map<std::string, double> tolerances_;
};

FeedbackLaw feedback_gain(const GramianBundle& bundle, const SystemModel& sys);

/// -A^T - C^T C Lambda
Matrix conjugated_generator(const SystemModel& sys, const GramianBundle& bundle);

/// V(t) = exp(t G)
Matrix conjugated_group(const SystemModel& sys, const GramianBundle& bundle, double t);

/// U(t) = Lambda V(t) Lambda^{-1}; the identity exactly at t = 0.
Matrix closed_loop_group(const SystemModel& sys, const GramianBundle& bundle, double t);

/// Operator norm of `generator` in the omega-norm: |R^{-1} generator R|_2.
double omega_operator_norm(const GramianBundle& bundle, const Matrix& generator);

/// min(0.01, 0.1 / |A + BF|), the norm taken in the omega-norm.
double default_step(const SystemModel& sys, const GramianBundle& bundle,
                    const FeedbackLaw& fb);

Trajectory simulate_direct(const SystemModel& sys, const GramianBundle& bundle,
                           const FeedbackLaw& fb, const Vector& x0,
                           double horizon, double step,
                           StepMode mode = StepMode::kRk4);

Trajectory simulate_conjugated(const SystemModel& sys, const GramianBundle& bundle,
                               const Vector& x0, double horizon, double step,
                               StepMode mode = StepMode::kRk4);

/// sqrt(<Lambda^{-1} x, x>), evaluated as |R^{-T} x| with Lambda = R^T R.
double omega_norm(const GramianBundle& bundle, const Vector& x);

/// Slack to add to decay tolerances for a trajectory of `steps` steps of size
/// `step` whose generator has operator norm `generator_norm` in the norm
/// the decay is measured in.
double integrator_allowance(StepMode mode, double step, size_t steps,
                            double generator_norm);

/// Entries "decay_bound" (|x(t)|_w <= exp(-omega t) |x0|_w) and
/// "decay_monotone" (exp(omega t) |x(t)|_w non-increasing), both normalized by
/// |x0|_w and clamped at zero.
VerificationReport verify_decay(const Trajectory& traj, double omega,
                                double tolerance = 1e-6);

/// Least-squares slope of -log |x(t)|_w against t.
double fitted_decay_rate(const Trajectory& traj);

/// |Lambda^{-1} (A + BF) Lambda + A^T + C^T C Lambda|_F / (1 + |A|_F)
double verify_conjugation(const SystemModel& sys, const GramianBundle& bundle,
                          const FeedbackLaw& fb);

/// Relative violation of C^T C >= 2 omega Lambda^{-1}:
/// max(0, -lambda_min(C^T C - 2 omega Lambda^{-1})) / |C^T C|_2.
double psd_gap(const GramianBundle& bundle);

// The representation identities below return |lhs - rhs| divided by the sum
// of the magnitudes of all terms (integrals counted by the integral of the
// absolute integrand), or 0 when every term vanishes. Integrals use composite
// Gauss-Legendre rules with the bundle's quadrature settings.

/// <U(t)x0, y> = <e^{tA}x0, y> - int_0^t <B^T Lambda^{-1} U(r) x0, B^T e^{(t-r)A^T} y> dr
double verify_rep_u(const SystemModel& sys, const GramianBundle& bundle,
                    const Vector& x0, const Vector& y, double t);

/// <Lambda x, y> = <Lambda V(t) x, e^{-tA^T} y> + int_0^t <B^T V(s) x, B^T e^{-sA^T} y> ds
double verify_rep_l1(const SystemModel& sys, const GramianBundle& bundle,
                     const Vector& x, const Vector& y, double t);

/// <Lambda x, y> = <Lambda V(t) x, V(t) y> + int_0^t <B^T V x, B^T V y>
///                 + int_0^t <C Lambda V x, C Lambda V y>
double verify_rep_l2(const SystemModel& sys, const GramianBundle& bundle,
                     const Vector& x, const Vector& y, double t);

/// <Lambda^{-1} x, y> = <Lambda^{-1} U(t-s) x, U(t-s) y>
///   + int_s^t <B^T Lambda^{-1} U(r-s) x, B^T Lambda^{-1} U(r-s) y> dr
///   + int_s^t <C U(r-s) x, C U(r-s) y> dr,      s <= t
double verify_rep_il(const SystemModel& sys, const GramianBundle& bundle,
                     const Vector& x, const Vector& y, double s, double t);

/// max_k |x_direct(t_k) - x_conj(t_k)| / |x_direct(t_k)| over common samples.
double route_discrepancy(const Trajectory& direct, const Trajectory& conjugated);

struct Tolerances {
  double riccati = 1e-7;
  double conjugation = 1e-7;
  double psd_gap = 1e-8;
  double integral_riccati = 1e-6;
  double representation = 1e-6;
  double decay = 1e-6;
  double route = 1e-6;
};

struct VerificationOptions {
  std::uint64_t seed = 0;
  int draws = 10;         ///< random (x, y, t) draws per representation identity
  int decay_states = 20;  ///< random unit initial states for the decay checks
  double decay_horizon = 0.0;  ///< 0 selects 10 / omega
  int decay_samples = 1000;    ///< exact-stepping samples per trajectory
  Tolerances tolerances;
};

/// Half-width of the interval from which representation times are drawn:
/// min(T_omega, 1 / omega).
double representation_time_span(const GramianBundle& bundle);

/// Runs every identity check on one bundle. Random draws come from a
/// generator seeded with `opts.seed`, so reports are reproducible.
VerificationReport verify_all(const SystemModel& sys, const GramianBundle& bundle,
                              const VerificationOptions& opts);

}  // namespace gramstab
