#pragma once

// Weighted controllability Gramian and the operators derived from it.
//
// For a decay parameter omega > 0 and an observability horizon T, the weight
//
//   e(s) = exp(-2 omega s)                      on [0, T]
//   e(s) = 2 omega exp(-2 omega T) (T_w - s)    on [T, T_w],  T_w = T + 1/(2 omega)
//
// defines
//
//   Lambda = int_0^{T_w}  e(s)  exp(-sA) B B^T exp(-sA^T) ds
//   M      = int_0^{T_w} -e'(s) exp(-sA) B B^T exp(-sA^T) ds
//   L      = Lambda^{-1} M Lambda^{-1},   C = sqrt(L)
//
// and Lambda then satisfies A Lambda + Lambda A^T + Lambda C^T C Lambda = B B^T.
// Because -e' >= 2 omega e, M - 2 omega Lambda is PSD and therefore
// C^T C >= 2 omega Lambda^{-1}. Lambda is never obtained by solving the
// Riccati equation; the equation is only checked.

#include <cstdint>

#include "gramstab/numerics.hpp"
#include "gramstab/system_model.hpp"

namespace gramstab {

struct StabilizerConfig {
  double omega = 1.0;    ///< prescribed decay rate (1/time)
  double horizon = 1.0;  ///< observability horizon T (time)
  int quadrature_order = 32;  ///< Gauss-Legendre nodes per panel
  /// Panels are sized so that spectral_radius(A) * panel_length <= panel_phase.
  double panel_phase = 4.0;
  /// Integrator step; 0 selects default_step.
  double step = 0.0;
  double cond_guard = SpdFactor::kDefaultCondGuard;
  /// Reject when c2 / c1 falls below this ratio.
  double observability_ratio = 1e-10;

  void validate() const;
};

class WeightFunction {
 public:
  WeightFunction(double omega, double horizon);

  double omega() const { return omega_; }
  double horizon() const { return horizon_; }
  double t_omega() const { return t_omega_; }

  /// e(s) for s in [0, T_w].
  double value(double s) const;
  /// e'(s) for s in [0, T_w] \ {T}; throws a kink error at s == T.
  double derivative(double s) const;

 private:
  double omega_;
  double horizon_;
  double t_omega_;
};

struct ObservabilityConstants {
  double c1 = 0.0;  ///< largest eigenvalue of the unweighted Gramian on [0, T]
  double c2 = 0.0;  ///< smallest eigenvalue of the unweighted Gramian on [0, T]
};

struct GramianBundle {
  double omega = 0.0;
  double t_omega = 0.0;
  Matrix lambda;
  SpdFactor lambda_factor;
  Matrix m_matrix;
  Matrix l_matrix;
  Matrix c_matrix;
  double cond_lambda = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  /// Quadrature settings reused by the downstream time integrals.
  int quadrature_order = 32;
  double panel_phase = 4.0;
};

ObservabilityConstants observability_constants(const SystemModel& sys,
                                               double horizon,
                                               const StabilizerConfig& cfg);

Matrix compute_gramian(const SystemModel& sys, const StabilizerConfig& cfg);

/// M only; no observability gate, so B = 0 yields M = 0.
Matrix compute_derivative_gramian(const SystemModel& sys,
                                  const StabilizerConfig& cfg);

GramianBundle build_bundle(const SystemModel& sys, const StabilizerConfig& cfg);

/// Builds L, C and the factorization from given Lambda and M. Used by
/// build_bundle and by tests that need a bundle with prescribed Lambda.
GramianBundle assemble_bundle(const Matrix& lambda, const Matrix& m_matrix,
                              double omega,
                              double cond_guard = SpdFactor::kDefaultCondGuard);

/// |A Lambda + Lambda A^T + Lambda C^T C Lambda - B B^T|_F / (1 + |B B^T|_F)
double riccati_residual(const GramianBundle& bundle, const SystemModel& sys);

/// Largest normalized defect, over `trials` random pairs (x, y), of
///   <Lambda x, y> = <Lambda z(t), w(t)> - int_0^t <C Lambda z, C Lambda w>
///                   + int_0^t <B^T z, B^T w>,   z(s) = exp(-sA^T) x.
/// Normalized by |Lambda|_2 |x| |y|.
double integral_riccati_residual(const GramianBundle& bundle,
                                 const SystemModel& sys, double t, int trials,
                                 std::uint64_t seed = 0);

}  // namespace gramstab
