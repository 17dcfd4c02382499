#pragma once

// Dense real linear-algebra kernels shared by the Gramian construction and
// the closed-loop simulators. All functions are pure; none keeps state.

#include <vector>

#include <Eigen/Dense>

namespace gramstab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Throws a domain error if any entry of `m` is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& m, const char* what);

/// Returns (M + M^T) / 2.
Matrix symmetrize(const Eigen::Ref<const Matrix>& m);

/// e^{tM} by scaling and squaring with a Pade approximant. t == 0 yields the
/// identity exactly.
Matrix transition_matrix(const Eigen::Ref<const Matrix>& m, double t);

/// Largest modulus among the eigenvalues of a square matrix.
double spectral_radius(const Eigen::Ref<const Matrix>& m);

struct EigExtremes {
  double min = 0.0;
  double max = 0.0;
};

/// Extreme eigenvalues of a symmetric matrix. Rejects inputs whose asymmetry
/// exceeds 1e-10 relative to max(1, max|S_ij|).
EigExtremes sym_eig_extremes(const Eigen::Ref<const Matrix>& s);

/// Principal square root of a symmetric positive-semidefinite matrix via its
/// spectral decomposition. Eigenvalues in [-1e-10 * max(1, |S|), 0) are
/// clamped to zero; anything more negative is rejected.
Matrix sym_sqrt(const Eigen::Ref<const Matrix>& s);

/// Cholesky factorization of an SPD matrix together with its spectral
/// condition number. Construction fails with an ill-conditioned error when the
/// condition number exceeds `cond_guard`.
class SpdFactor {
 public:
  using Index = Eigen::Index;
  static constexpr double kDefaultCondGuard = 1e12;

  SpdFactor() = default;
  explicit SpdFactor(const Eigen::Ref<const Matrix>& s,
                     double cond_guard = kDefaultCondGuard);

  Index size() const { return llt_.rows(); }
  double cond() const { return cond_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

  Vector solve(const Eigen::Ref<const Vector>& b) const;
  /// v with v^T v = b^T S^{-1} b, from the Cholesky factor S = R R^T.
  Vector lower_solve(const Eigen::Ref<const Vector>& b) const;
  Matrix solve_columns(const Eigen::Ref<const Matrix>& b) const;
  /// R in S = R R^T.
  Matrix lower() const { return llt_.matrixL(); }

 private:
  Eigen::LLT<Matrix> llt_;
  double cond_ = 0.0;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

Vector spd_solve(const Eigen::Ref<const Matrix>& s,
                 const Eigen::Ref<const Vector>& b,
                 double cond_guard = SpdFactor::kDefaultCondGuard);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
};

/// n-point Gauss-Legendre rule on [a, b]; exact for degree <= 2n - 1.
QuadratureRule gauss_legendre(double a, double b, int n);

/// `panels` equal sub-intervals of [a, b], each with an n-point rule.
QuadratureRule composite_gauss_legendre(double a, double b, int n, int panels);

/// Composite Gauss-Legendre rule over an oriented interval [from, to], split
/// into equal panels with panel count max(1, ceil(rate * |to - from| /
/// panel_phase)). Node k lies in panel k / order at offset k % order; weights
/// are negative when to < from. Empty when from == to.
struct TimeQuadrature {
  double from = 0.0;
  double panel_width = 0.0;  ///< signed
  int panels = 0;
  int order = 0;
  std::vector<double> offsets;  ///< signed node offsets inside a panel
  std::vector<double> weights;  ///< signed weights of one panel

  size_t size() const { return static_cast<size_t>(panels) * offsets.size(); }
  double node(size_t k) const {
    return from + static_cast<double>(k / offsets.size()) * panel_width +
           offsets[k % offsets.size()];
  }
  double weight(size_t k) const { return weights[k % weights.size()]; }
};

TimeQuadrature time_quadrature(double from, double to, double rate, int order,
                               double panel_phase);

/// exp(node_k * G) for every node of a TimeQuadrature, stored as one
/// propagator per panel start and one per in-panel offset.
class GroupTable {
 public:
  GroupTable(const Eigen::Ref<const Matrix>& generator, const TimeQuadrature& q);

  /// exp(node_k G) v
  Matrix apply(size_t k, const Eigen::Ref<const Matrix>& v) const;

 private:
  std::vector<Matrix> anchors_;
  std::vector<Matrix> offsets_;
};

}  // namespace gramstab
