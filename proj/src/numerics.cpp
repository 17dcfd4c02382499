#include "gramstab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gsl/gsl_integration.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "gramstab/error.hpp"

namespace gramstab {
namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kNegativeEigTol = 1e-10;

void require_square(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << " must be square and non-empty, got " << m.rows() << "x"
       << m.cols();
    throw Error(ErrorKind::kDimension, os.str());
  }
}

void require_symmetric(const Eigen::Ref<const Matrix>& s, const char* what) {
  require_square(s, what);
  require_finite(s, what);
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    std::ostringstream os;
    os << what << " is not symmetric (max |S - S^T| = " << asym << ")";
    throw Error(ErrorKind::kDomain, os.str());
  }
}

}  // namespace

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::kDomain,
                std::string(what) + " contains NaN or infinite entries");
  }
}

Matrix symmetrize(const Eigen::Ref<const Matrix>& m) {
  return 0.5 * (m + m.transpose());
}

Matrix transition_matrix(const Eigen::Ref<const Matrix>& m, double t) {
  require_square(m, "transition_matrix input");
  require_finite(m, "transition_matrix input");
  if (!std::isfinite(t)) {
    throw Error(ErrorKind::kDomain, "transition_matrix time is not finite");
  }
  if (t == 0.0) {
    return Matrix::Identity(m.rows(), m.cols());
  }
  const Matrix scaled = t * m;
  return scaled.exp();
}

double spectral_radius(const Eigen::Ref<const Matrix>& m) {
  require_square(m, "spectral_radius input");
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

EigExtremes sym_eig_extremes(const Eigen::Ref<const Matrix>& s) {
  require_symmetric(s, "sym_eig_extremes input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s),
                                           Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

Matrix sym_sqrt(const Eigen::Ref<const Matrix>& s) {
  require_symmetric(s, "sym_sqrt input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  Vector ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -kNegativeEigTol * scale) {
      std::ostringstream os;
      os << "sym_sqrt input is indefinite: eigenvalue " << ev(i);
      throw Error(ErrorKind::kDomain, os.str());
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  const Matrix& q = es.eigenvectors();
  return symmetrize(q * ev.asDiagonal() * q.transpose());
}

SpdFactor::SpdFactor(const Eigen::Ref<const Matrix>& s, double cond_guard) {
  const EigExtremes ext = sym_eig_extremes(s);
  lambda_min_ = ext.min;
  lambda_max_ = ext.max;
  if (!(ext.min > 0.0)) {
    std::ostringstream os;
    os << "matrix is not positive-definite (min eigenvalue " << ext.min << ")";
    throw Error(ErrorKind::kIllConditioned, os.str());
  }
  cond_ = ext.max / ext.min;
  if (cond_ > cond_guard) {
    std::ostringstream os;
    os << "condition number " << cond_ << " exceeds guard " << cond_guard;
    throw Error(ErrorKind::kIllConditioned, os.str());
  }
  llt_.compute(symmetrize(s));
  if (llt_.info() != Eigen::Success) {
    throw Error(ErrorKind::kIllConditioned, "Cholesky factorization failed");
  }
}

Vector SpdFactor::solve(const Eigen::Ref<const Vector>& b) const {
  if (b.size() != llt_.rows()) {
    throw Error(ErrorKind::kDimension, "spd solve right-hand side size mismatch");
  }
  return llt_.solve(b);
}

Matrix SpdFactor::solve_columns(const Eigen::Ref<const Matrix>& b) const {
  if (b.rows() != llt_.rows()) {
    throw Error(ErrorKind::kDimension, "spd solve right-hand side size mismatch");
  }
  return llt_.solve(b);
}

Vector SpdFactor::lower_solve(const Eigen::Ref<const Vector>& b) const {
  if (b.size() != llt_.rows()) {
    throw Error(ErrorKind::kDimension, "spd solve right-hand side size mismatch");
  }
  return llt_.matrixL().solve(b);
}

Vector spd_solve(const Eigen::Ref<const Matrix>& s,
                 const Eigen::Ref<const Vector>& b, double cond_guard) {
  return SpdFactor(s, cond_guard).solve(b);
}

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre_with_derivative(int n, double x) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

}  // namespace

QuadratureRule gauss_legendre(double a, double b, int n) {
  if (!(a < b)) {
    throw Error(ErrorKind::kDomain, "gauss_legendre requires a < b");
  }
  if (n < 1) {
    throw Error(ErrorKind::kDomain, "gauss_legendre requires n >= 1");
  }
  gsl_integration_glfixed_table* table =
      gsl_integration_glfixed_table_alloc(static_cast<size_t>(n));
  if (table == nullptr) {
    throw Error(ErrorKind::kDomain, "could not allocate Gauss-Legendre table");
  }
  // GSL only tabulates some orders; the rest come from an iteration that
  // stops near 1e-11, so every node is polished on the reference interval.
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::vector<std::pair<double, double>> pts(static_cast<size_t>(n));
  for (size_t i = 0; i < pts.size(); ++i) {
    double x = 0.0;
    double w = 0.0;
    gsl_integration_glfixed_point(-1.0, 1.0, i, &x, &w, table);
    for (int it = 0; it < 3; ++it) {
      const auto [p, d] = legendre_with_derivative(n, x);
      x -= p / d;
    }
    const double dp = legendre_with_derivative(n, x).second;
    pts[i] = {mid + half * x, half * 2.0 / ((1.0 - x * x) * dp * dp)};
  }
  gsl_integration_glfixed_table_free(table);
  std::sort(pts.begin(), pts.end());

  QuadratureRule rule;
  rule.order = n;
  rule.nodes.reserve(pts.size());
  rule.weights.reserve(pts.size());
  for (const auto& [x, w] : pts) {
    rule.nodes.push_back(x);
    rule.weights.push_back(w);
  }
  return rule;
}

QuadratureRule composite_gauss_legendre(double a, double b, int n,
                                        int panels) {
  if (panels < 1) {
    throw Error(ErrorKind::kDomain, "composite rule needs at least one panel");
  }
  QuadratureRule out;
  out.order = n;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    const double hi = (p + 1 == panels) ? b : a + (p + 1) * h;
    QuadratureRule piece = gauss_legendre(lo, hi, n);
    out.nodes.insert(out.nodes.end(), piece.nodes.begin(), piece.nodes.end());
    out.weights.insert(out.weights.end(), piece.weights.begin(),
                       piece.weights.end());
  }
  return out;
}

TimeQuadrature time_quadrature(double from, double to, double rate, int order,
                               double panel_phase) {
  if (!std::isfinite(from) || !std::isfinite(to)) {
    throw Error(ErrorKind::kDomain, "quadrature interval is not finite");
  }
  TimeQuadrature q;
  q.from = from;
  q.order = order;
  if (from == to) return q;
  const double length = std::abs(to - from);
  const double wanted = std::ceil(rate * length / panel_phase);
  q.panels = std::max(1, static_cast<int>(std::min(wanted, 1e6)));
  const double sign = to > from ? 1.0 : -1.0;
  q.panel_width = (to - from) / q.panels;
  const QuadratureRule unit = gauss_legendre(0.0, length / q.panels, order);
  for (size_t j = 0; j < unit.nodes.size(); ++j) {
    q.offsets.push_back(sign * unit.nodes[j]);
    q.weights.push_back(sign * unit.weights[j]);
  }
  return q;
}

GroupTable::GroupTable(const Eigen::Ref<const Matrix>& generator,
                       const TimeQuadrature& q) {
  anchors_.reserve(static_cast<size_t>(q.panels));
  for (int p = 0; p < q.panels; ++p) {
    anchors_.push_back(transition_matrix(generator, q.from + p * q.panel_width));
  }
  offsets_.reserve(q.offsets.size());
  for (double o : q.offsets) offsets_.push_back(transition_matrix(generator, o));
}

Matrix GroupTable::apply(size_t k, const Eigen::Ref<const Matrix>& v) const {
  const size_t order = offsets_.size();
  return anchors_[k / order] * (offsets_[k % order] * v);
}

}  // namespace gramstab
