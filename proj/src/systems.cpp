#include "gramstab/systems.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gramstab/error.hpp"
#include "gramstab/gramian.hpp"

namespace gramstab {
namespace {

constexpr double kRandomHorizon = 5.0;
constexpr double kRandomMinRatio = 1e-6;
constexpr int kRandomMaxAttempts = 100;

Matrix dirichlet_laplacian(int n, double coeff) {
  Matrix k = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = 2.0 * coeff;
    if (i + 1 < n) {
      k(i, i + 1) = -coeff;
      k(i + 1, i) = -coeff;
    }
  }
  return k;
}

// First-order form of q'' = -K q with forces on the listed (1-based) nodes.
SystemModel second_order(const Matrix& stiffness, const std::vector<int>& support,
                         double gain) {
  const Eigen::Index n = stiffness.rows();
  SystemModel sys;
  sys.a = Matrix::Zero(2 * n, 2 * n);
  sys.a.topRightCorner(n, n).setIdentity();
  sys.a.bottomLeftCorner(n, n) = -stiffness;
  sys.b = Matrix::Zero(2 * n, static_cast<Eigen::Index>(support.size()));
  for (size_t j = 0; j < support.size(); ++j) {
    sys.b(n + support[j] - 1, static_cast<Eigen::Index>(j)) = gain;
  }
  Matrix energy = Matrix::Zero(2 * n, 2 * n);
  energy.topLeftCorner(n, n) = stiffness;
  energy.bottomRightCorner(n, n).setIdentity();
  sys.energy_weight = energy;
  return sys;
}

void check_support(int n, const std::vector<int>& support) {
  if (support.empty()) {
    throw Error(ErrorKind::kDomain, "control support is empty");
  }
  std::set<int> seen;
  for (int i : support) {
    if (i < 1 || i > n) {
      std::ostringstream os;
      os << "control support index " << i << " outside [1, " << n << "]";
      throw Error(ErrorKind::kDomain, os.str());
    }
    if (!seen.insert(i).second) {
      throw Error(ErrorKind::kDomain, "control support has duplicate entries");
    }
  }
}

std::string support_label(const std::vector<int>& support) {
  std::ostringstream os;
  os << "{";
  for (size_t i = 0; i < support.size(); ++i) {
    os << (i ? "," : "") << support[i];
  }
  os << "}";
  return os.str();
}

}  // namespace

void SystemModel::validate() const {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw Error(ErrorKind::kDimension, "A must be square and non-empty");
  }
  if (b.rows() != a.rows() || b.cols() == 0) {
    std::ostringstream os;
    os << "B must have " << a.rows() << " rows and at least one column, got "
       << b.rows() << "x" << b.cols();
    throw Error(ErrorKind::kDimension, os.str());
  }
  require_finite(a, "A");
  require_finite(b, "B");
  if (energy_weight && (energy_weight->rows() != a.rows() ||
                        energy_weight->cols() != a.cols())) {
    throw Error(ErrorKind::kDimension, "energy weight has the wrong size");
  }
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "scalar") return SystemKind::kScalar;
  if (name == "rotation") return SystemKind::kRotation;
  if (name == "oscillator_chain") return SystemKind::kOscillatorChain;
  if (name == "wave_1d") return SystemKind::kWave1d;
  throw Error(ErrorKind::kConfig, "unknown system kind '" + std::string(name) + "'");
}

SystemModel scalar_system() {
  SystemModel sys;
  sys.a = Matrix::Zero(1, 1);
  sys.b = Matrix::Ones(1, 1);
  sys.name = "scalar";
  sys.energy_weight = Matrix::Identity(1, 1);
  sys.suggested_horizon = 1.0;
  return sys;
}

SystemModel rotation_system() {
  SystemModel sys;
  sys.a.resize(2, 2);
  sys.a << 0.0, 1.0, -1.0, 0.0;
  sys.b.resize(2, 1);
  sys.b << 1.0, 0.0;
  sys.name = "rotation";
  sys.energy_weight = Matrix::Identity(2, 2);
  sys.suggested_horizon = 2.0;
  return sys;
}

SystemModel oscillator_chain(int n, double stiffness, std::vector<int> support) {
  if (n < 1) throw Error(ErrorKind::kDomain, "oscillator chain needs n >= 1");
  if (!(stiffness > 0.0)) {
    throw Error(ErrorKind::kDomain, "oscillator chain stiffness must be positive");
  }
  if (support.empty()) {
    support.resize(static_cast<size_t>(n));
    std::iota(support.begin(), support.end(), 1);
  }
  check_support(n, support);
  SystemModel sys = second_order(dirichlet_laplacian(n, stiffness), support, 1.0);
  std::ostringstream os;
  os << "oscillator_chain(n=" << n << ",k=" << stiffness
     << ",support=" << support_label(support) << ")";
  sys.name = os.str();
  sys.suggested_horizon = 2.0;
  return sys;
}

SystemModel wave_1d(int n, const std::vector<int>& support, double scale) {
  if (n < 1) throw Error(ErrorKind::kDomain, "wave_1d needs n >= 1");
  if (!(scale > 0.0)) throw Error(ErrorKind::kDomain, "wave_1d scale must be positive");
  check_support(n, support);
  const double h = 1.0 / (n + 1);
  SystemModel sys = second_order(dirichlet_laplacian(n, 1.0 / (h * h)), support, scale / h);
  std::ostringstream os;
  os << "wave_1d(n=" << n << ",support=" << support_label(support)
     << ",scale=" << scale << ")";
  sys.name = os.str();
  // Two traversals of the unit interval at unit speed.
  sys.suggested_horizon = 2.0;
  return sys;
}

SystemModel build_system(SystemKind kind, const SystemParams& params) {
  switch (kind) {
    case SystemKind::kScalar: return scalar_system();
    case SystemKind::kRotation: return rotation_system();
    case SystemKind::kOscillatorChain:
      return oscillator_chain(params.n, params.stiffness, params.support);
    case SystemKind::kWave1d: return wave_1d(params.n, params.support, params.scale);
  }
  throw Error(ErrorKind::kDomain, "unknown system kind");
}

SystemModel random_observable_system(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < 1 || m > n) {
    throw Error(ErrorKind::kDomain, "random system needs 1 <= m <= n");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> entry_s(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  std::normal_distribution<double> entry_b(0.0, 1.0);
  const StabilizerConfig cfg;
  for (int attempt = 0; attempt < kRandomMaxAttempts; ++attempt) {
    Matrix s(n, n);
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, j) = entry_s(rng);
    SystemModel sys;
    sys.a = s - s.transpose();
    sys.b.resize(n, m);
    for (Eigen::Index j = 0; j < sys.b.cols(); ++j)
      for (Eigen::Index i = 0; i < sys.b.rows(); ++i) sys.b(i, j) = entry_b(rng);

    Eigen::FullPivLU<Matrix> lu(sys.b);
    if (lu.rank() < m) continue;
    const ObservabilityConstants oc = observability_constants(sys, kRandomHorizon, cfg);
    if (oc.c1 > 0.0 && oc.c2 / oc.c1 >= kRandomMinRatio) {
      std::ostringstream os;
      os << "random(n=" << n << ",m=" << m << ",seed=" << seed << ")";
      sys.name = os.str();
      sys.energy_weight = Matrix::Identity(n, n);
      sys.suggested_horizon = kRandomHorizon;
      return sys;
    }
  }
  throw Error(ErrorKind::kGeneration,
              "no observable random system after 100 attempts");
}

}  // namespace gramstab
