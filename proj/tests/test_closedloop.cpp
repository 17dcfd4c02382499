#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "gramstab/closedloop.hpp"
#include "gramstab/error.hpp"
#include "gramstab/systems.hpp"

using namespace gramstab;

namespace {

const double kScalarLambda = (2.0 - std::exp(-1.0)) / 2.0;

StabilizerConfig config(double omega, double horizon) {
  StabilizerConfig cfg;
  cfg.omega = omega;
  cfg.horizon = horizon;
  return cfg;
}

GramianBundle scalar_bundle() { return build_bundle(scalar_system(), config(0.5, 1.0)); }

// Bundle with Lambda = M = I, i.e. L = C = I.
GramianBundle identity_bundle(Eigen::Index n, double omega = 1.0) {
  GramianBundle b = assemble_bundle(Matrix::Identity(n, n), Matrix::Identity(n, n), omega);
  b.t_omega = 1.0;
  return b;
}

Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v.normalized();
}

Trajectory sampled(const std::vector<double>& times, const std::vector<double>& norms) {
  Trajectory t;
  t.times = times;
  t.omega_norms = norms;
  for (double n : norms) t.states.push_back(Vector::Constant(1, n));
  return t;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kConfig;
}

struct RandomCase {
  SystemModel sys;
  GramianBundle bundle;
};

RandomCase random_case(int n, int m, std::uint64_t seed, double omega = 1.0) {
  SystemModel sys = random_observable_system(n, m, seed);
  GramianBundle b = build_bundle(sys, config(omega, 5.0));
  return {std::move(sys), std::move(b)};
}

}  // namespace

TEST(FeedbackGain, Examples) {
  const FeedbackLaw fb = feedback_gain(scalar_bundle(), scalar_system());
  EXPECT_NEAR(fb.f_matrix(0, 0), -1.0 / kScalarLambda, 1e-9);
  EXPECT_NEAR(fb.f_matrix(0, 0), -1.2254, 1e-4);

  SystemModel sys = random_observable_system(3, 2, 4);
  EXPECT_TRUE(feedback_gain(identity_bundle(3), sys).f_matrix.isApprox(-sys.b.transpose(), 1e-15));
  sys.b.setZero();
  EXPECT_TRUE(feedback_gain(identity_bundle(3), sys).f_matrix.isZero(0.0));
}

TEST(FeedbackGain, UnwindsDefinition) {
  const RandomCase c = random_case(6, 2, 12);
  const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
  ASSERT_EQ(fb.f_matrix.rows(), 2);
  ASSERT_EQ(fb.f_matrix.cols(), 6);
  EXPECT_LE((fb.f_matrix * c.bundle.lambda + c.sys.b.transpose()).norm(),
            1e-9 * c.sys.b.norm());
}

TEST(SimulateDirect, OpenLoopMatchesExponential) {
  const SystemModel sys = rotation_system();
  const FeedbackLaw zero{Matrix::Zero(1, 2)};
  const Vector x0 = Eigen::Vector2d(0.3, -1.0);
  const Trajectory t = simulate_direct(sys, identity_bundle(2), zero, x0, 3.0, 0.01);
  EXPECT_EQ(t.times.front(), 0.0);
  for (size_t k = 0; k < t.size(); k += 37) {
    const Vector ref = transition_matrix(sys.a, t.times[k]) * x0;
    EXPECT_LT((t.states[k] - ref).norm(), 1e-9);
  }
}

TEST(SimulateDirect, ScalarClosedLoop) {
  const GramianBundle b = scalar_bundle();
  const FeedbackLaw fb = feedback_gain(b, scalar_system());
  for (StepMode mode : {StepMode::kRk4, StepMode::kExact}) {
    const Trajectory t = simulate_direct(scalar_system(), b, fb, Vector::Ones(1), 1.0, 0.01, mode);
    EXPECT_NEAR(t.states.back()(0), std::exp(-1.0 / kScalarLambda), 1e-8);
    EXPECT_NEAR(t.states.back()(0), 0.2937, 1e-4);
  }
}

TEST(SimulateDirect, ZeroInitialState) {
  const RandomCase c = random_case(4, 2, 1);
  const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
  const Trajectory t = simulate_direct(c.sys, c.bundle, fb, Vector::Zero(4), 2.0, 0.05);
  for (size_t k = 0; k < t.size(); ++k) {
    EXPECT_TRUE(t.states[k].isZero(0.0));
    EXPECT_EQ(t.omega_norms[k], 0.0);
  }
}

TEST(SimulateDirect, DivergenceIsReported) {
  SystemModel sys = scalar_system();
  sys.a(0, 0) = 50.0;
  const FeedbackLaw zero{Matrix::Zero(1, 1)};
  EXPECT_EQ(kind_of([&] {
              simulate_direct(sys, identity_bundle(1), zero, Vector::Ones(1), 100.0, 1.0);
            }),
            ErrorKind::kDivergence);
}

TEST(SimulateDirect, TrajectoryShapeAndNorms) {
  const RandomCase c = random_case(4, 2, 2);
  const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
  const Trajectory t = simulate_direct(c.sys, c.bundle, fb, Vector::Ones(4), 1.0, 0.3);
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t.states.size(), t.size());
  EXPECT_EQ(t.omega_norms.size(), t.size());
  EXPECT_DOUBLE_EQ(t.times.back(), 1.0);
  const Matrix inv = c.bundle.lambda.inverse();
  for (size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(t.omega_norms[k], std::sqrt(t.states[k].dot(inv * t.states[k])),
                1e-9 * t.omega_norms[k]);
  }
  EXPECT_EQ(kind_of([&] { simulate_direct(c.sys, c.bundle, fb, Vector::Ones(3), 1.0, 0.1); }),
            ErrorKind::kDimension);
  EXPECT_EQ(kind_of([&] { simulate_direct(c.sys, c.bundle, fb, Vector::Ones(4), 1.0, 0.0); }),
            ErrorKind::kDomain);
}

TEST(SimulateConjugated, Examples) {
  const GramianBundle b = scalar_bundle();
  const FeedbackLaw fb = feedback_gain(b, scalar_system());
  const Trajectory conj = simulate_conjugated(scalar_system(), b, Vector::Ones(1), 2.0, 0.01);
  const Trajectory direct = simulate_direct(scalar_system(), b, fb, Vector::Ones(1), 2.0, 0.01);
  EXPECT_EQ(conj.states.front()(0), 1.0);
  for (size_t k = 0; k < conj.size(); ++k) {
    EXPECT_NEAR(conj.states[k](0), direct.states[k](0), 1e-8);
  }
}

TEST(SimulateConjugated, ZeroCReducesToAdjointGroup) {
  const RandomCase c = random_case(4, 2, 5);
  GramianBundle b = c.bundle;
  b.c_matrix.setZero();
  const Vector x0 = Eigen::Vector4d(1.0, -2.0, 0.5, 0.0);
  const Trajectory t = simulate_conjugated(c.sys, b, x0, 1.0, 0.1, StepMode::kExact);
  const Vector y0 = b.lambda_factor.solve(x0);
  for (size_t k = 0; k < t.size(); ++k) {
    const Vector ref = b.lambda * (transition_matrix(-c.sys.a.transpose(), t.times[k]) * y0);
    EXPECT_LT((t.states[k] - ref).norm(), 1e-10 * (1.0 + ref.norm()));
  }
}

TEST(OmegaNorm, Examples) {
  EXPECT_EQ(omega_norm(scalar_bundle(), Vector::Zero(1)), 0.0);
  const Vector x = Eigen::Vector3d(3.0, 4.0, 12.0);
  EXPECT_NEAR(omega_norm(identity_bundle(3), x), 13.0, 1e-14);
  EXPECT_NEAR(omega_norm(scalar_bundle(), Vector::Ones(1)), 1.0 / std::sqrt(kScalarLambda), 1e-12);
  EXPECT_NEAR(omega_norm(scalar_bundle(), Vector::Ones(1)), 1.1070, 1e-4);
  EXPECT_EQ(kind_of([] { omega_norm(scalar_bundle(), Vector::Ones(2)); }), ErrorKind::kDimension);
}

TEST(VerifyDecay, ScalarHasStrictMargin) {
  const GramianBundle b = scalar_bundle();
  const FeedbackLaw fb = feedback_gain(b, scalar_system());
  const Trajectory t = simulate_direct(scalar_system(), b, fb, Vector::Ones(1), 10.0, 0.01);
  const VerificationReport r = verify_decay(t, 0.5);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.residuals().at("decay_bound"), 0.0);
  EXPECT_EQ(r.residuals().at("decay_monotone"), 0.0);
}

TEST(VerifyDecay, ZeroStateAndEmpty) {
  const Trajectory zero = sampled({0.0, 1.0}, {0.0, 0.0});
  EXPECT_TRUE(verify_decay(zero, 1.0).passed());
  EXPECT_EQ(kind_of([] { verify_decay(Trajectory{}, 1.0); }), ErrorKind::kDomain);
}

TEST(VerifyDecay, DetectsViolation) {
  const Trajectory slow = sampled({0.0, 1.0, 2.0}, {1.0, std::exp(-0.5), std::exp(-1.0)});
  const VerificationReport r = verify_decay(slow, 1.0);
  EXPECT_FALSE(r.passed());
  EXPECT_NEAR(r.residuals().at("decay_bound"), std::exp(-0.5) - std::exp(-1.0), 1e-15);
}

TEST(VerifyDecay, RandomSixBySix) {
  const RandomCase c = random_case(6, 3, 42, 1.0);
  const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
  std::mt19937_64 rng(0);
  for (int k = 0; k < 20; ++k) {
    const Vector x0 = random_unit(rng, 6);
    for (StepMode mode : {StepMode::kExact, StepMode::kRk4}) {
      const double step = 0.01;
      const Trajectory t = simulate_direct(c.sys, c.bundle, fb, x0, 10.0, step, mode);
      const double allowance = integrator_allowance(
          mode, step, t.size() - 1,
          omega_operator_norm(c.bundle, c.sys.a + c.sys.b * fb.f_matrix));
      EXPECT_TRUE(verify_decay(t, 1.0, 1e-6 + allowance).passed());
      EXPECT_GE(fitted_decay_rate(t), 0.99);
    }
  }
}

TEST(FittedDecayRate, Examples) {
  std::vector<double> times, norms;
  for (int k = 0; k <= 50; ++k) {
    times.push_back(0.1 * k);
    norms.push_back(3.0 * std::exp(-2.0 * 0.1 * k));
  }
  EXPECT_NEAR(fitted_decay_rate(sampled(times, norms)), 2.0, 1e-9);

  const GramianBundle b = scalar_bundle();
  const FeedbackLaw fb = feedback_gain(b, scalar_system());
  const Trajectory t =
      simulate_direct(scalar_system(), b, fb, Vector::Ones(1), 5.0, 0.01, StepMode::kExact);
  // |x|_w is proportional to |x| = exp(-t / Lambda).
  EXPECT_NEAR(fitted_decay_rate(t), 1.0 / kScalarLambda, 1e-9);
  EXPECT_NEAR(fitted_decay_rate(t), 1.2254, 1e-4);

  const Trajectory rot = simulate_direct(rotation_system(), identity_bundle(2),
                                         FeedbackLaw{Matrix::Zero(1, 2)},
                                         Eigen::Vector2d(1.0, 0.0), 5.0, 0.01, StepMode::kExact);
  EXPECT_NEAR(fitted_decay_rate(rot), 0.0, 1e-10);
}

TEST(FittedDecayRate, DegenerateInput) {
  EXPECT_EQ(kind_of([] { fitted_decay_rate(sampled({0, 1, 2}, {1, 1, 1})); }),
            ErrorKind::kDegenerateFit);
  std::vector<double> times(12), norms(12, 1.0);
  for (int k = 0; k < 12; ++k) times[k] = k;
  norms[5] = 0.0;
  EXPECT_EQ(kind_of([&] { fitted_decay_rate(sampled(times, norms)); }), ErrorKind::kDegenerateFit);
}

TEST(VerifyConjugation, Examples) {
  const GramianBundle b = scalar_bundle();
  const FeedbackLaw fb = feedback_gain(b, scalar_system());
  EXPECT_LE(verify_conjugation(scalar_system(), b, fb), 1e-10);
  GramianBundle corrupted = b;
  corrupted.c_matrix.setZero();
  EXPECT_GT(verify_conjugation(scalar_system(), corrupted, fb), 0.5);

  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const RandomCase c = random_case(8, 3, seed, 2.0);
    EXPECT_LE(verify_conjugation(c.sys, c.bundle, feedback_gain(c.bundle, c.sys)), 1e-7);
  }
}

TEST(PsdGap, SuiteAndCorruption) {
  const RandomCase c = random_case(5, 2, 3, 2.0);
  EXPECT_LE(psd_gap(c.bundle), 1e-8);
  GramianBundle halved = c.bundle;
  halved.c_matrix *= 0.5;
  EXPECT_GT(psd_gap(halved), 1e-3);
}

TEST(RepresentationU, Examples) {
  const GramianBundle b = scalar_bundle();
  const Vector one = Vector::Ones(1);
  EXPECT_EQ(verify_rep_u(scalar_system(), b, one, one, 0.0), 0.0);
  EXPECT_LE(verify_rep_u(scalar_system(), b, one, one, 1.0), 1e-7);

  const RandomCase c = random_case(4, 2, 21);
  GramianBundle zero_c = c.bundle;
  zero_c.c_matrix.setZero();
  const Vector x = Eigen::Vector4d(1, 0, -1, 2);
  const Vector y = Eigen::Vector4d(0, 1, 1, -1);
  EXPECT_LE(verify_rep_u(c.sys, c.bundle, x, y, 0.7), 1e-6);
  EXPECT_GT(verify_rep_u(c.sys, zero_c, x, y, 0.7), 1e-3);
}

TEST(RepresentationL1, Examples) {
  const GramianBundle b = scalar_bundle();
  const Vector one = Vector::Ones(1);
  EXPECT_EQ(verify_rep_l1(scalar_system(), b, one, one, 0.0), 0.0);
  EXPECT_LE(verify_rep_l1(scalar_system(), b, one, one, 1.0), 1e-7);
  EXPECT_LE(verify_rep_l1(scalar_system(), b, one, one, -1.0), 1e-7);

  const RandomCase c = random_case(4, 2, 22);
  std::mt19937_64 rng(1);
  for (double t : {0.5, 1.0, 2.0}) {
    EXPECT_LE(verify_rep_l1(c.sys, c.bundle, random_unit(rng, 4), random_unit(rng, 4), t), 1e-6);
  }
}

TEST(RepresentationL2, ExamplesAndConsistency) {
  const GramianBundle b = scalar_bundle();
  const Vector one = Vector::Ones(1);
  EXPECT_EQ(verify_rep_l2(scalar_system(), b, one, one, 0.0), 0.0);
  EXPECT_LE(verify_rep_l2(scalar_system(), b, one, one, 1.0), 1e-7);

  const RandomCase c = random_case(5, 2, 23);
  std::mt19937_64 rng(2);
  for (double t : {-1.0, 0.3, 1.5}) {
    const Vector x = random_unit(rng, 5);
    const Vector y = random_unit(rng, 5);
    EXPECT_LE(verify_rep_l2(c.sys, c.bundle, x, y, t),
              verify_rep_l1(c.sys, c.bundle, x, y, t) + 1e-10);
  }
}

TEST(RepresentationIL, Examples) {
  const GramianBundle b = scalar_bundle();
  const Vector one = Vector::Ones(1);
  EXPECT_EQ(verify_rep_il(scalar_system(), b, one, one, 0.4, 0.4), 0.0);
  EXPECT_LE(verify_rep_il(scalar_system(), b, one, one, 0.0, 1.0), 1e-7);
  EXPECT_EQ(kind_of([&] { verify_rep_il(scalar_system(), b, one, one, 1.0, 0.0); }),
            ErrorKind::kDomain);

  const RandomCase c = random_case(4, 2, 24);
  const Vector x = Eigen::Vector4d(1, 2, 3, 4).normalized();
  const Vector y = Eigen::Vector4d(-1, 0, 1, 0).normalized();
  for (double s : {-0.5, 0.25, 1.0}) {
    const double shifted = verify_rep_il(c.sys, c.bundle, x, y, s, s + 0.8);
    const double base = verify_rep_il(c.sys, c.bundle, x, y, 0.0, 0.8);
    EXPECT_LE(base, 1e-6);
    EXPECT_NEAR(shifted, base, 1e-9);
  }
}

TEST(ClosedLoopProperties, RouteEquivalence) {
  for (std::uint64_t seed : {31u, 32u}) {
    const RandomCase c = random_case(6, 3, seed, 1.0);
    const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
    const Vector x0 = Vector::LinSpaced(6, -1.0, 1.0);
    const Trajectory d = simulate_direct(c.sys, c.bundle, fb, x0, 5.0, 0.01, StepMode::kExact);
    const Trajectory v = simulate_conjugated(c.sys, c.bundle, x0, 5.0, 0.01, StepMode::kExact);
    EXPECT_LE(route_discrepancy(d, v), 1e-6);
    const Trajectory dr = simulate_direct(c.sys, c.bundle, fb, x0, 5.0, 0.01);
    const Trajectory vr = simulate_conjugated(c.sys, c.bundle, x0, 5.0, 0.01);
    EXPECT_LE(route_discrepancy(dr, vr), 1e-6);
  }
}

TEST(ClosedLoopProperties, GroupLawOfU) {
  const RandomCase c = random_case(5, 2, 33);
  const Vector x0 = Vector::LinSpaced(5, 0.5, 1.5);
  for (auto [t, s] : {std::pair{0.3, 0.9}, std::pair{-0.4, 1.1}, std::pair{1.0, -1.0}}) {
    const Vector lhs = closed_loop_group(c.sys, c.bundle, t + s) * x0;
    const Vector rhs =
        closed_loop_group(c.sys, c.bundle, t) * (closed_loop_group(c.sys, c.bundle, s) * x0);
    EXPECT_LE((lhs - rhs).norm(), 1e-9 * (1.0 + lhs.norm()));
  }
  // U is the group generated by A + BF.
  const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
  const Matrix direct = transition_matrix(c.sys.a + c.sys.b * fb.f_matrix, 0.8);
  EXPECT_LE((closed_loop_group(c.sys, c.bundle, 0.8) - direct).norm(), 1e-8 * direct.norm());
  EXPECT_TRUE(closed_loop_group(c.sys, c.bundle, 0.0).isIdentity(0.0));
}

TEST(ClosedLoopProperties, LyapunovMonotonicity) {
  const RandomCase c = random_case(6, 2, 34, 0.5);
  const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
  const Trajectory t =
      simulate_direct(c.sys, c.bundle, fb, Vector::Ones(6), 8.0, 0.02, StepMode::kExact);
  for (size_t k = 1; k < t.size(); ++k) {
    EXPECT_LE(t.omega_norms[k], t.omega_norms[k - 1] * (1.0 + 1e-12));
    EXPECT_LE(std::exp(0.5 * t.times[k]) * t.omega_norms[k],
              std::exp(0.5 * t.times[k - 1]) * t.omega_norms[k - 1] + 1e-12);
  }
}

TEST(VerificationReport, PassFailLogic) {
  VerificationReport r;
  r.add("a", 1e-9, 1e-8);
  EXPECT_TRUE(r.passed());
  r.add("b", std::numeric_limits<double>::quiet_NaN(), 1.0);
  EXPECT_FALSE(r.passed());
  ASSERT_EQ(r.failures().size(), 1u);
  EXPECT_EQ(r.failures().front(), "b");

  VerificationReport other;
  other.add("a", 1e-7, 1e-8);
  r.merge(other);
  EXPECT_EQ(r.residuals().at("a"), 1e-7);
  VerificationReport better;
  better.add("a", 0.0, 1e-8);
  r.merge(better);
  EXPECT_EQ(r.residuals().at("a"), 1e-7);
}

TEST(VerifyAll, ScalarAndDeterministic) {
  const GramianBundle b = scalar_bundle();
  VerificationOptions opts;
  opts.decay_states = 3;
  const VerificationReport r = verify_all(scalar_system(), b, opts);
  EXPECT_TRUE(r.passed());
  for (const auto& [name, v] : r.residuals()) EXPECT_LE(v, 1e-7) << name;

  const RandomCase c = random_case(4, 2, 50);
  opts.seed = 9;
  const VerificationReport a1 = verify_all(c.sys, c.bundle, opts);
  const VerificationReport a2 = verify_all(c.sys, c.bundle, opts);
  EXPECT_EQ(a1.residuals(), a2.residuals());
  EXPECT_TRUE(a1.passed());
}

TEST(IntegratorAllowance, Scaling) {
  EXPECT_DOUBLE_EQ(integrator_allowance(StepMode::kExact, 0.1, 100, 5.0), 1e-11);
  const double a = integrator_allowance(StepMode::kRk4, 0.01, 100, 2.0);
  const double b = integrator_allowance(StepMode::kRk4, 0.005, 200, 2.0);
  // Fourth order: halving the step over the same span divides by 16.
  EXPECT_NEAR(b / a, 1.0 / 16.0, 1e-3);
}

TEST(DefaultStep, Rule) {
  const GramianBundle b = scalar_bundle();
  const FeedbackLaw fb = feedback_gain(b, scalar_system());
  EXPECT_DOUBLE_EQ(default_step(scalar_system(), b, fb), 0.01);
  SystemModel stiff = scalar_system();
  stiff.a(0, 0) = -100.0;
  EXPECT_NEAR(default_step(stiff, b, FeedbackLaw{Matrix::Zero(1, 1)}), 0.001, 1e-15);
}

TEST(OmegaOperatorNorm, Examples) {
  // 1x1: the similarity is trivial.
  EXPECT_DOUBLE_EQ(omega_operator_norm(scalar_bundle(), Matrix::Constant(1, 1, -3.0)), 3.0);
  // Lambda = I: the spectral norm.
  GramianBundle id;
  id.lambda = Matrix::Identity(2, 2);
  id.lambda_factor = SpdFactor(id.lambda);
  Matrix g(2, 2);
  g << 0, 2, 0, 0;
  EXPECT_NEAR(omega_operator_norm(id, g), 2.0, 1e-14);
  EXPECT_THROW(omega_operator_norm(id, Matrix::Zero(3, 3)), Error);
}

TEST(OmegaOperatorNorm, BoundsAndAttainsTheRatio) {
  const RandomCase c = random_case(6, 3, 42, 1.0);
  const FeedbackLaw fb = feedback_gain(c.bundle, c.sys);
  const Matrix g = c.sys.a + c.sys.b * fb.f_matrix;
  const double norm = omega_operator_norm(c.bundle, g);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const Vector x = random_unit(rng, 6);
    EXPECT_LE(omega_norm(c.bundle, g * x), norm * omega_norm(c.bundle, x) * (1 + 1e-12));
  }
  // Attained at R v, v the top right singular vector of R^{-1} G R.
  const Matrix r = c.bundle.lambda_factor.lower();
  Eigen::JacobiSVD<Matrix> svd(r.triangularView<Eigen::Lower>().solve(g * r),
                               Eigen::ComputeFullV);
  const Vector x = r * svd.matrixV().col(0);
  EXPECT_NEAR(omega_norm(c.bundle, g * x) / omega_norm(c.bundle, x), norm, 1e-10 * norm);
}
