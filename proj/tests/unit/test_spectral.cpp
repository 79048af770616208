#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "../support/model.hpp"
#include "twophase/error.hpp"

using namespace twophase;
using namespace twophase::testing;

namespace {

KernelSpec unit_box_recruitment(double value = 1.0) {
  return KernelSpec::product(Coefficient::indicator(0.0, 1.0, value), Coefficient::constant(1.0));
}

double rightmost_real_part(const Eigen::MatrixXd& m) {
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues();
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < ev.size(); ++i) best = std::max(best, ev[i].real());
  return best;
}

}  // namespace

TEST(SpectralBound, PureDecayIsTheDiagonal) {
  for (int n : {20, 40, 80}) {
    auto m = finite_model(n, rates(1, 0, 0), KernelSpec::constant(0.0));
    const Eigenpair e = spectral_bound(m.gen, Part::full);
    // Lower-bidiagonal: the eigenvalues are the diagonal entries -1/h - 1 (phase 1)
    // and -1/h (phase 2, which has no mortality).
    const Eigen::VectorXd diag = m.gen.dense(Part::full).diagonal();
    EXPECT_NEAR(e.value, diag.maxCoeff(), 1e-9);
    EXPECT_NEAR(e.value, -1.0 / m.grid.h(), 1e-9);
    EXPECT_LE(e.value, -1.0);
  }
}

TEST(SpectralBound, GershgorinShadowForB) {
  double prev = 0.0;
  for (int n : {50, 100, 200, 400}) {
    auto m = finite_model(n, rates(0.5, 1, 2), KernelSpec::constant(1.0));
    const double s = spectral_bound(m.gen, Part::no_recruitment).value;
    EXPECT_LE(s, -m.params.gamma0 / m.grid.h() + m.gen.coupling_inf_norm());
    if (n > 50) EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(SpectralBound, AgreesWithDenseEigenvaluesWhenCoupled) {
  ModelParamsSpec p = rates(0.7, 1.2, 0.4);
  p.gamma1 = Coefficient::linear(1.0, 0.5);
  auto m = finite_model(60, p, KernelSpec::product(Coefficient::exp_decay(2, 1), Coefficient::constant(1)));
  const Eigenpair e = spectral_bound(m.gen, Part::full);
  EXPECT_EQ(e.method, "shift-invert");
  EXPECT_TRUE(e.converged);
  EXPECT_NEAR(e.value, rightmost_real_part(m.gen.dense(Part::full)), 1e-8);
  EXPECT_GE(e.vector.min(), 0.0);
  EXPECT_NEAR(e.vector.mass(), 1.0, 1e-12);
  // Residual of the eigen equation.
  StateVector r = m.gen.apply(Part::full, e.vector);
  r.data() -= e.value * e.vector.data();
  EXPECT_LT(r.norm(), 1e-7);
}

TEST(SpectralBound, BlockRouteForOneSidedKernel) {
  auto m = finite_model(40, rates(1, 1, 1), KernelSpec::lower_triangle());
  const Eigenpair e = spectral_bound(m.gen, Part::full);
  EXPECT_EQ(e.method, "block");
  // Every 2x2 cell block has the same entries; its Perron root is the oracle.
  const double a = -1.0 / m.grid.h() - 2.0, d = -1.0 / m.grid.h() - 1.0;
  const double root = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + 1.0);
  EXPECT_NEAR(e.value, root, 1e-10);
  EXPECT_NEAR(e.value, -1.0 / m.grid.h() + (-3.0 + std::sqrt(5.0)) / 2.0, 1e-10);
}

TEST(SpectralBound, ConservativeConfigHasZeroBound) {
  auto m = make_model(DomainKind::truncated_infinite, 40.0, 800, rates(1, 1, 1), unit_box_recruitment());
  const Eigenpair e = spectral_bound(m.gen, Part::full);
  EXPECT_NEAR(e.value, 0.0, 1e-3);
}

TEST(SpectralBound, IterationBudgetExhausted) {
  auto m = finite_model(60, rates(1, 1, 1), KernelSpec::constant(1.0));
  SpectralOptions o;
  o.max_iterations = 2;
  EXPECT_THROW(spectral_bound(m.gen, Part::full, o), IterationError);
}

TEST(ClosedForm, PaperSpecialCases) {
  EXPECT_NEAR(closed_form_sB(0.0, 2.0, 1.0), -1.0, 1e-15);  // max(-l_mu, -c2)
  EXPECT_EQ(closed_form_sB(1.0, 3.0, 0.0), 0.0);
  EXPECT_EQ(closed_form_sB(0.0, 0.0, 0.0), 0.0);
  EXPECT_THROW(closed_form_sB(-1.0, 1.0, 1.0), ConfigError);
}

TEST(ClosedForm, RootOfGrowthPolynomial) {
  const double l = closed_form_sB(1.0, 1.0, 1.0);
  EXPECT_NEAR(l, (-3.0 + std::sqrt(5.0)) / 2.0, 1e-15);
  EXPECT_LT(std::abs(growth_polynomial(l, 1, 1, 1)), 1e-15);
  for (double l1 : {0.1, 2.0, 7.0})
    for (double c2 : {0.3, 1.0})
      for (double mu : {0.2, 4.0}) {
        const double r = closed_form_sB(l1, c2, mu);
        EXPECT_LT(std::abs(growth_polynomial(r, l1, c2, mu)), 1e-12 * (1 + r * r));
        // Right root: P is increasing to the right of it.
        EXPECT_GT(growth_polynomial(r + 1e-6, l1, c2, mu), 0.0);
        EXPECT_LE(r, 0.0);
      }
}

TEST(GapBound, ZeroRecruitment) {
  EXPECT_EQ(spectral_gap_lower_bound(1, 1, 1, 0.0).eps_bar, 0.0);
}

TEST(GapBound, UnitCase) {
  const GapBound g = spectral_gap_lower_bound(1, 1, 1, 1.0);
  EXPECT_NEAR(g.lambda_star, (-3 + std::sqrt(5.0)) / 2, 1e-15);
  EXPECT_NEAR(g.delta, 4.0, 1e-14);
  EXPECT_NEAR(g.eps_bar, (3 - std::sqrt(5.0)) / 2, 1e-15);
  EXPECT_NEAR(g.lambda_star + g.eps_bar, 0.0, 1e-15);
  EXPECT_LT(std::abs(gap_function(g.eps_bar, g.lambda_star, 1, 1, 1, 1.0)), 1e-15);
}

TEST(GapBound, RootCheck) {
  const GapBound g = spectral_gap_lower_bound(1, 2, 1, 0.5);
  EXPECT_GT(g.eps_bar, 0.0);
  EXPECT_LT(std::abs(gap_function(g.eps_bar, g.lambda_star, 1, 2, 1, 0.5)), 1e-12);
  EXPECT_THROW(spectral_gap_lower_bound(0, 1, 1, 0.5), ConfigError);
}

TEST(GapBound, BoundsMeasuredGap) {
  auto m = make_model(DomainKind::truncated_infinite, 40.0, 400, rates(1, 2, 1), unit_box_recruitment(0.5));
  const GapBound g = spectral_gap_lower_bound(1, 2, 1, 0.5);
  EXPECT_GE(spectral_bound(m.gen, Part::full).value, g.lambda_star + g.eps_bar - 0.05);
}

TEST(TailLimits, ConstantAndDecaying) {
  const SizeGrid g(DomainKind::truncated_infinite, 50.0, 500);
  const auto t = tail_limits(sample_params(rates(1, 2, 3), g));
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(t->l_mu, 1.0);
  EXPECT_EQ(t->l1, 2.0);
  EXPECT_EQ(t->c2, 3.0);
  ModelParamsSpec p = rates(1, 1, 1);
  p.c2 = Coefficient::exp_decay(1, 1);
  EXPECT_FALSE(tail_limits(sample_params(p, g)).has_value());
}

TEST(SurrogateFinite, AlwaysDivergentRegime) {
  auto m = finite_model(100, rates(1, 1, 1), KernelSpec::constant(1.0));
  const SBSurrogate s = sB_surrogate_finite(m.gen);
  EXPECT_TRUE(s.divergent());
  EXPECT_LE(s.discrete, s.threshold);
}

TEST(CoupledDuhamel, MatchesDirectSolve) {
  const SizeGrid g(DomainKind::truncated_infinite, 20.0, 400);
  const ModelParams p = sample_params(rates(1, 0.5, 1), g);
  const auto h = StateVector::sample(g, Coefficient::indicator(0, 1), Coefficient::indicator(0, 1));
  const auto sol = coupled_duhamel(g, p, 0.5, h);
  const Kernel k = build_kernel(KernelSpec::constant(0.0), g);
  const auto gen = DiscreteGenerator::assemble(g, p, k);
  const auto direct = resolvent_direct(gen, 0.5, h, Part::no_recruitment);
  // Different quadratures of the same resolvent: first-order agreement.
  EXPECT_LT(sol.u.l1_distance(direct) / direct.norm(), 5 * g.h());
}

TEST(Probe, InfiniteDomainClassification) {
  const ModelParamsSpec p = rates(1, 0, 1);
  const std::vector<double> smax{25, 50, 100};
  EXPECT_EQ(sB_probe_infinite(p, -0.5, smax, 0.05).classification, ProbeClass::bounded);
  EXPECT_EQ(sB_probe_infinite(p, -1.5, smax, 0.05).classification, ProbeClass::diverging);
  EXPECT_EQ(sB_probe_infinite(p, 0.5, smax, 0.05).classification, ProbeClass::bounded);
}

TEST(Probe, SubConservativeAboveZero) {
  ModelParamsSpec p = rates(1, 1, 0);
  p.c2 = Coefficient::exp_decay(1, 1);
  // Near zero the resolvent mass converges like 1 - e^{-0.05 S}: the truncations must
  // reach well past 1/0.05 before successive masses settle.
  const ProbeResult r = sB_probe_infinite(p, 0.05, {100, 200, 400}, 0.1);
  EXPECT_EQ(r.classification, ProbeClass::bounded) << r.ratios[0] << " " << r.ratios[1];
  EXPECT_NE(sB_probe_infinite(p, 0.05, {25, 50, 100}, 0.1).classification, ProbeClass::diverging);
}

TEST(Aeg, TwoRoutesAgree) {
  auto m = finite_model(200, rates(1, 1, 1), KernelSpec::constant(1.0));
  const Eigenpair e = spectral_bound(m.gen, Part::full);
  const auto u0 = StateVector::sample(m.grid, Coefficient::indicator(0, 0.25), Coefficient::constant(0));
  const Trajectory tr = evolve(m.gen, u0, 1e-3, 8.0, 50);
  const AegFit fit = detect_AEG(tr, e.vector);
  EXPECT_EQ(fit.status, AegStatus::fitted);
  EXPECT_NEAR(fit.lambda0_fit, e.value, 1e-3 * std::abs(e.value));
  EXPECT_LT(fit.profile_decay_rate, 0.0);
}

TEST(Aeg, NoRecruitmentDoesNotGrow) {
  auto m = finite_model(100, rates(0.5, 1, 1), KernelSpec::constant(0.0));
  const auto u0 = StateVector::sample(m.grid, Coefficient::indicator(0, 0.25), Coefficient::constant(0));
  const Trajectory tr = evolve(m.gen, u0, 1e-2, 0.9, 1);
  const AegFit fit = detect_AEG(tr);
  EXPECT_LE(fit.lambda0_fit, 0.0);
}

TEST(Aeg, EigenfunctionIsStationaryProfile) {
  auto m = finite_model(100, rates(1, 1, 1), KernelSpec::constant(1.0));
  const Eigenpair e = spectral_bound(m.gen, Part::full);
  const Trajectory tr = evolve(m.gen, e.vector, 1e-3, 1.0, 10);
  for (const auto& s : tr.states) EXPECT_LE(s.normalized().l1_distance(e.vector), 1e-6);
}

TEST(Aeg, TooShortTrajectory) {
  auto m = finite_model(20, rates(1, 1, 1), KernelSpec::constant(1.0));
  const auto u0 = StateVector::sample(m.grid, Coefficient::constant(1), Coefficient::constant(0));
  EXPECT_THROW(detect_AEG(evolve(m.gen, u0, 0.1, 1.0, 1)), InsufficientDataError);
}
