#include <cmath>

#include <gtest/gtest.h>

#include "../support/model.hpp"

using namespace twophase;
using namespace twophase::testing;

namespace {

struct Setup {
  SizeGrid grid;
  ModelParams params;
  Kernel kernel;
};

Setup setup(int n, const ModelParamsSpec& p, const KernelSpec& k, DomainKind kind = DomainKind::finite,
            double length = 1.0) {
  SizeGrid g(kind, length, n);
  return {g, sample_params(p, g), build_kernel(k, g)};
}

// Brute-force oracle: the same double integral at edge eps, summed cell by cell.
double brute_edge_integral(const Kernel& k, const SizeGrid& g, int edge) {
  double s = 0.0;
  for (int i = 0; i < edge; ++i)
    for (int j = edge; j < g.size(); ++j) s += k.beta(i, j) * g.h() * g.h();
  return s;
}

}  // namespace

TEST(Supports, Extents) {
  auto s = setup(100, rates(1, 1, 1), KernelSpec::constant(1));
  EXPECT_EQ(check_supports(s.params, s.grid).inf_supp_c1().value(), 0.0);
  ModelParamsSpec p = rates(1, 1, 0);
  p.c1 = Coefficient::indicator(0.5, 1.0);
  s = setup(100, p, KernelSpec::constant(1));
  const SupportCheck c = check_supports(s.params, s.grid);
  EXPECT_NEAR(c.inf_supp_c1().value(), 0.5, s.grid.h());
  EXPECT_FALSE(c.sup_supp_c2().has_value());
}

TEST(EdgeIntegrals, MatchBruteForce) {
  auto s = setup(30, rates(1, 1, 1),
                 KernelSpec::product(Coefficient::exp_decay(1, 2), Coefficient::linear(0.1, 1)));
  const auto e = edge_integrals(s.kernel, s.grid);
  ASSERT_EQ(e.size(), 29u);
  for (int k = 1; k < 30; ++k)
    EXPECT_NEAR(e[static_cast<std::size_t>(k - 1)], brute_edge_integral(s.kernel, s.grid, k), 1e-14);
}

TEST(H1, PositiveKernel) {
  auto s = setup(50, rates(1, 1, 1), KernelSpec::constant(1));
  EXPECT_TRUE(check_H1_family(s.kernel, s.grid, H1Mode::all_eps).holds);
  EXPECT_TRUE(check_H1_family(s.kernel, s.grid, H1Mode::exists_eps).holds);
}

TEST(H1, OneSidedKernelFailsBoth) {
  auto s = setup(50, rates(1, 1, 1), KernelSpec::lower_triangle());
  const Condition all = check_H1_family(s.kernel, s.grid, H1Mode::all_eps);
  EXPECT_FALSE(all.holds);
  EXPECT_TRUE(all.witness.has_value());
  EXPECT_FALSE(check_H1_family(s.kernel, s.grid, H1Mode::exists_eps).holds);
  for (double v : edge_integrals(s.kernel, s.grid)) EXPECT_EQ(v, 0.0);
}

TEST(H1, CornerBoxReachesEveryEdge) {
  auto s = setup(100, rates(1, 1, 1), KernelSpec::box(0.0, 0.2, 0.8, 1.0));
  for (double v : edge_integrals(s.kernel, s.grid)) EXPECT_GT(v, 0.0);
  EXPECT_TRUE(check_H1_family(s.kernel, s.grid, H1Mode::all_eps).holds);
  EXPECT_TRUE(check_H1_family(s.kernel, s.grid, H1Mode::exists_eps).holds);
}

TEST(B1B2, LateRecruitmentAndTransition) {
  ModelParamsSpec p = rates(1, 1, 1);
  p.c1 = Coefficient::indicator(0.5, 1.0);
  auto s = setup(200, p, KernelSpec::product(Coefficient::indicator(0.2, 1.0), Coefficient::constant(1)));
  const B1B2 b = compute_b1_b2(s.kernel, s.params, s.grid);
  ASSERT_TRUE(b.present()) << b.failed;
  EXPECT_NEAR(*b.b1, 0.2, s.grid.h());
  EXPECT_NEAR(*b.b2, 0.5, s.grid.h());
  // Oracle: the brute-force integral vanishes exactly at the edges up to b1.
  for (int k = 1; k < 200; ++k) {
    const bool zero = brute_edge_integral(s.kernel, s.grid, k) == 0.0;
    EXPECT_EQ(zero, s.grid.edge(k) <= *b.b1 + 1e-12) << k;
  }
}

TEST(B1B2, FullSupports) {
  auto s = setup(50, rates(1, 1, 1), KernelSpec::constant(1));
  const B1B2 b = compute_b1_b2(s.kernel, s.params, s.grid);
  ASSERT_TRUE(b.present());
  EXPECT_EQ(*b.b1, 0.0);
  EXPECT_EQ(*b.b2, 0.0);
}

TEST(B1B2, AbsentWithoutTransition) {
  auto s = setup(50, rates(1, 0, 1), KernelSpec::constant(1));
  const B1B2 b = compute_b1_b2(s.kernel, s.params, s.grid);
  EXPECT_FALSE(b.present());
  EXPECT_FALSE(b.failed.empty());
}

TEST(Conservativity, Classes) {
  auto neutral = setup(50, rates(1, 1, 1), KernelSpec::constant(1));
  EXPECT_EQ(classify_conservativity(neutral.kernel, neutral.params, neutral.grid).cls, Conservativity::neutral);

  auto super = setup(50, rates(1, 1, 1), KernelSpec::constant(2));
  const auto r = classify_conservativity(super.kernel, super.params, super.grid);
  EXPECT_EQ(r.cls, Conservativity::super);
  EXPECT_NEAR(r.min_margin, 1.0, 1e-14);

  ModelParamsSpec p = rates(1, 1, 0);
  p.c2 = Coefficient::exp_decay(1, 1);
  auto sub = setup(500, p, KernelSpec::product(Coefficient::indicator(0, 1, 0.5), Coefficient::constant(1)),
                   DomainKind::truncated_infinite, 50.0);
  EXPECT_EQ(classify_conservativity(sub.kernel, sub.params, sub.grid).cls, Conservativity::sub);
  EXPECT_EQ(full_verdict(sub.kernel, sub.params, sub.grid).predicted, Predicted::no_gap);
}

TEST(Verdict, IrreducibleGapAeg) {
  auto s = setup(100, rates(1, 1, 1), KernelSpec::constant(1));
  const Verdict v = full_verdict(s.kernel, s.params, s.grid);
  EXPECT_TRUE(v.irreducible);
  EXPECT_TRUE(v.discrete_irreducible);
  EXPECT_EQ(v.predicted, Predicted::irreducible_gap_aeg);
  EXPECT_FALSE(v.basis.empty());
}

TEST(Verdict, EmptySpectrum) {
  auto s = setup(100, rates(1, 1, 1), KernelSpec::lower_triangle());
  const Verdict v = full_verdict(s.kernel, s.params, s.grid);
  EXPECT_FALSE(v.H1bis.holds);
  EXPECT_FALSE(v.discrete_irreducible);
  EXPECT_EQ(v.predicted, Predicted::empty_spectrum);
}

TEST(Verdict, GapOnlyWithSubspace) {
  ModelParamsSpec p = rates(1, 1, 1);
  p.c1 = Coefficient::indicator(0.5, 1.0);
  auto s = setup(100, p, KernelSpec::constant(1));
  const Verdict v = full_verdict(s.kernel, s.params, s.grid);
  EXPECT_FALSE(v.H2.holds);
  EXPECT_TRUE(v.H1bis.holds);
  EXPECT_EQ(v.predicted, Predicted::gap_only);
  ASSERT_TRUE(v.b.present());
  EXPECT_NEAR(*v.b.b1, 0.0, s.grid.h());
  EXPECT_NEAR(*v.b.b2, 0.5, s.grid.h());
}

TEST(Verdict, IrreducibilityMatchesConditionConjunction) {
  for (int mask = 0; mask < 8; ++mask) {
    ModelParamsSpec p = rates(1, 1, 1);
    if (!(mask & 2)) p.c1 = Coefficient::indicator(0.5, 1.0);
    if (!(mask & 4)) p.c2 = Coefficient::indicator(0.0, 0.5);
    auto s = setup(60, p, (mask & 1) ? KernelSpec::constant(1) : KernelSpec::lower_triangle());
    const Verdict v = full_verdict(s.kernel, s.params, s.grid);
    EXPECT_EQ(v.irreducible, mask == 7) << mask;
    // Independent route: graph connectivity of the assembled matrix.
    EXPECT_EQ(v.discrete_irreducible, mask == 7) << mask;
  }
}

TEST(Verdict, WeakCompactnessOnlyWithDominator) {
  auto s = setup(20, rates(1, 1, 1), KernelSpec::constant(1));
  EXPECT_FALSE(full_verdict(s.kernel, s.params, s.grid).weak_compact_sufficient.has_value());
  KernelSpec k = KernelSpec::constant(1);
  k.dominator = Coefficient::constant(1);
  s = setup(20, rates(1, 1, 1), k);
  EXPECT_EQ(full_verdict(s.kernel, s.params, s.grid).weak_compact_sufficient, std::optional<bool>(true));
}

TEST(Verdict, ConstantCaseOnTruncatedDomain) {
  auto s = setup(500, rates(1, 1, 1), KernelSpec::product(Coefficient::indicator(0, 1), Coefficient::constant(1)),
                 DomainKind::truncated_infinite, 50.0);
  const Verdict v = full_verdict(s.kernel, s.params, s.grid);
  EXPECT_TRUE(v.constant_case);
  EXPECT_EQ(v.domain, DomainKind::truncated_infinite);
}
