#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qnd/search.hpp"

using namespace qnd;

namespace {

SearchSpace small_space() {
  SearchSpace s = SearchSpace::for_tau(3.0);
  s.cavity = {1.5, 0.0, 0.0};
  s.bounds[kSqueezeAngle] = {0.0, 0.0};
  return s;
}

Evaluation quadratic(const SearchPoint& x, const SearchPoint& target) {
  Evaluation e;
  e.x = x;
  double s = 0.0;
  for (int i = 0; i < kSearchDims; ++i) s += (x[i] - target[i]) * (x[i] - target[i]);
  e.objective = -s;
  e.distinguishability = 1.0 - s;
  e.disturbance = 0.0;
  e.feasible = true;
  return e;
}

}  // namespace

TEST(Objective, NoCouplingScoresZero) {
  SearchSpace s = small_space();
  s.g_max_mhz = 0.0;
  ReadoutOptions o;
  o.integrator.samples = 2;
  const SearchPoint x{7.0, 8.128, 2.0, 0.8, 2.2, 0.0};
  for (auto engine : {Engine::exact, Engine::moments}) {
    o.engine = engine;
    const Evaluation e = evaluate_candidate(s, x, o, {});
    EXPECT_FALSE(e.failed) << e.diagnostic;
    EXPECT_NEAR(e.objective, 0.0, 1e-9);
    EXPECT_NEAR(e.disturbance, 0.0, 1e-9);
  }
}

TEST(Objective, ViolationRanksBelowFeasible) {
  const ObjectiveSettings s;
  const double bad = penalized_objective(1.0, 2.0 * s.d_bound, 0.0, s);
  EXPECT_LT(bad, 0.5);
  EXPECT_LT(bad, penalized_objective(0.0, 0.0, 0.0, s));
  EXPECT_LT(penalized_objective(1.0, 0.0, 0.5, s), 0.0);
}

TEST(Objective, PenaltyOrderingProperty) {
  const ObjectiveSettings s;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const double D1 = u(rng), D2 = u(rng);
    const double feasible = penalized_objective(D1, s.d_bound * u(rng), s.edge_tolerance * u(rng), s);
    const double infeasible = penalized_objective(D2, s.d_bound * (1.0 + u(rng)) + 1e-12, 0.0, s);
    EXPECT_DOUBLE_EQ(feasible, D1);
    EXPECT_LT(infeasible, feasible);
  }
  // Larger excess is penalized more.
  EXPECT_LT(penalized_objective(0.9, 0.02, 0.0, s), penalized_objective(0.9, 0.01, 0.0, s));
}

TEST(Objective, EnvelopeEdge) {
  const SearchSpace s = small_space();
  EXPECT_LT(envelope_edge(s.protocol({7.0, 8.128, 8.0, 1.2, 1.8, 0.0}, false)), 1e-6);
  EXPECT_GT(envelope_edge(s.protocol({7.0, 8.128, 0.5, 0.0, 3.0, 0.0}, false)), 0.4);
}

TEST(SearchSpace, TauTiedRampBoundsAndRoundTrip) {
  const SearchSpace s = SearchSpace::for_tau(6.0);
  EXPECT_DOUBLE_EQ(s.bounds[kRampOn].hi, 3.0);
  EXPECT_DOUBLE_EQ(s.bounds[kRampOff].lo, 3.0);
  EXPECT_DOUBLE_EQ(s.bounds[kRampOff].hi, 6.0);
  const SearchPoint x{6.998, 8.128, 1.4994, 2.0416, 4.9029, 3.2108};
  const SearchPoint y = s.from_unit(s.to_unit(x));
  for (int i = 0; i < kSearchDims; ++i) EXPECT_NEAR(x[i], y[i], 1e-12);
  const SearchPoint back = point_from_protocol(s.protocol(x));
  for (int i = 0; i < kSearchDims; ++i) EXPECT_NEAR(x[i], back[i], 1e-12);
}

TEST(SearchSpace, RejectsCouplingAboveLimit) {
  SearchSpace s;
  s.g_max_mhz = 150.0;
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(DifferentialEvolution, FindsQuadraticMaximumDeterministically) {
  SearchSpace s;
  for (auto& b : s.bounds) b = {-1.0, 1.0};
  const SearchPoint target{0.3, -0.2, 0.5, 0.1, -0.7, 0.0};
  auto f = [&](const SearchPoint& x) { return quadratic(x, target); };
  DeSettings d;
  d.population = 30;
  d.generations = 150;
  const DeResult a = differential_evolution(f, s, {}, d, 5);
  const DeResult b = differential_evolution(f, s, {}, d, 5);
  EXPECT_GT(a.population.front().objective, -1e-4);
  EXPECT_EQ(a.population.front().objective, b.population.front().objective);
  EXPECT_EQ(a.evaluations, 30L * 151L);
  d.threads = 4;
  const DeResult c = differential_evolution(f, s, {}, d, 5);
  EXPECT_EQ(a.population.front().objective, c.population.front().objective);
}

TEST(NelderMead, ConvergesAndSkipsPinnedVariables) {
  SearchSpace s;
  for (auto& b : s.bounds) b = {-1.0, 1.0};
  s.bounds[kSqueezeAngle] = {0.25, 0.25};
  const SearchPoint target{0.3, -0.2, 0.5, 0.1, -0.7, 0.9};
  NelderMeadSettings n;
  n.max_evaluations = 2000;
  n.initial_step = 0.1;
  n.tolerance = 1e-14;
  const auto r = nelder_mead([&](const SearchPoint& x) { return quadratic(x, target); }, s, {}, n);
  for (int i = 0; i < kSqueezeAngle; ++i) EXPECT_NEAR(r.best.x[i], target[i], 1e-4);
  EXPECT_DOUBLE_EQ(r.best.x[kSqueezeAngle], 0.25);
}

TEST(Optimize, SameSeedSameResult) {
  const SearchSpace s = small_space();
  OptimizeSettings o;
  o.de.population = 8;
  o.de.generations = 2;
  o.de.threads = 1;
  o.local.max_evaluations = 8;
  o.local_starts = 1;
  o.verify_integrator.samples = 2;
  o.seed = 42;
  const SearchPoint warm{7.0, 8.128, 2.0, 0.8, 2.2, 0.0};
  const auto a = optimize_protocol(s, o, {warm});
  const auto b = optimize_protocol(s, o, {warm});
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.distinguishability, b.distinguishability);
  EXPECT_EQ(a.penalty_inversions, 0);
  EXPECT_EQ(a.local_results.size(), 2u);
}

TEST(Optimize, RequiresAStart) {
  OptimizeSettings o;
  o.skip_global = true;
  EXPECT_THROW(optimize_protocol(small_space(), o, {}), DomainError);
}

TEST(Robustness, SeedStreamsAreIndependent) {
  EXPECT_EQ(sample_seed(1, 2, 3), sample_seed(1, 2, 3));
  EXPECT_NE(sample_seed(1, 2, 3), sample_seed(1, 2, 4));
  EXPECT_NE(sample_seed(1, 2, 3), sample_seed(1, 3, 3));
  EXPECT_NE(sample_seed(1, 2, 3), sample_seed(2, 2, 3));
}

TEST(Robustness, ZeroSigmaRowIsNominalAndRunsRepeat) {
  const Protocol pr = small_space().protocol({7.0, 8.128, 2.0, 0.8, 2.2, 0.0});
  RobustnessSettings r;
  r.sigma_pct = {0.0, 2.0};
  r.samples = 6;
  const auto a = robustness_mc(pr, r, 9);
  EXPECT_EQ(a[0].samples, 1);
  EXPECT_NEAR(a[0].mean_error, population_error(pr, 1, r.integrator), 1e-15);
  EXPECT_EQ(a[0].std_error, 0.0);
  r.threads = 3;
  const auto b = robustness_mc(pr, r, 9);
  EXPECT_EQ(a[1].mean_error, b[1].mean_error);
  EXPECT_EQ(a[1].std_error, b[1].std_error);
  EXPECT_EQ(a[1].samples, 6);
}

TEST(TimeToFidelity, ZeroCouplingNeverReaches) {
  SearchSpace s = small_space();
  TimeToFidelitySettings t;
  t.tau_lo = 1.0;
  t.tau_hi = 2.0;
  t.resolution = 0.5;
  const auto rows = time_to_fidelity(s, {0.0}, t);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].reachable);
  EXPECT_TRUE(std::isnan(rows[0].tau_min));
}
