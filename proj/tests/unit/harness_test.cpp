#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "opod/harness.hpp"
#include "oracles.hpp"

using namespace opod;

namespace {

Trace constant_trace(double price, std::size_t T)
{
   Trace tr;
   for (std::size_t i = 0; i < T; ++i) tr.push(price, 0.0);
   return tr;
}

Scenario fixed_baseline(double offset, std::uint64_t T)
{
   Scenario sc;
   sc.instance = oracle::instance1();
   sc.policy.kind = PolicyKind::fixed_price;
   sc.policy.fixed_price = optimal_price(sc.instance.theta_star, sc.instance.prices) + offset;
   sc.T = T;
   return sc;
}

Scenario o3fu_single(std::uint64_t n, double price, std::uint64_t T)
{
   Scenario sc;
   sc.instance = oracle::instance1();
   sc.offline.mode = OfflineMode::fixed;
   sc.offline.n = n;
   sc.offline.price = price;
   sc.T = T;
   return sc;
}

} // namespace

TEST(Regret, Examples)
{
   const DemandParams th{2.0, -1.0};
   const PriceInterval pr{0.1, 2.0};
   EXPECT_EQ(regret(constant_trace(1.0, 50), th, pr).cumulative_regret, 0.0);
   const auto rec = regret(constant_trace(1.1, 100), th, pr);
   EXPECT_NEAR(rec.cumulative_regret, 1.0, 1e-12);
   EXPECT_NEAR(rec.relative_regret, 0.01, 1e-14);
}

TEST(Regret, NonNegativeAndMatchesRevenueDifference)
{
   const Instance inst = oracle::instance3();
   CounterRng rng(1, 0);
   const Trace tr = cils_run(inst, OfflineDataset{}, 500, {0.5}, rng);
   const auto rec = regret(tr, inst.theta_star, inst.prices, true);
   EXPECT_GE(rec.cumulative_regret, 0.0);
   ASSERT_EQ(rec.per_period.size(), tr.size());
   double direct = 0.0, prev = 0.0;
   for (std::size_t i = 0; i < tr.size(); ++i) {
      const double p = tr.periods[i].price;
      const double gap = oracle::revenue(2.9 / 5.2, 2.9, -2.6) - oracle::revenue(p, 2.9, -2.6);
      direct += gap;
      EXPECT_NEAR(rec.per_period[i] - prev, gap, 1e-9);
      EXPECT_GE(rec.per_period[i], prev);
      prev = rec.per_period[i];
   }
   EXPECT_NEAR(rec.cumulative_regret, direct, 1e-9);
}

TEST(Regret, BoundaryOptimumUsesRevenueDifference)
{
   const DemandParams th{10.0, -1.0};  // peak 5 lies above u
   const PriceInterval pr{0.1, 2.0};
   const auto rec = regret(constant_trace(1.5, 10), th, pr);
   EXPECT_NEAR(rec.cumulative_regret, 10 * (oracle::revenue(2.0, 10, -1) - oracle::revenue(1.5, 10, -1)), 1e-12);
}

TEST(Regret, AdditiveOverConcatenation)
{
   const Instance inst = oracle::instance2();
   CounterRng rng(2, 0);
   const Trace tr = cils_run(inst, OfflineDataset{}, 301, {0.1}, rng);
   Trace a, b;
   for (std::size_t i = 0; i < tr.size(); ++i) (i < 150 ? a : b).periods.push_back(tr.periods[i]);
   const double whole = regret(tr, inst.theta_star, inst.prices).cumulative_regret;
   const double parts = regret(a, inst.theta_star, inst.prices).cumulative_regret +
                        regret(b, inst.theta_star, inst.prices).cumulative_regret;
   EXPECT_NEAR(whole, parts, 1e-12 * (1 + whole));
}

TEST(Moments, NormalApproximation)
{
   const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
   const Moments m = moments(xs);
   EXPECT_DOUBLE_EQ(m.mean, 2.5);
   ASSERT_TRUE(m.std);
   EXPECT_NEAR(*m.std, std::sqrt(5.0 / 3.0), 1e-14);
   EXPECT_NEAR(m.ci95, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-14);
   const Moments one = moments(std::vector<double>{7.0});
   EXPECT_FALSE(one.std);
   EXPECT_EQ(one.mean, 7.0);
}

TEST(Replicate, SingleReplication)
{
   const Scenario sc = o3fu_single(10, 1.8, 50);
   const Aggregate agg = replicate(sc, 1, 3);
   ASSERT_EQ(agg.records.size(), 1u);
   EXPECT_FALSE(agg.std);
   EXPECT_EQ(agg.mean, agg.records[0].cumulative_regret);
   EXPECT_EQ(agg.mean, run_replication(sc, 3, 0).cumulative_regret);
}

TEST(Replicate, DoublingRepsKeepsPrefix)
{
   const Scenario sc = o3fu_single(10, 1.8, 60);
   const Aggregate a = replicate(sc, 4, 9), b = replicate(sc, 8, 9);
   for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.records[i].cumulative_regret, b.records[i].cumulative_regret);
}

TEST(Replicate, IndependentOfThreadCount)
{
   const Scenario sc = o3fu_single(10, 1.8, 80);
   const Aggregate a = replicate(sc, 6, 11, 1), b = replicate(sc, 6, 11, 4);
   for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.records[i].cumulative_regret, b.records[i].cumulative_regret);
   EXPECT_EQ(a.mean, b.mean);
}

TEST(Replicate, FixedBaselineMatchesExpectation)
{
   const Scenario sc = fixed_baseline(0.2, 200);
   const Aggregate agg = replicate(sc, 50, 1);
   // Expectation-form regret of a constant price is deterministic.
   EXPECT_NEAR(agg.mean, 200 * 1.8 * 0.04, 1e-9);
   EXPECT_NEAR(*agg.std, 0.0, 1e-9);
}

TEST(Replicate, RejectsZeroReps)
{
   EXPECT_THROW(replicate(fixed_baseline(0.0, 10), 0, 1), ParameterError);
}

TEST(ParallelFor, PropagatesExceptions)
{
   EXPECT_THROW(parallel_for(16, 4,
                             [](std::size_t i) {
                                if (i == 7) throw std::runtime_error("boom");
                             }),
                std::runtime_error);
}

TEST(Sweep, SinglePointEqualsReplicate)
{
   const Scenario base = o3fu_single(100, 1.8, 120);
   const std::vector<double> grid{100};
   const SweepResult r = sweep(SweepAxis::offline_size, grid, base, 5, 4);
   const Aggregate agg = replicate(base, 5, 4);
   ASSERT_EQ(r.points.size(), 1u);
   EXPECT_EQ(r.points[0].mean, agg.mean);
   EXPECT_EQ(r.points[0].std, *agg.std);
   EXPECT_EQ(r.points[0].reps, 5u);
   EXPECT_EQ(r.points[0].n, 100u);
   EXPECT_NEAR(r.points[0].delta, 1.8 - 2.6 / 3.6, 1e-12);
   EXPECT_EQ(r.policy, "o3fu");
   EXPECT_EQ(r.instance, "instance1");
}

TEST(Sweep, Deterministic)
{
   const Scenario base = o3fu_single(100, 1.8, 100);
   const std::vector<double> grid{20, 200};
   const SweepResult a = sweep(SweepAxis::offline_size, grid, base, 3, 5, 1);
   const SweepResult b = sweep(SweepAxis::offline_size, grid, base, 3, 5, 3);
   ASSERT_EQ(a.points.size(), b.points.size());
   for (std::size_t i = 0; i < a.points.size(); ++i) {
      EXPECT_EQ(a.points[i].mean, b.points[i].mean);
      EXPECT_EQ(a.points[i].ci95, b.points[i].ci95);
   }
}

TEST(Sweep, HorizonPrefixEqualsSeparateRuns)
{
   const Scenario base = o3fu_single(50, 1.8, 1);
   const std::vector<double> grid{40, 90};
   const SweepResult r = sweep(SweepAxis::horizon, grid, base, 3, 6);
   for (std::size_t g = 0; g < grid.size(); ++g) {
      Scenario sc = base;
      sc.T = static_cast<std::uint64_t>(grid[g]);
      const Aggregate agg = replicate(sc, 3, 6);
      EXPECT_NEAR(r.points[g].mean, agg.mean, 1e-9 * (1 + agg.mean));
      EXPECT_EQ(r.points[g].T, sc.T);
   }
}

TEST(Sweep, DeltaAxisPlacesOfflinePrice)
{
   const Scenario base = o3fu_single(20, 1.0, 30);
   const std::vector<double> grid{0.1, 0.5};
   const SweepResult r = sweep(SweepAxis::delta, grid, base, 2, 1);
   EXPECT_NEAR(r.points[0].delta, 0.1, 1e-12);
   EXPECT_NEAR(r.points[1].delta, 0.5, 1e-12);
}

TEST(Sweep, SigmaAxisReportsDispersion)
{
   Scenario base;
   base.instance = oracle::instance3();
   base.policy.kind = PolicyKind::m_o3fu;
   base.offline.mode = OfflineMode::split;
   base.offline.n = 500;
   base.offline.center = 0.7;
   base.T = 30;
   const std::vector<double> grid{0.1, 0.3};
   const SweepResult r = sweep(SweepAxis::sigma, grid, base, 2, 1);
   EXPECT_NEAR(r.points[0].sigma, 0.1, 1e-12);
   EXPECT_NEAR(r.points[1].sigma, 0.3, 1e-12);
   EXPECT_NEAR(r.points[1].delta, std::abs(0.7 - 2.9 / 5.2), 1e-12);
}

TEST(Sweep, RejectsMismatchedAxis)
{
   const Scenario o3fu = o3fu_single(20, 1.0, 30);
   const std::vector<double> grid{0.1, 0.2};
   EXPECT_THROW(sweep(SweepAxis::sigma, grid, o3fu, 2, 1), ParameterError);
   Scenario none = o3fu;
   none.offline.mode = OfflineMode::none;
   EXPECT_THROW(sweep(SweepAxis::offline_size, grid, none, 2, 1), ParameterError);
   EXPECT_THROW(sweep(SweepAxis::delta, std::vector<double>{5.0}, o3fu, 2, 1), ParameterError);
   EXPECT_THROW(sweep(SweepAxis::offline_size, std::vector<double>{}, o3fu, 2, 1), ParameterError);
   EXPECT_THROW(sweep(SweepAxis::offline_size, std::vector<double>{200, 20}, o3fu, 2, 1), ParameterError);
}

TEST(SweepAxisNames, RoundTrip)
{
   for (auto a : {SweepAxis::offline_size, SweepAxis::delta, SweepAxis::sigma, SweepAxis::horizon})
      EXPECT_EQ(sweep_axis_from_string(to_string(a)), a);
   EXPECT_THROW(sweep_axis_from_string("theta"), ParameterError);
}

TEST(ScalingExponent, ExactPowerLaw)
{
   std::vector<double> xs, ys;
   for (double x = 1; x <= 1e4; x *= 3) {
      xs.push_back(x);
      ys.push_back(std::sqrt(x));
   }
   EXPECT_NEAR(scaling_exponent(xs, ys).slope, 0.5, 1e-9);
}

TEST(ScalingExponent, DropsNonPositivePoints)
{
   SweepResult r;
   for (double x : {1.0, 2.0, 4.0, 8.0, 16.0}) r.points.push_back({x, x * x});
   r.points[2].mean = 0.0;
   const ScalingFit fit = scaling_exponent(r);
   EXPECT_EQ(fit.dropped, 1u);
   EXPECT_EQ(fit.used, 4u);
   EXPECT_NEAR(fit.slope, 2.0, 1e-12);
   r.points.resize(3);
   EXPECT_THROW(scaling_exponent(r), ParameterError);
}

TEST(ScalingExponent, FixedBaselineIsLinearInT)
{
   const Scenario base = fixed_baseline(0.15, 1);
   const std::vector<double> grid{100, 300, 1000, 3000};
   const SweepResult r = sweep(SweepAxis::horizon, grid, base, 5, 2);
   EXPECT_NEAR(scaling_exponent(r).slope, 1.0, 0.05);
}

TEST(TheoreticalRate, Examples)
{
   const double T = 1e4;
   EXPECT_EQ(theoretical_rate(T, 1000, 0.0, 0.5).label.rate, RateTag::T_over_n_delta2);
   EXPECT_EQ(theoretical_rate(T, 1000, 0.0, 0.5).label.regime, Regime::single_far);
   for (double d : {0.0, 0.01, 0.9})
      for (double s : {0.0, 0.3}) {
         const auto r = theoretical_rate(T, 0, s, d);
         EXPECT_EQ(r.label.rate, RateTag::sqrtT);
         EXPECT_EQ(r.label.regime, Regime::no_offline);
         EXPECT_DOUBLE_EQ(r.value, 100.0);
      }
   // Corner case: delta = T^{-1/3}, n sigma^2 = T^{0.6}.
   const double delta = std::pow(T, -1.0 / 3.0), n = 1000, sigma = std::sqrt(std::pow(T, 0.6) / n);
   ASSERT_LE(delta * delta, 1.0 / (n * sigma * sigma));
   const auto corner = theoretical_rate(T, n, sigma, delta);
   EXPECT_EQ(corner.label.rate, RateTag::T_delta2);
   EXPECT_NEAR(corner.value, T * delta * delta, 1e-9);
   EXPECT_NEAR(optimal_regret_formula(T, n, sigma, delta), T * delta * delta, 1e-9);
}

TEST(TheoreticalRate, SingleHistoricalPriceRows)
{
   const double T = 1e4, delta = 0.5;
   EXPECT_EQ(theoretical_rate(T, 100, 0.0, delta).label.rate, RateTag::sqrtT);
   EXPECT_EQ(theoretical_rate(T, 5000, 0.0, delta).label.rate, RateTag::T_over_n_delta2);
   EXPECT_EQ(theoretical_rate(T, 1e6, 0.0, delta).label.rate, RateTag::logT_over_delta2);
   EXPECT_EQ(theoretical_rate(T, 1e6, 0.0, 0.01).label.regime, Regime::single_near);
   EXPECT_EQ(theoretical_rate(T, 1e6, 0.0, 0.01).label.rate, RateTag::sqrtT);
}

TEST(TheoreticalRate, ContinuousAcrossBoundaries)
{
   // At each boundary of the piecewise map, the formulas on both sides agree
   // within a factor of two at unit constants.
   const double T = 1e6;
   auto agree = [](double a, double b) { return a <= 2 * b && b <= 2 * a; };
   auto around = [&](double n, double s, double d) {
      const auto lo = theoretical_rate(T, n * (1 - 1e-9), s, d);
      const auto hi = theoretical_rate(T, n * (1 + 1e-9), s, d);
      EXPECT_TRUE(agree(lo.value, hi.value))
         << to_string(lo.label.rate) << "=" << lo.value << " vs " << to_string(hi.label.rate) << "=" << hi.value;
      return std::make_pair(lo.label.rate, hi.label.rate);
   };
   const double sqrtT = std::sqrt(T);
   // sigma = 0, far: sqrtT | T/(n d^2) at n = sqrtT/d^2; T/(n d^2) | 1/d^2 at n = T.
   for (double d : {0.2, 0.5}) {
      EXPECT_EQ(around(sqrtT / (d * d), 0.0, d), std::make_pair(RateTag::sqrtT, RateTag::T_over_n_delta2));
      EXPECT_EQ(around(T, 0.0, d), std::make_pair(RateTag::T_over_n_delta2, RateTag::logT_over_delta2));
   }
   // sigma <= delta, far.
   {
      const double d = 0.5, s = 0.1;
      EXPECT_EQ(around(sqrtT / (d * d), s, d), std::make_pair(RateTag::sqrtT, RateTag::T_over_n_delta2));
      EXPECT_EQ(around(T, s, d), std::make_pair(RateTag::T_over_n_delta2, RateTag::one_over_delta2));
      EXPECT_EQ(around(T * d * d / (s * s), s, d), std::make_pair(RateTag::one_over_delta2, RateTag::T_over_n_sigma2));
   }
   // sigma > delta, far.
   {
      const double d = 0.1, s = 0.4;
      EXPECT_EQ(around(sqrtT / (s * s), s, d), std::make_pair(RateTag::sqrtT, RateTag::T_over_n_sigma2));
   }
   // near: sqrtT | T d^2 | T/(n s^2). The first boundary is continuous only as
   // delta approaches T^{-1/4}, where the near rows meet the far rows.
   {
      const double d = 0.99 * std::pow(T, -0.25), s = 0.3;
      const double n1 = sqrtT / (s * s), n2 = 1.0 / (d * d * s * s);
      const auto first = around(n1, s, d);
      EXPECT_EQ(first.first, RateTag::sqrtT);
      EXPECT_EQ(first.second, RateTag::T_delta2);
      EXPECT_EQ(around(n2, s, d), std::make_pair(RateTag::T_delta2, RateTag::T_over_n_sigma2));
   }
}

TEST(OptimalRegretFormula, RegularCase)
{
   EXPECT_DOUBLE_EQ(optimal_regret_formula(1e4, 0, 0, 0.3), 100.0);
   EXPECT_NEAR(optimal_regret_formula(1e4, 5000, 0, 0.5), 1e4 / (5000 * 0.25), 1e-9);
   EXPECT_NEAR(optimal_regret_formula(1e4, 1e6, 0, 0.5), 1e4 / (1e4 * 0.25), 1e-9);
}
