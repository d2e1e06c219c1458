#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "opod/scenario.hpp"

namespace opod {

struct RegretRecord {
   double cumulative_regret = 0.0;
   double relative_regret = 0.0;
   /// Cumulative regret after each period, when requested.
   std::vector<double> per_period;
   std::size_t replication_id = 0;
   std::uint64_t seed = 0;
};

/// Per-period revenue gap r*(theta) - r(p; theta), never negative.
inline double revenue_gap(double p, const DemandParams& theta, const PriceInterval& prices) noexcept
{
   const double peak = peak_price(theta);
   if (prices.contains(peak)) {
      const double d = p - peak;
      return -theta.beta * d * d;
   }
   return std::max(0.0, optimal_revenue(theta, prices) - expected_revenue(p, theta));
}

/// Expectation-form regret: sum of noiseless revenue gaps at the realized prices.
inline RegretRecord regret(const Trace& trace, const DemandParams& theta, const PriceInterval& prices,
                           bool keep_per_period = false)
{
   RegretRecord rec;
   if (keep_per_period) rec.per_period.reserve(trace.size());
   double total = 0.0;
   for (const auto& p : trace.periods) {
      total += revenue_gap(p.price, theta, prices);
      if (keep_per_period) rec.per_period.push_back(total);
   }
   rec.cumulative_regret = total;
   const double denom = static_cast<double>(trace.size()) * optimal_revenue(theta, prices);
   rec.relative_regret = denom > 0.0 ? total / denom : 0.0;
   return rec;
}

/// Summary statistics of a set of replications.
struct Aggregate {
   double mean = 0.0;
   std::optional<double> std;
   double ci95 = 0.0;
   double mean_relative = 0.0;
   std::vector<RegretRecord> records;
};

struct Moments {
   double mean = 0.0;
   std::optional<double> std;
   double ci95 = 0.0;
};

/// Mean, sample standard deviation and normal-approximation 95% half-width.
inline Moments moments(std::span<const double> xs)
{
   Moments m;
   if (xs.empty()) return m;
   double sum = 0.0;
   for (double x : xs) sum += x;
   m.mean = sum / static_cast<double>(xs.size());
   if (xs.size() >= 2) {
      double ss = 0.0;
      for (double x : xs) ss += (x - m.mean) * (x - m.mean);
      m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
      m.ci95 = 1.96 * *m.std / std::sqrt(static_cast<double>(xs.size()));
   }
   return m;
}

inline Aggregate summarize(std::vector<RegretRecord> records)
{
   Aggregate agg;
   std::vector<double> abs_vals, rel_vals;
   abs_vals.reserve(records.size());
   rel_vals.reserve(records.size());
   for (const auto& r : records) {
      abs_vals.push_back(r.cumulative_regret);
      rel_vals.push_back(r.relative_regret);
   }
   const Moments m = moments(abs_vals);
   agg.mean = m.mean;
   agg.std = m.std;
   agg.ci95 = m.ci95;
   agg.mean_relative = moments(rel_vals).mean;
   agg.records = std::move(records);
   return agg;
}

inline std::size_t default_jobs()
{
   const unsigned hc = std::thread::hardware_concurrency();
   return hc == 0 ? 1 : hc;
}

/// Calls fn(i) for i in [0, count) on up to `jobs` threads (0 = all cores).
/// The first exception thrown by any call is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn)
{
   if (jobs == 0) jobs = default_jobs();
   jobs = std::min(jobs, count);
   if (jobs <= 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
   }
   std::atomic<std::size_t> next{0};
   std::exception_ptr error;
   std::mutex error_mu;
   std::vector<std::thread> pool;
   pool.reserve(jobs);
   for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
         for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
               fn(i);
            } catch (...) {
               std::lock_guard lock(error_mu);
               if (!error) error = std::current_exception();
               next = count;
            }
         }
      });
   }
   for (auto& t : pool) t.join();
   if (error) std::rethrow_exception(error);
}

/// One replication: offline generation and the policy run on the stream
/// keyed by (seed, rep).
inline RegretRecord run_replication(const Scenario& sc, std::uint64_t seed, std::size_t rep, bool per_period = false)
{
   CounterRng rng = replication_stream(seed, rep);
   const Trace trace = run_scenario(sc, rng);
   RegretRecord rec = regret(trace, sc.instance.theta_star, sc.instance.prices, per_period);
   rec.replication_id = rep;
   rec.seed = seed;
   return rec;
}

/// Independent replications; aggregation is ordered by replication index, so
/// results do not depend on `jobs`.
inline Aggregate replicate(const Scenario& sc, std::size_t reps, std::uint64_t seed, std::size_t jobs = 0,
                           bool per_period = false)
{
   if (reps == 0) throw ParameterError("replicate requires at least one replication");
   std::vector<RegretRecord> records(reps);
   parallel_for(reps, jobs, [&](std::size_t i) { records[i] = run_replication(sc, seed, i, per_period); });
   return summarize(std::move(records));
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { offline_size, delta, sigma, horizon };

inline std::string_view to_string(SweepAxis a)
{
   switch (a) {
   case SweepAxis::offline_size: return "offline_size";
   case SweepAxis::delta: return "delta";
   case SweepAxis::sigma: return "sigma";
   case SweepAxis::horizon: return "horizon";
   }
   return "offline_size";
}

inline SweepAxis sweep_axis_from_string(std::string_view s)
{
   if (s == "offline_size" || s == "n") return SweepAxis::offline_size;
   if (s == "delta") return SweepAxis::delta;
   if (s == "sigma") return SweepAxis::sigma;
   if (s == "horizon" || s == "T") return SweepAxis::horizon;
   throw ParameterError("unknown sweep axis: " + std::string(s));
}

struct SweepPoint {
   double x = 0.0;
   double mean = 0.0;
   double std = 0.0;   // 0 when reps < 2
   double ci95 = 0.0;
   std::size_t reps = 0;
   double mean_relative = 0.0;
   // Realized scenario at this point.
   std::uint64_t T = 0;
   std::uint64_t n = 0;
   double sigma = 0.0;
   double delta = 0.0;
};

struct SweepResult {
   SweepAxis axis = SweepAxis::offline_size;
   std::vector<SweepPoint> points;
   std::string policy;
   std::string instance;
   std::uint64_t seed = 0;
};

/// Nominal (n, sigma, delta) of a scenario's offline recipe.
inline void describe_offline(const Scenario& sc, SweepPoint& pt)
{
   const double p_star = optimal_price(sc.instance.theta_star, sc.instance.prices);
   const OfflineSpec& o = sc.offline;
   pt.T = sc.T;
   switch (o.mode) {
   case OfflineMode::none: pt.n = 0; pt.sigma = 0.0; pt.delta = 0.0; break;
   case OfflineMode::fixed:
      if (o.prices.empty()) {
         pt.n = o.n;
         pt.sigma = 0.0;
         pt.delta = std::abs(o.price - p_star);
      } else {
         OfflineDataset d;
         for (double p : o.prices) d.add(p, 0.0);
         pt.n = d.size();
         pt.sigma = d.sigma();
         pt.delta = d.delta(sc.instance.theta_star).value_or(0.0);
      }
      break;
   case OfflineMode::split: {
      pt.n = o.n;
      const double lower = static_cast<double>(o.n / 2);
      const double nn = static_cast<double>(o.n);
      const double mean = nn > 0 ? o.center + o.sigma * (nn - 2.0 * lower) / nn : o.center;
      pt.sigma = nn > 0 ? std::sqrt(std::max(0.0, o.sigma * o.sigma - (mean - o.center) * (mean - o.center))) : 0.0;
      pt.delta = std::abs(mean - p_star);
      break;
   }
   case OfflineMode::adaptive: pt.n = o.n; pt.sigma = 0.0; pt.delta = 0.0; break;
   }
}

/// Scenario at one grid value of the axis.
inline Scenario sweep_scenario(SweepAxis axis, double x, const Scenario& base)
{
   Scenario sc = base;
   const double p_star = optimal_price(base.instance.theta_star, base.instance.prices);
   switch (axis) {
   case SweepAxis::offline_size:
      if (base.offline.mode != OfflineMode::fixed || !base.offline.prices.empty())
         throw ParameterError("offline_size axis requires a single-price fixed offline recipe");
      sc.offline.n = static_cast<std::uint64_t>(std::llround(x));
      break;
   case SweepAxis::delta:
      if (base.offline.mode != OfflineMode::fixed || !base.offline.prices.empty())
         throw ParameterError("delta axis requires a single-price fixed offline recipe");
      sc.offline.price = p_star + x;
      if (!base.instance.prices.contains(sc.offline.price))
         throw ParameterError("delta grid value places the offline price outside [l, u]");
      break;
   case SweepAxis::sigma:
      if (base.offline.mode != OfflineMode::split)
         throw ParameterError("sigma axis requires a split offline recipe");
      if (!accepts_multi_price(base.policy.kind))
         throw ParameterError("sigma axis requires a policy that accepts multi-price offline data");
      sc.offline.sigma = x;
      if (!base.instance.prices.contains(base.offline.center - x) ||
          !base.instance.prices.contains(base.offline.center + x))
         throw ParameterError("sigma grid value places offline prices outside [l, u]");
      break;
   case SweepAxis::horizon:
      if (x < 1.0) throw ParameterError("horizon grid values must be at least 1");
      sc.T = static_cast<std::uint64_t>(std::llround(x));
      break;
   }
   return sc;
}

/// Replicated regret across a grid of one axis. Every grid point reuses the
/// same replication streams. For anytime policies on the horizon axis, one run
/// at the largest horizon is read at each grid value (identical to separate
/// runs, since the prefix of an anytime trace does not depend on the horizon).
inline SweepResult sweep(SweepAxis axis, std::span<const double> grid, const Scenario& base, std::size_t reps,
                         std::uint64_t seed, std::size_t jobs = 0)
{
   if (grid.empty()) throw ParameterError("sweep grid is empty");
   if (!std::is_sorted(grid.begin(), grid.end())) throw ParameterError("sweep grid must be sorted");
   if (reps == 0) throw ParameterError("sweep requires at least one replication");

   SweepResult out;
   out.axis = axis;
   out.policy = policy_label(base.policy);
   out.instance = base.instance.name;
   out.seed = seed;

   std::vector<Scenario> scenarios;
   for (double x : grid) scenarios.push_back(sweep_scenario(axis, x, base));

   auto make_point = [&](std::size_t g, std::span<const double> abs_vals, std::span<const double> rel_vals) {
      SweepPoint pt;
      pt.x = grid[g];
      const Moments m = moments(abs_vals);
      pt.mean = m.mean;
      pt.std = m.std.value_or(0.0);
      pt.ci95 = m.ci95;
      pt.reps = abs_vals.size();
      pt.mean_relative = moments(rel_vals).mean;
      describe_offline(scenarios[g], pt);
      return pt;
   };

   if (axis == SweepAxis::horizon && is_anytime(base.policy.kind)) {
      const Scenario& longest = scenarios.back();
      const double r_star = optimal_revenue(base.instance.theta_star, base.instance.prices);
      std::vector<std::vector<double>> abs_vals(grid.size(), std::vector<double>(reps));
      std::vector<std::vector<double>> rel_vals(grid.size(), std::vector<double>(reps));
      parallel_for(reps, jobs, [&](std::size_t r) {
         const RegretRecord rec = run_replication(longest, seed, r, true);
         for (std::size_t g = 0; g < grid.size(); ++g) {
            const std::uint64_t T = scenarios[g].T;
            abs_vals[g][r] = rec.per_period[T - 1];
            rel_vals[g][r] = rec.per_period[T - 1] / (static_cast<double>(T) * r_star);
         }
      });
      for (std::size_t g = 0; g < grid.size(); ++g) out.points.push_back(make_point(g, abs_vals[g], rel_vals[g]));
      return out;
   }

   // Flatten (grid point, replication) pairs so parallelism spans the sweep.
   const std::size_t total = grid.size() * reps;
   std::vector<RegretRecord> records(total);
   parallel_for(total, jobs, [&](std::size_t k) {
      const std::size_t g = k / reps;
      records[k] = run_replication(scenarios[g], seed, k % reps);
   });
   for (std::size_t g = 0; g < grid.size(); ++g) {
      std::vector<double> abs_vals, rel_vals;
      for (std::size_t r = 0; r < reps; ++r) {
         abs_vals.push_back(records[g * reps + r].cumulative_regret);
         rel_vals.push_back(records[g * reps + r].relative_regret);
      }
      out.points.push_back(make_point(g, abs_vals, rel_vals));
   }
   return out;
}

/// Least-squares slope of log(mean) against log(x), for verifying power laws.
struct ScalingFit {
   double slope = 0.0;
   double intercept = 0.0;
   std::size_t used = 0;
   std::size_t dropped = 0;  // points with nonpositive mean or x
};

inline ScalingFit scaling_exponent(std::span<const double> xs, std::span<const double> ys)
{
   if (xs.size() != ys.size()) throw ParameterError("scaling_exponent: size mismatch");
   ScalingFit fit;
   std::vector<double> lx, ly;
   for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!(xs[i] > 0.0 && ys[i] > 0.0)) {
         ++fit.dropped;
         continue;
      }
      lx.push_back(std::log(xs[i]));
      ly.push_back(std::log(ys[i]));
   }
   fit.used = lx.size();
   if (fit.used < 2) throw ParameterError("scaling_exponent needs at least two positive points");
   const double k = static_cast<double>(fit.used);
   double mx = 0.0, my = 0.0;
   for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
   }
   mx /= k;
   my /= k;
   double sxy = 0.0, sxx = 0.0;
   for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
   }
   if (!(sxx > 0.0)) throw ParameterError("scaling_exponent needs distinct x values");
   fit.slope = sxy / sxx;
   fit.intercept = my - fit.slope * mx;
   return fit;
}

inline ScalingFit scaling_exponent(const SweepResult& sweep)
{
   if (sweep.points.size() < 4) throw ParameterError("scaling_exponent needs at least four sweep points");
   std::vector<double> xs, ys;
   for (const auto& p : sweep.points) {
      xs.push_back(p.x);
      ys.push_back(p.mean);
   }
   const ScalingFit fit = scaling_exponent(xs, ys);
   if (fit.dropped > 0)
      std::fprintf(stderr, "warning: scaling_exponent dropped %zu nonpositive point(s)\n", fit.dropped);
   return fit;
}

// ---------------------------------------------------------------------------
// Theoretical rates (unit hidden constants, log factors dropped)

enum class RateTag { sqrtT, T_over_n_delta2, logT_over_delta2, one_over_delta2, T_over_n_sigma2, T_delta2 };

inline std::string_view to_string(RateTag r)
{
   switch (r) {
   case RateTag::sqrtT: return "sqrtT";
   case RateTag::T_over_n_delta2: return "T_over_n_delta2";
   case RateTag::logT_over_delta2: return "logT_over_delta2";
   case RateTag::one_over_delta2: return "one_over_delta2";
   case RateTag::T_over_n_sigma2: return "T_over_n_sigma2";
   case RateTag::T_delta2: return "T_delta2";
   }
   return "sqrtT";
}

/// Table rows of the optimal-regret characterization.
enum class Regime {
   no_offline,
   single_far,          // sigma = 0, delta >= T^{-1/4}
   single_near,         // sigma = 0, delta < T^{-1/4}
   multi_far_sigma_le,  // sigma > 0, delta >= T^{-1/4}, sigma <= delta
   multi_far_sigma_gt,  // sigma > 0, delta >= T^{-1/4}, sigma > delta
   multi_near,          // sigma > 0, delta < T^{-1/4}
};

inline std::string_view to_string(Regime r)
{
   switch (r) {
   case Regime::no_offline: return "no_offline";
   case Regime::single_far: return "single_far";
   case Regime::single_near: return "single_near";
   case Regime::multi_far_sigma_le: return "multi_far_sigma_le";
   case Regime::multi_far_sigma_gt: return "multi_far_sigma_gt";
   case Regime::multi_near: return "multi_near";
   }
   return "no_offline";
}

struct PhaseLabel {
   Regime regime = Regime::no_offline;
   RateTag rate = RateTag::sqrtT;
};

/// The rate formula associated with a tag, with unit constants and without
/// log factors.
inline double rate_value(RateTag tag, double T, double n, double sigma, double delta)
{
   switch (tag) {
   case RateTag::sqrtT: return std::sqrt(T);
   case RateTag::T_over_n_delta2: return T / (n * delta * delta);
   case RateTag::logT_over_delta2:
   case RateTag::one_over_delta2: return 1.0 / (delta * delta);
   case RateTag::T_over_n_sigma2: return T / (n * sigma * sigma);
   case RateTag::T_delta2: return T * delta * delta;
   }
   return 0.0;
}

struct TheoreticalRate {
   PhaseLabel label;
   double value = 0.0;
};

/// Phase classification and rate value for (T, n, sigma, delta). Order
/// comparisons use unit constants, so labels are order-of-magnitude guidance.
inline TheoreticalRate theoretical_rate(double T, double n, double sigma, double delta)
{
   if (!(T >= 1.0)) throw ParameterError("theoretical_rate requires T >= 1");
   TheoreticalRate r;
   const double sqrtT = std::sqrt(T);
   const double d2 = delta * delta;
   const double s2 = sigma * sigma;
   const bool far = delta >= std::pow(T, -0.25);
   auto set = [&](Regime g, RateTag tag) {
      r.label = {g, tag};
      r.value = rate_value(tag, T, n, sigma, delta);
   };
   if (n <= 0.0) {
      set(Regime::no_offline, RateTag::sqrtT);
   } else if (sigma <= 0.0) {
      if (!far || n <= sqrtT / d2) set(far ? Regime::single_far : Regime::single_near, RateTag::sqrtT);
      else if (n <= T) set(Regime::single_far, RateTag::T_over_n_delta2);
      else set(Regime::single_far, RateTag::logT_over_delta2);
   } else if (far && sigma <= delta) {
      if (n <= sqrtT / d2) set(Regime::multi_far_sigma_le, RateTag::sqrtT);
      else if (n <= T) set(Regime::multi_far_sigma_le, RateTag::T_over_n_delta2);
      else if (n <= T * d2 / s2) set(Regime::multi_far_sigma_le, RateTag::one_over_delta2);
      else set(Regime::multi_far_sigma_le, RateTag::T_over_n_sigma2);
   } else if (far) {
      if (n <= sqrtT / s2) set(Regime::multi_far_sigma_gt, RateTag::sqrtT);
      else set(Regime::multi_far_sigma_gt, RateTag::T_over_n_sigma2);
   } else {
      if (n <= sqrtT / s2) set(Regime::multi_near, RateTag::sqrtT);
      else if (n <= 1.0 / (d2 * s2)) set(Regime::multi_near, RateTag::T_delta2);
      else set(Regime::multi_near, RateTag::T_over_n_sigma2);
   }
   return r;
}

/// Closed-form optimal-regret expression: Tdelta^2 in the corner case
/// (delta^2 <= 1/(n sigma^2) <= 1/sqrt(T)), else min(sqrtT, T/((n∧T)delta^2 + n sigma^2)).
inline double optimal_regret_formula(double T, double n, double sigma, double delta)
{
   const double spread = n * sigma * sigma;
   if (spread > 0.0 && spread >= std::sqrt(T) && delta * delta * spread <= 1.0) return T * delta * delta;
   const double denom = std::min(n, T) * delta * delta + spread;
   return denom > 0.0 ? std::min(std::sqrt(T), T / denom) : std::sqrt(T);
}

} // namespace opod
