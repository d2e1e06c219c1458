#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "opod/estimation.hpp"
#include "opod/model.hpp"
#include "opod/optimistic.hpp"

namespace opod {

enum TraceFlag : std::uint8_t {
   kFallbackUsed = 1u << 0,
   kRestart = 1u << 1,
   kCornerBranch = 1u << 2,
};

struct TracePeriod {
   std::uint64_t t = 0;
   double price = 0.0;
   double demand = 0.0;
   std::optional<DemandParams> theta_tilde;
   std::uint8_t flags = 0;
};

/// Realized prices and demands of one selling horizon.
struct Trace {
   std::vector<TracePeriod> periods;

   std::size_t size() const noexcept { return periods.size(); }
   bool empty() const noexcept { return periods.empty(); }

   void push(double price, double demand, std::optional<DemandParams> theta = std::nullopt, std::uint8_t flags = 0)
   {
      periods.push_back({periods.size() + 1, price, demand, theta, flags});
   }
};

/// Observation points inside a run; all optional.
struct RunHooks {
   /// Called after period t's update with the confidence set C_t.
   std::function<void(std::uint64_t t, const ConfidenceEllipsoid&)> on_confidence_set;
};

struct TMO3FUConfig {
   double K = 1.0;
   /// Confidence level of the offline-only set C_0; default min(1/2, 1/(n sigma^2)).
   std::optional<double> epsilon0;
};

struct SpeculatorConfig {
   double delta0 = 0.1;
   std::uint64_t T = 1;
};

struct CILSConfig {
   double kappa = 0.1;
   /// Numerical ridge of the least-squares fit; effectively unregularized.
   double ridge = 1e-6;
};

/// Opening price: the end of [l, u] farther from the anchor (u on ties or when
/// there is no anchor).
inline double first_price(std::optional<double> anchor, const PriceInterval& prices) noexcept
{
   if (!anchor) return prices.u;
   return *anchor > prices.midpoint() ? prices.l : prices.u;
}

/// Clamped peak price of the box projection of an estimate.
inline double myopic_price(const DemandParams& estimate, const ParamBox& box, const PriceInterval& prices) noexcept
{
   return optimal_price(box.project(estimate), prices);
}

/// Default confidence level for an offline-only confidence set.
inline double offline_epsilon(const OfflineDataset& offline) noexcept
{
   const double spread = offline.spread();
   return spread > 2.0 ? 1.0 / spread : 0.5;
}

namespace detail {

/// Confidence schedule eps_t = 1/t^2, optionally capped by 1/(n sigma^2).
struct EpsilonSchedule {
   double spread = 0.0;

   double operator()(std::uint64_t t) const noexcept
   {
      const double td = static_cast<double>(t);
      const double e = 1.0 / (td * td);
      return spread > 0.0 ? std::min(e, 1.0 / spread) : e;
   }
};

/// Shared optimistic loop of O3FU and M-O3FU. Appends `periods` entries to
/// `trace`, tagging the first appended period with `first_flags`.
inline void run_optimistic(const Instance& inst, const OfflineDataset& offline, std::uint64_t periods,
                           EpsilonSchedule eps, CounterRng& rng, Trace& trace, const RunHooks& hooks,
                           const LineSearchOptions& search, std::uint8_t first_flags = 0)
{
   const double lambda = inst.lambda();
   DesignState state = design_init(offline, lambda);
   const double p1 = first_price(offline.mean_price(), inst.prices);
   const std::uint64_t n = offline.size();
   for (std::uint64_t t = 1; t <= periods; ++t) {
      double price = p1;
      std::optional<DemandParams> theta;
      std::uint8_t flags = t == 1 ? first_flags : 0;
      if (t > 1) {
         const double w = radius_w(t - 1, n, eps(t - 1), lambda, inst.noise.scale, inst.prices.u, inst.box);
         if (auto sol = optimistic_pair(confidence_set(state, w), inst.box, inst.prices, search)) {
            price = sol->price;
            theta = sol->theta_tilde;
         } else {
            flags |= kFallbackUsed;
         }
      }
      const double demand = sample_demand(price, inst.theta_star, inst.noise, rng);
      state.add(price, demand);
      trace.push(price, demand, theta, flags);
      if (hooks.on_confidence_set) {
         const double w = radius_w(t, n, eps(t), lambda, inst.noise.scale, inst.prices.u, inst.box);
         hooks.on_confidence_set(t, confidence_set(state, w));
      }
   }
}

} // namespace detail

/// O3FU: optimistic pricing with single-price offline data.
inline Trace o3fu_run(const Instance& inst, const OfflineDataset& offline, std::uint64_t T, CounterRng& rng,
                      const RunHooks& hooks = {}, const LineSearchOptions& search = {})
{
   if (!offline.single_price()) throw ParameterError("O3FU requires single-price offline data");
   Trace trace;
   trace.periods.reserve(T);
   detail::run_optimistic(inst, offline, T, {}, rng, trace, hooks, search);
   return trace;
}

/// M-O3FU: O3FU over multi-price offline data with eps_t = min(1/t^2, 1/(n sigma^2)).
inline Trace m_o3fu_run(const Instance& inst, const OfflineDataset& offline, std::uint64_t T, CounterRng& rng,
                        const RunHooks& hooks = {}, const LineSearchOptions& search = {})
{
   Trace trace;
   trace.periods.reserve(T);
   detail::run_optimistic(inst, offline, T, {offline.spread()}, rng, trace, hooks, search);
   return trace;
}

/// Offline-only confidence set C_0 at level eps (t = 0).
inline ConfidenceEllipsoid offline_confidence_set(const Instance& inst, const OfflineDataset& offline,
                                                  double epsilon)
{
   const double lambda = inst.lambda();
   const DesignState s0 = design_init(offline, lambda);
   return confidence_set(
      s0, radius_w(0, offline.size(), epsilon, lambda, inst.noise.scale, inst.prices.u, inst.box));
}

/// Distance of p_bar to the interval, divided by the interval length; +inf for
/// a degenerate (point) interval.
inline double corner_ratio(const Interval& p0, double p_bar) noexcept
{
   const double len = p0.length();
   if (!(len > 0.0)) return std::numeric_limits<double>::infinity();
   double dist = 0.0;
   if (p_bar < p0.lo) dist = p0.lo - p_bar;
   else if (p_bar > p0.hi) dist = p_bar - p0.hi;
   return dist / len;
}

/// Number of periods TM-O3FU charges the mean historical price in its corner
/// branch: min(T, floor(n sigma^2)^2).
inline std::uint64_t corner_periods(double spread, std::uint64_t T) noexcept
{
   const double f = std::floor(spread);
   if (f * f >= static_cast<double>(T)) return T;
   return static_cast<std::uint64_t>(f * f);
}

/// TM-O3FU: tests whether the mean historical price sits close to the offline
/// confidence interval of the optimal price; if so, charges it for
/// min(T, floor(n sigma^2)^2) periods and restarts M-O3FU on the enlarged
/// dataset, otherwise runs M-O3FU directly.
inline Trace tm_o3fu_run(const Instance& inst, const OfflineDataset& offline, std::uint64_t T,
                         const TMO3FUConfig& cfg, CounterRng& rng, const RunHooks& hooks = {},
                         const LineSearchOptions& search = {})
{
   if (offline.empty()) throw ParameterError("TM-O3FU requires at least one offline sample");
   if (!(cfg.K > 0.0)) throw ParameterError("TM-O3FU tuning parameter K must be positive");
   const double eps0 = cfg.epsilon0.value_or(offline_epsilon(offline));
   const double p_bar = *offline.mean_price();
   const auto p0 = price_confidence_interval(offline_confidence_set(inst, offline, eps0), inst.box, inst.prices,
                                             search);
   const bool corner = p0 && corner_ratio(*p0, p_bar) <= cfg.K;
   if (!corner) return m_o3fu_run(inst, offline, T, rng, hooks, search);

   Trace trace;
   trace.periods.reserve(T);
   const std::uint64_t k = corner_periods(offline.spread(), T);
   std::vector<PricedSample> collected;
   collected.reserve(k);
   for (std::uint64_t t = 1; t <= k; ++t) {
      const double d = sample_demand(p_bar, inst.theta_star, inst.noise, rng);
      trace.push(p_bar, d, std::nullopt, kCornerBranch);
      collected.push_back({p_bar, d});
   }
   if (k < T) {
      const OfflineDataset enlarged = offline.extended(collected);
      detail::run_optimistic(inst, enlarged, T - k, {enlarged.spread()}, rng, trace, hooks, search, kRestart);
   }
   return trace;
}

/// Speculator(delta0): UCB1 between p_hat +/- delta0 for floor(sqrt(T)) periods,
/// then commits to an arm that lies inside the least-squares confidence interval
/// of the optimal price, or to the myopic price when neither does.
inline Trace speculator_run(const Instance& inst, const OfflineDataset& offline, const SpeculatorConfig& cfg,
                            CounterRng& rng, const LineSearchOptions& search = {})
{
   if (offline.empty() || !offline.single_price())
      throw ParameterError("Speculator requires nonempty single-price offline data");
   const double p_hat = *offline.mean_price();
   const double arms[2] = {p_hat + cfg.delta0, p_hat - cfg.delta0};
   if (!(cfg.delta0 > 0.0) || !inst.prices.contains(arms[0]) || !inst.prices.contains(arms[1]))
      throw ParameterError("Speculator arms p_hat +/- delta0 must lie in [l, u]");
   const std::uint64_t T = cfg.T;
   const auto m = std::min<std::uint64_t>(T, static_cast<std::uint64_t>(std::floor(std::sqrt(static_cast<double>(T)))));

   const double lambda = inst.lambda();
   DesignState state = design_init(offline, lambda);
   Trace trace;
   trace.periods.reserve(T);
   double reward_sum[2] = {0.0, 0.0};
   std::uint64_t pulls[2] = {0, 0};
   for (std::uint64_t t = 1; t <= m; ++t) {
      std::size_t arm = 0;
      if (pulls[0] == 0) arm = 0;
      else if (pulls[1] == 0) arm = 1;
      else {
         double index[2];
         for (std::size_t a = 0; a < 2; ++a) {
            index[a] = reward_sum[a] / static_cast<double>(pulls[a]) +
                       std::sqrt(2.0 * std::log(static_cast<double>(t)) / static_cast<double>(pulls[a]));
         }
         arm = index[1] > index[0] ? 1 : 0;
      }
      const double p = arms[arm];
      const double d = sample_demand(p, inst.theta_star, inst.noise, rng);
      reward_sum[arm] += p * d;
      ++pulls[arm];
      state.add(p, d);
      trace.push(p, d);
   }
   if (m == T) return trace;

   const double w = radius_w(m, offline.size(), 1.0 / static_cast<double>(T), lambda, inst.noise.scale,
                             inst.prices.u, inst.box);
   const auto ell = confidence_set(state, w);
   const auto ci = price_confidence_interval(ell, inst.box, inst.prices, search);
   const bool in_hi = ci && ci->contains(arms[0]);
   const bool in_lo = ci && ci->contains(arms[1]);
   double commit = myopic_price(ell.center, inst.box, inst.prices);
   if (in_hi && in_lo) {
      auto mean = [&](std::size_t a) {
         return pulls[a] ? reward_sum[a] / static_cast<double>(pulls[a]) : -std::numeric_limits<double>::infinity();
      };
      commit = mean(1) > mean(0) ? arms[1] : arms[0];
   } else if (in_hi) {
      commit = arms[0];
   } else if (in_lo) {
      commit = arms[1];
   }
   for (std::uint64_t t = m + 1; t <= T; ++t) trace.push(commit, sample_demand(commit, inst.theta_star, inst.noise, rng));
   return trace;
}

/// Constrained iterated least squares with offline data in the regression.
/// Opens with the two distinct prices l and u, then charges the myopic price
/// unless it is within kappa t^{-1/4} of the running average online price, in
/// which case it is pushed to exactly that distance.
inline Trace cils_run(const Instance& inst, const OfflineDataset& offline, std::uint64_t T, const CILSConfig& cfg,
                      CounterRng& rng)
{
   if (!(cfg.kappa > 0.0)) throw ParameterError("CILS kappa must be positive");
   DesignState state = design_init(offline, cfg.ridge);
   Trace trace;
   trace.periods.reserve(T);
   double price_sum = 0.0;
   for (std::uint64_t t = 1; t <= T; ++t) {
      double price = t == 1 ? inst.prices.l : inst.prices.u;
      if (t > 2) {
         const double target = myopic_price(ridge_estimate(state), inst.box, inst.prices);
         price = target;
         const double avg = price_sum / static_cast<double>(t - 1);
         const double dev = target - avg;
         const double floor_dev = cfg.kappa * std::pow(static_cast<double>(t), -0.25);
         if (std::abs(dev) < floor_dev) price = inst.prices.clamp(avg + (dev < 0.0 ? -floor_dev : floor_dev));
      }
      const double d = sample_demand(price, inst.theta_star, inst.noise, rng);
      state.add(price, d);
      price_sum += price;
      trace.push(price, d);
   }
   return trace;
}

/// Largest step s in [0, 1] keeping anchor + s (target - anchor) inside
/// (ellipsoid ∩ box); the anchor must be feasible.
inline DemandParams pull_toward(const ConfidenceEllipsoid& ell, const ParamBox& box, const DemandParams& anchor,
                                const DemandParams& target) noexcept
{
   const DemandParams d{target.alpha - anchor.alpha, target.beta - anchor.beta};
   double s = 1.0;
   const double A = ell.shape.quad(d);
   if (A > 0.0) {
      const DemandParams off{anchor.alpha - ell.center.alpha, anchor.beta - ell.center.beta};
      const double B = ell.shape.xx * d.alpha * off.alpha + ell.shape.xy * (d.alpha * off.beta + d.beta * off.alpha) +
                       ell.shape.yy * d.beta * off.beta;
      const double C = ell.shape.quad(off) - ell.radius * ell.radius;
      const double root = (-B + std::sqrt(std::max(0.0, B * B - A * C))) / A;
      s = std::min(s, std::max(0.0, root));
   }
   auto limit = [&s](double x, double dx, double lo, double hi) {
      if (dx > 0.0) s = std::min(s, std::max(0.0, (hi - x) / dx));
      else if (dx < 0.0) s = std::min(s, std::max(0.0, (lo - x) / dx));
   };
   limit(anchor.alpha, d.alpha, box.alpha_min, box.alpha_max);
   limit(anchor.beta, d.beta, box.beta_min, box.beta_max);
   return {anchor.alpha + s * d.alpha, anchor.beta + s * d.beta};
}

/// A point of (ellipsoid ∩ box): the center when it is in the box, otherwise
/// the slice midpoint closest to the center in the ellipsoid norm.
inline std::optional<DemandParams> feasible_anchor(const ConfidenceEllipsoid& ell, const ParamBox& box,
                                                   std::size_t samples = 2048)
{
   if (box.contains(ell.center)) return ell.center;
   const auto range = feasible_beta_range(ell, box);
   if (!range) return std::nullopt;
   std::optional<DemandParams> best;
   double best_d = std::numeric_limits<double>::infinity();
   for (std::size_t i = 0; i < samples; ++i) {
      const double beta = range->lo + range->length() * static_cast<double>(i) / static_cast<double>(samples - 1);
      if (auto s = alpha_interval_at_beta(ell, box, beta)) {
         const DemandParams p{0.5 * (s->lo + s->hi), beta};
         const double dist = ell.distance_sq(p);
         if (dist < best_d) {
            best_d = dist;
            best = p;
         }
      }
   }
   return best;
}

/// Iterated least squares restricted to the offline confidence set C_0 (sized
/// for `horizon_bound` periods): every period charges the peak price of the
/// restricted estimate.
inline Trace myopic_run(const Instance& inst, const OfflineDataset& offline, std::uint64_t T,
                        std::uint64_t horizon_bound, CounterRng& rng)
{
   if (offline.size() < 2 || offline.single_price())
      throw ParameterError("myopic policy requires offline data with at least two distinct prices");
   const std::uint64_t bound = std::max<std::uint64_t>(horizon_bound, 2);
   const auto c0 = offline_confidence_set(inst, offline, 1.0 / static_cast<double>(bound));
   const auto anchor = feasible_anchor(c0, inst.box);
   // Plain least squares; the tiny ridge only keeps V invertible.
   DesignState state = design_init(offline, CILSConfig{}.ridge);
   Trace trace;
   trace.periods.reserve(T);
   for (std::uint64_t t = 1; t <= T; ++t) {
      DemandParams est = ridge_estimate(state);
      if (!(inst.box.contains(est) && c0.contains(est))) est = anchor ? pull_toward(c0, inst.box, *anchor, est)
                                                                        : inst.box.project(est);
      const double price = myopic_price(est, inst.box, inst.prices);
      const double d = sample_demand(price, inst.theta_star, inst.noise, rng);
      state.add(price, d);
      trace.push(price, d);
   }
   return trace;
}

inline bool self_exploration_test(const Interval& p0, double p_bar, double K) noexcept
{
   double dist = 0.0;
   if (p_bar < p0.lo) dist = p0.lo - p_bar;
   else if (p_bar > p0.hi) dist = p_bar - p0.hi;
   return dist > K * p0.length();
}

/// True when the mean historical price is farther from the offline price
/// confidence interval than K times its length (myopic pricing self-explores).
inline bool self_exploration_test(const ConfidenceEllipsoid& ell0, const ParamBox& box, const PriceInterval& prices,
                                  double p_bar, double K, const LineSearchOptions& search = {})
{
   const auto p0 = price_confidence_interval(ell0, box, prices, search);
   if (!p0) return false;
   return self_exploration_test(*p0, p_bar, K);
}

inline Trace fixed_price_run(double price, const Instance& inst, std::uint64_t T, CounterRng& rng)
{
   if (!inst.prices.contains(price)) throw ParameterError("fixed price outside [l, u]");
   Trace trace;
   trace.periods.reserve(T);
   for (std::uint64_t t = 1; t <= T; ++t) trace.push(price, sample_demand(price, inst.theta_star, inst.noise, rng));
   return trace;
}

} // namespace opod
