#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "opod/policies.hpp"

namespace opod {

enum class OfflineMode { none, fixed, split, adaptive };

enum class AdaptiveOfflinePolicy { constant, alternating, myopic };

/// Recipe for generating the offline dataset of a replication.
struct OfflineSpec {
   OfflineMode mode = OfflineMode::none;
   /// fixed: explicit price list; when empty, `n` copies of `price`.
   std::vector<double> prices;
   double price = 0.0;
   std::uint64_t n = 0;
   /// split: floor(n/2) samples at center - sigma, the rest at center + sigma.
   double center = 0.0;
   double sigma = 0.0;
   /// adaptive: built-in history-dependent offline policy.
   AdaptiveOfflinePolicy adaptive = AdaptiveOfflinePolicy::alternating;
   /// fixed single price: keep only the sufficient statistic of the n draws.
   bool pooled = false;
};

enum class PolicyKind { o3fu, m_o3fu, tm_o3fu, speculator, cils, myopic, fixed_price };

inline std::string_view to_string(PolicyKind k)
{
   switch (k) {
   case PolicyKind::o3fu: return "o3fu";
   case PolicyKind::m_o3fu: return "m_o3fu";
   case PolicyKind::tm_o3fu: return "tm_o3fu";
   case PolicyKind::speculator: return "speculator";
   case PolicyKind::cils: return "cils";
   case PolicyKind::myopic: return "myopic";
   case PolicyKind::fixed_price: return "fixed";
   }
   return "o3fu";
}

inline PolicyKind policy_from_string(std::string_view s)
{
   if (s == "o3fu") return PolicyKind::o3fu;
   if (s == "m_o3fu" || s == "m-o3fu") return PolicyKind::m_o3fu;
   if (s == "tm_o3fu" || s == "tm-o3fu") return PolicyKind::tm_o3fu;
   if (s == "speculator") return PolicyKind::speculator;
   if (s == "cils") return PolicyKind::cils;
   if (s == "myopic") return PolicyKind::myopic;
   if (s == "fixed" || s == "fixed_price") return PolicyKind::fixed_price;
   throw ParameterError("unknown policy: " + std::string(s));
}

/// Policies whose first T periods do not depend on the horizon they were run for.
inline bool is_anytime(PolicyKind k)
{
   return k == PolicyKind::o3fu || k == PolicyKind::m_o3fu || k == PolicyKind::tm_o3fu || k == PolicyKind::cils ||
          k == PolicyKind::fixed_price;
}

/// Whether the policy accepts offline data with several distinct prices.
inline bool accepts_multi_price(PolicyKind k)
{
   return !(k == PolicyKind::o3fu || k == PolicyKind::speculator);
}

struct PolicySpec {
   PolicyKind kind = PolicyKind::o3fu;
   double kappa = 0.1;                 // cils
   double K = 1.0;                     // tm_o3fu
   std::optional<double> epsilon0;     // tm_o3fu
   double delta0 = 0.1;                // speculator
   std::uint64_t horizon_bound = 0;    // myopic; 0 means T
   std::optional<double> fixed_price;  // fixed; absent means p*
   LineSearchOptions search;
};

/// Everything one replication needs.
struct Scenario {
   Instance instance;
   OfflineSpec offline;
   PolicySpec policy;
   std::uint64_t T = 1000;
};

/// Short identifier used in result files; CILS carries its kappa.
inline std::string policy_label(const PolicySpec& p)
{
   if (p.kind != PolicyKind::cils) return std::string(to_string(p.kind));
   char buf[48];
   std::snprintf(buf, sizeof buf, "cils_kappa%g", p.kappa);
   return buf;
}

inline std::string_view to_string(AdaptiveOfflinePolicy a)
{
   switch (a) {
   case AdaptiveOfflinePolicy::constant: return "constant";
   case AdaptiveOfflinePolicy::alternating: return "alternating";
   case AdaptiveOfflinePolicy::myopic: return "myopic";
   }
   return "alternating";
}

inline AdaptiveOfflinePolicy adaptive_policy_from_string(std::string_view s)
{
   if (s == "constant") return AdaptiveOfflinePolicy::constant;
   if (s == "alternating") return AdaptiveOfflinePolicy::alternating;
   if (s == "myopic") return AdaptiveOfflinePolicy::myopic;
   throw ParameterError("unknown adaptive offline policy: " + std::string(s));
}

inline OfflinePolicy make_adaptive_policy(AdaptiveOfflinePolicy kind, const Instance& inst, double price)
{
   const PriceInterval prices = inst.prices;
   switch (kind) {
   case AdaptiveOfflinePolicy::constant:
      return [price](std::span<const PricedSample>) { return price; };
   case AdaptiveOfflinePolicy::alternating:
      // 1-based: odd samples at l, even at u.
      return [prices](std::span<const PricedSample> h) { return h.size() % 2 == 0 ? prices.l : prices.u; };
   case AdaptiveOfflinePolicy::myopic: {
      const double lambda = inst.lambda();
      const ParamBox box = inst.box;
      return [prices, lambda, box, price](std::span<const PricedSample> h) {
         if (h.empty()) return price;
         if (h.size() == 1) return first_price(h[0].price, prices);
         OfflineDataset data;
         for (const auto& s : h) data.add(s);
         return myopic_price(ridge_estimate(design_init(data, lambda)), box, prices);
      };
   }
   }
   return [price](std::span<const PricedSample>) { return price; };
}

inline OfflineDataset make_offline(const OfflineSpec& spec, const Instance& inst, CounterRng& rng)
{
   switch (spec.mode) {
   case OfflineMode::none: return {};
   case OfflineMode::fixed: {
      if (!spec.prices.empty()) return generate_offline_fixed(spec.prices, inst, rng);
      if (spec.pooled) return generate_offline_pooled(spec.price, spec.n, inst, rng);
      const std::vector<double> prices(spec.n, spec.price);
      return generate_offline_fixed(prices, inst, rng);
   }
   case OfflineMode::split: {
      std::vector<double> prices;
      prices.reserve(spec.n);
      const std::uint64_t lower = spec.n / 2;
      for (std::uint64_t i = 0; i < spec.n; ++i)
         prices.push_back(i < lower ? spec.center - spec.sigma : spec.center + spec.sigma);
      return generate_offline_fixed(prices, inst, rng);
   }
   case OfflineMode::adaptive:
      return generate_offline_adaptive(make_adaptive_policy(spec.adaptive, inst, spec.price), spec.n, inst, rng);
   }
   return {};
}

/// Runs the scenario's policy on pre-generated offline data.
inline Trace run_policy(const Scenario& sc, const OfflineDataset& offline, CounterRng& rng, const RunHooks& hooks = {})
{
   const Instance& inst = sc.instance;
   const PolicySpec& p = sc.policy;
   switch (p.kind) {
   case PolicyKind::o3fu: return o3fu_run(inst, offline, sc.T, rng, hooks, p.search);
   case PolicyKind::m_o3fu: return m_o3fu_run(inst, offline, sc.T, rng, hooks, p.search);
   case PolicyKind::tm_o3fu: return tm_o3fu_run(inst, offline, sc.T, {p.K, p.epsilon0}, rng, hooks, p.search);
   case PolicyKind::speculator: return speculator_run(inst, offline, {p.delta0, sc.T}, rng, p.search);
   case PolicyKind::cils: return cils_run(inst, offline, sc.T, {p.kappa}, rng);
   case PolicyKind::myopic:
      return myopic_run(inst, offline, sc.T, p.horizon_bound ? p.horizon_bound : sc.T, rng);
   case PolicyKind::fixed_price:
      return fixed_price_run(p.fixed_price.value_or(optimal_price(inst.theta_star, inst.prices)), inst, sc.T, rng);
   }
   return {};
}

/// Offline generation followed by the policy, both on one stream.
inline Trace run_scenario(const Scenario& sc, CounterRng& rng, const RunHooks& hooks = {})
{
   const OfflineDataset offline = make_offline(sc.offline, sc.instance, rng);
   return run_policy(sc, offline, rng, hooks);
}

} // namespace opod
