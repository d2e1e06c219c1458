#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "opod/harness.hpp"

namespace opod {

/// A random (ellipsoid, box, prices) configuration with a known member.
struct OracleCase {
   ConfidenceEllipsoid ell;
   ParamBox box;
   PriceInterval prices;
   DemandParams member;  // a point of ellipsoid ∩ box
};

/// Draws a configuration shaped like the sets the policies produce: the box and
/// price range come from one of the bundled instances, V is a ridge Gram
/// matrix over a few random prices, and the radius is chosen so that a random
/// box point lies inside.
inline OracleCase random_oracle_case(CounterRng& rng)
{
   static const ParamBox boxes[] = {{2.5, 3.5, -2.0, -1.3}, {3.5, 5.0, -3.2, -2.5}, {2.8, 3.5, -2.8, -1.0}};
   static const PriceInterval ranges[] = {{0.1, 2.0}, {0.5, 1.3}, {0.2, 2.0}};
   std::uniform_int_distribution<int> pick(0, 2);
   std::uniform_real_distribution<double> unit(0.0, 1.0);
   const int k = pick(rng);
   OracleCase c;
   c.box = boxes[k];
   c.prices = ranges[k];
   c.member = {c.box.alpha_min + unit(rng) * (c.box.alpha_max - c.box.alpha_min),
               c.box.beta_min + unit(rng) * (c.box.beta_max - c.box.beta_min)};

   const double lambda = 1.0 + c.prices.u * c.prices.u;
   Sym2 V = Sym2::scaled_identity(lambda);
   const int samples = 2 + static_cast<int>(unit(rng) * 60.0);
   for (int i = 0; i < samples; ++i) V.add_outer(c.prices.l + unit(rng) * (c.prices.u - c.prices.l));
   std::normal_distribution<double> gauss(0.0, 1.0);
   const double spread = 0.05 + 0.5 * unit(rng);
   c.ell.center = {c.member.alpha + spread * gauss(rng), c.member.beta + spread * gauss(rng)};
   c.ell.shape = V;
   const double d2 = V.quad({c.member.alpha - c.ell.center.alpha, c.member.beta - c.ell.center.beta});
   c.ell.radius = std::sqrt(d2) * (1.0 + 2.0 * unit(rng)) + 1e-3;
   return c;
}

struct OracleReport {
   std::size_t cases = 0;
   double max_value_gap = 0.0;
   double max_price_gap = 0.0;
   std::size_t missing = 0;  // cases where one solver returned nothing
};

inline OracleReport oracle_equivalence(std::size_t cases, std::uint64_t seed, std::size_t grid = 1600)
{
   OracleReport rep;
   rep.cases = cases;
   CounterRng rng(seed, 0);
   for (std::size_t i = 0; i < cases; ++i) {
      const OracleCase c = random_oracle_case(rng);
      const auto fast = optimistic_pair(c.ell, c.box, c.prices);
      const auto slow = brute_force_optimistic(c.ell, c.box, c.prices, grid);
      if (!fast || !slow) {
         ++rep.missing;
         continue;
      }
      rep.max_value_gap = std::max(rep.max_value_gap, std::abs(fast->value - slow->value));
      rep.max_price_gap = std::max(rep.max_price_gap, std::abs(fast->price - slow->price));
   }
   return rep;
}

/// Fraction of O3FU replications (no offline data) whose confidence sets
/// C_1..C_T all contain theta*.
inline double coverage_fraction(const Instance& inst, std::uint64_t T, std::size_t reps, std::uint64_t seed,
                                std::size_t jobs = 0)
{
   std::vector<char> covered(reps, 1);
   parallel_for(reps, jobs, [&](std::size_t r) {
      CounterRng rng = replication_stream(seed, r);
      RunHooks hooks;
      hooks.on_confidence_set = [&](std::uint64_t, const ConfidenceEllipsoid& ell) {
         if (!ell.contains(inst.theta_star)) covered[r] = 0;
      };
      (void)o3fu_run(inst, OfflineDataset{}, T, rng, hooks);
   });
   std::size_t hits = 0;
   for (char c : covered) hits += c ? 1 : 0;
   return static_cast<double>(hits) / static_cast<double>(reps);
}

} // namespace opod
