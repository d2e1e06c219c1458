#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "opod/estimation.hpp"

namespace opod {

/// Jointly optimistic price and parameter.
struct OptimisticSolution {
   double price = 0.0;
   DemandParams theta_tilde;
   double value = 0.0;
};

namespace detail {

/// Best revenue achievable with parameter (alpha, beta) on [l, u].
inline double clamped_peak_revenue(double alpha, double beta, const PriceInterval& prices, double* price_out)
{
   const double p = prices.clamp(alpha / (-2.0 * beta));
   if (price_out) *price_out = p;
   return p * (alpha + beta * p);
}

} // namespace detail

/// Solves max over p in [l, u] and theta' in (ellipsoid ∩ box) of p (alpha' + beta' p).
///
/// The optimistic revenue is increasing in alpha', so for each beta' only the top
/// of the alpha'-slice matters; the remaining one-dimensional problem in beta' is
/// not necessarily unimodal and is solved by dense sampling plus golden-section
/// refinement. Returns nullopt when the intersection is empty.
inline std::optional<OptimisticSolution> optimistic_pair(const ConfidenceEllipsoid& ell, const ParamBox& box,
                                                         const PriceInterval& prices,
                                                         const LineSearchOptions& opt = {})
{
   const auto range = feasible_beta_range(ell, box);
   if (!range) return std::nullopt;
   const detail::EllipsoidSlicer slicer(ell);
   auto top = [&](double beta) -> std::optional<double> {
      auto s = slicer.at(beta);
      if (!s) return std::nullopt;
      const double hi = std::min(s->hi, box.alpha_max);
      if (std::max(s->lo, box.alpha_min) > hi) return std::nullopt;
      return hi;
   };
   auto objective = [&](double beta) -> std::optional<double> {
      auto a = top(beta);
      if (!a) return std::nullopt;
      return detail::clamped_peak_revenue(*a, beta, prices, nullptr);
   };
   const auto beta = detail::line_search_max(objective, range->lo, range->hi, opt);
   if (!beta) return std::nullopt;
   OptimisticSolution sol;
   sol.theta_tilde = {*top(*beta), *beta};
   sol.value = detail::clamped_peak_revenue(sol.theta_tilde.alpha, sol.theta_tilde.beta, prices, &sol.price);
   return sol;
}

/// Exhaustive lattice search over the bounding box of (ellipsoid ∩ box), used as
/// an independent check of optimistic_pair: only membership tests, no slice
/// algebra. A grid x grid scan is followed by grid x grid rescans of a small
/// window around each of the best `zoom_candidates` coarse points, which brings
/// the resolution down to about (width / grid^2) without a finer full lattice.
inline std::optional<OptimisticSolution> brute_force_optimistic(const ConfidenceEllipsoid& ell,
                                                                const ParamBox& box,
                                                                const PriceInterval& prices,
                                                                std::size_t grid,
                                                                std::size_t zoom_candidates = 8)
{
   if (grid < 100) throw ParameterError("brute-force grid must have at least 100 points per axis");
   const double ha = ell.alpha_half_width();
   const double hb = ell.beta_half_width();
   const double a_lo = std::max(box.alpha_min, ell.center.alpha - ha);
   const double a_hi = std::min(box.alpha_max, ell.center.alpha + ha);
   const double b_lo = std::max(box.beta_min, ell.center.beta - hb);
   const double b_hi = std::min(box.beta_max, ell.center.beta + hb);
   if (!(a_lo <= a_hi && b_lo <= b_hi)) return std::nullopt;

   const double w2 = ell.radius * ell.radius;
   const double g = static_cast<double>(grid - 1);
   std::vector<OptimisticSolution> top;  // best coarse points, descending by value

   auto scan = [&](double alo, double ahi, double blo, double bhi, auto&& visit) {
      for (std::size_t j = 0; j < grid; ++j) {
         const double beta = blo + (bhi - blo) * static_cast<double>(j) / g;
         for (std::size_t i = 0; i < grid; ++i) {
            const double alpha = alo + (ahi - alo) * static_cast<double>(i) / g;
            if (ell.distance_sq({alpha, beta}) > w2) continue;
            double p = 0.0;
            const double v = detail::clamped_peak_revenue(alpha, beta, prices, &p);
            visit(OptimisticSolution{p, {alpha, beta}, v});
         }
      }
   };

   scan(a_lo, a_hi, b_lo, b_hi, [&](const OptimisticSolution& s) {
      if (top.size() == zoom_candidates && s.value <= top.back().value) return;
      auto it = std::find_if(top.begin(), top.end(), [&](const auto& o) { return s.value > o.value; });
      top.insert(it, s);
      if (top.size() > zoom_candidates) top.pop_back();
   });
   if (top.empty()) return std::nullopt;

   OptimisticSolution best = top.front();
   const double da = 2.0 * (a_hi - a_lo) / g;
   const double db = 2.0 * (b_hi - b_lo) / g;
   for (const auto& c : std::vector<OptimisticSolution>(top)) {
      scan(std::max(a_lo, c.theta_tilde.alpha - da), std::min(a_hi, c.theta_tilde.alpha + da),
           std::max(b_lo, c.theta_tilde.beta - db), std::min(b_hi, c.theta_tilde.beta + db),
           [&](const OptimisticSolution& s) {
              if (s.value > best.value) best = s;
           });
   }
   return best;
}

} // namespace opod
