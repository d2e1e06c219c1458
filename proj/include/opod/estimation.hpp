#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "opod/model.hpp"

namespace opod {

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
   double xx = 0.0;
   double xy = 0.0;
   double yy = 0.0;

   static Sym2 scaled_identity(double s) noexcept { return {s, 0.0, s}; }

   double det() const noexcept { return xx * yy - xy * xy; }

   /// v^T M v.
   double quad(const DemandParams& v) const noexcept
   {
      return xx * v.alpha * v.alpha + 2.0 * xy * v.alpha * v.beta + yy * v.beta * v.beta;
   }

   /// M^{-1} y through the adjugate.
   DemandParams solve(const DemandParams& y) const noexcept
   {
      const double d = det();
      assert(d > 0.0);
      return {(yy * y.alpha - xy * y.beta) / d, (xx * y.beta - xy * y.alpha) / d};
   }

   /// Adds weight * [1 p]^T [1 p].
   void add_outer(double p, double weight = 1.0) noexcept
   {
      xx += weight;
      xy += weight * p;
      yy += weight * p * p;
   }

   friend bool operator==(const Sym2&, const Sym2&) = default;
};

/// Regularized least-squares sufficient statistics over offline + online data.
///
/// V = lambda I + sum [1 p]^T [1 p],  Y = sum D [1 p]^T.
struct DesignState {
   Sym2 V;
   DemandParams Y;        // (sum D, sum D p)
   std::uint64_t t = 0;   // online periods absorbed
   std::uint64_t n = 0;   // offline samples absorbed
   double lambda = 1.0;

   void add(double p, double demand) noexcept
   {
      V.add_outer(p);
      Y.alpha += demand;
      Y.beta += demand * p;
      ++t;
   }
};

inline DesignState design_init(const OfflineDataset& offline, double lambda)
{
   if (!(lambda > 0.0)) throw ParameterError("regularization lambda must be positive");
   DesignState s;
   s.lambda = lambda;
   s.V = Sym2::scaled_identity(lambda);
   for (const auto& x : offline.samples()) {
      s.V.add_outer(x.price);
      s.Y.alpha += x.demand;
      s.Y.beta += x.demand * x.price;
   }
   for (const auto& b : offline.pooled()) {
      s.V.add_outer(b.price, static_cast<double>(b.count));
      s.Y.alpha += b.demand_sum;
      s.Y.beta += b.demand_sum * b.price;
   }
   s.n = offline.size();
   return s;
}

inline DesignState design_update(DesignState state, double p, double demand) noexcept
{
   state.add(p, demand);
   return state;
}

inline DemandParams ridge_estimate(const DesignState& state) noexcept { return state.V.solve(state.Y); }

/// Confidence radius
///   w = R sqrt(2 log((1/eps) (1 + (1+u^2)(t+n)/lambda))) + sqrt(lambda (alpha_max^2 + beta_min^2)).
/// eps must lie in (0, 1]; eps = 1 is reached by the 1/t^2 schedule at t = 1.
inline double radius_w(std::uint64_t t, std::uint64_t n, double epsilon, double lambda, double noise_scale,
                       double u, const ParamBox& box)
{
   if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterError("confidence level epsilon must lie in (0, 1]");
   if (!(lambda > 0.0)) throw ParameterError("regularization lambda must be positive");
   const double samples = static_cast<double>(t) + static_cast<double>(n);
   const double log_arg = (1.0 + (1.0 + u * u) * samples / lambda) / epsilon;
   return noise_scale * std::sqrt(2.0 * std::log(log_arg)) +
          std::sqrt(lambda * (box.alpha_max * box.alpha_max + box.beta_min * box.beta_min));
}

/// The set { theta' : (theta' - center)^T shape (theta' - center) <= radius^2 }.
struct ConfidenceEllipsoid {
   DemandParams center;
   Sym2 shape;
   double radius = 0.0;

   double distance_sq(const DemandParams& theta) const noexcept
   {
      return shape.quad({theta.alpha - center.alpha, theta.beta - center.beta});
   }

   bool contains(const DemandParams& theta, double tolerance = 0.0) const noexcept
   {
      return distance_sq(theta) <= radius * radius + tolerance;
   }

   /// Half-widths of the axis-aligned bounding box: w sqrt((V^{-1})_{ii}).
   double alpha_half_width() const noexcept { return radius * std::sqrt(shape.yy / shape.det()); }
   double beta_half_width() const noexcept { return radius * std::sqrt(shape.xx / shape.det()); }
};

inline bool contains(const ConfidenceEllipsoid& ell, const DemandParams& theta) { return ell.contains(theta); }

struct Interval {
   double lo = 0.0;
   double hi = 0.0;

   double length() const noexcept { return hi - lo; }
   bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

/// Ellipsoid built from the current design state.
inline ConfidenceEllipsoid confidence_set(const DesignState& state, double radius)
{
   return {ridge_estimate(state), state.V, radius};
}

namespace detail {

/// Slice of the ellipsoid at fixed beta (no box), with precomputed invariants so
/// line searches stay cheap.
class EllipsoidSlicer {
public:
   explicit EllipsoidSlicer(const ConfidenceEllipsoid& ell) noexcept
      : c_(ell.center), v11_(ell.shape.xx), v12_(ell.shape.xy), det_(ell.shape.det()),
        w2v11_(ell.radius * ell.radius * ell.shape.xx)
   {
   }

   std::optional<Interval> at(double beta) const noexcept
   {
      const double d = beta - c_.beta;
      double disc = w2v11_ - det_ * d * d;
      if (disc < 0.0) {
         if (disc < -1e-12 * w2v11_) return std::nullopt;
         disc = 0.0;
      }
      const double s = std::sqrt(disc);
      const double mid = c_.alpha - v12_ * d / v11_;
      return Interval{mid - s / v11_, mid + s / v11_};
   }

private:
   DemandParams c_;
   double v11_, v12_, det_, w2v11_;
};

} // namespace detail

/// Alpha range of the slice of (ellipsoid ∩ box) at beta = beta_prime, or
/// absent when the slice is empty.
inline std::optional<Interval> alpha_interval_at_beta(const ConfidenceEllipsoid& ell, const ParamBox& box,
                                                      double beta_prime)
{
   if (beta_prime < box.beta_min || beta_prime > box.beta_max) return std::nullopt;
   auto slice = detail::EllipsoidSlicer(ell).at(beta_prime);
   if (!slice) return std::nullopt;
   const double lo = std::max(slice->lo, box.alpha_min);
   const double hi = std::min(slice->hi, box.alpha_max);
   if (lo > hi) return std::nullopt;
   return Interval{lo, hi};
}

/// Beta range over which (ellipsoid ∩ box) slices can be nonempty.
inline std::optional<Interval> feasible_beta_range(const ConfidenceEllipsoid& ell, const ParamBox& box)
{
   const double h = ell.beta_half_width();
   const double lo = std::max(box.beta_min, ell.center.beta - h);
   const double hi = std::min(box.beta_max, ell.center.beta + h);
   if (!(lo <= hi)) return std::nullopt;
   return Interval{lo, hi};
}

struct LineSearchOptions {
   std::size_t samples = 2048;
   int golden_iterations = 48;
};

namespace detail {

/// Maximizes f over [lo, hi] (f returns nullopt where infeasible) by uniform
/// sampling then golden-section refinement inside the best bracket. Ties keep
/// the smallest sample index. Returns the argmax, or nullopt if no sample is
/// feasible.
template <class F>
std::optional<double> line_search_max(F&& f, double lo, double hi, const LineSearchOptions& opt)
{
   const std::size_t m = std::max<std::size_t>(opt.samples, 2);
   const double step = (hi - lo) / static_cast<double>(m - 1);
   std::optional<double> best_x;
   double best_v = -std::numeric_limits<double>::infinity();
   std::size_t best_i = 0;
   for (std::size_t i = 0; i < m; ++i) {
      const double x = (i + 1 == m) ? hi : lo + step * static_cast<double>(i);
      if (auto v = f(x); v && *v > best_v) {
         best_v = *v;
         best_x = x;
         best_i = i;
      }
   }
   if (!best_x || hi <= lo) return best_x;

   auto value = [&](double x) {
      auto v = f(x);
      return v ? *v : -std::numeric_limits<double>::infinity();
   };
   double a = best_i == 0 ? lo : lo + step * static_cast<double>(best_i - 1);
   double b = best_i + 1 >= m ? hi : lo + step * static_cast<double>(best_i + 1);
   constexpr double inv_phi = 0.6180339887498949;
   double x1 = b - inv_phi * (b - a);
   double x2 = a + inv_phi * (b - a);
   double f1 = value(x1);
   double f2 = value(x2);
   for (int it = 0; it < opt.golden_iterations; ++it) {
      if (f1 >= f2) {
         b = x2;
         x2 = x1;
         f2 = f1;
         x1 = b - inv_phi * (b - a);
         f1 = value(x1);
      } else {
         a = x1;
         x1 = x2;
         f1 = f2;
         x2 = a + inv_phi * (b - a);
         f2 = value(x2);
      }
   }
   if (f1 > best_v && f1 >= f2) return x1;
   if (f2 > best_v) return x2;
   return best_x;
}

} // namespace detail

/// Range of peak prices { alpha'/(-2 beta') : theta' in ellipsoid ∩ box },
/// clamped to [l, u]; absent when the intersection is empty. For fixed beta'
/// the peak price is increasing in alpha', so the extremes sit on the slice
/// endpoints and a line search over beta' suffices.
inline std::optional<Interval> price_confidence_interval(const ConfidenceEllipsoid& ell, const ParamBox& box,
                                                         const PriceInterval& prices,
                                                         const LineSearchOptions& opt = {})
{
   const auto range = feasible_beta_range(ell, box);
   if (!range) return std::nullopt;
   const detail::EllipsoidSlicer slicer(ell);
   auto slice = [&](double beta) -> std::optional<Interval> {
      auto s = slicer.at(beta);
      if (!s) return std::nullopt;
      const double lo = std::max(s->lo, box.alpha_min);
      const double hi = std::min(s->hi, box.alpha_max);
      if (lo > hi) return std::nullopt;
      return Interval{lo, hi};
   };
   auto upper = [&](double beta) -> std::optional<double> {
      auto s = slice(beta);
      if (!s) return std::nullopt;
      return s->hi / (-2.0 * beta);
   };
   auto neg_lower = [&](double beta) -> std::optional<double> {
      auto s = slice(beta);
      if (!s) return std::nullopt;
      return -(s->lo / (-2.0 * beta));
   };
   const auto b_hi = detail::line_search_max(upper, range->lo, range->hi, opt);
   const auto b_lo = detail::line_search_max(neg_lower, range->lo, range->hi, opt);
   if (!b_hi || !b_lo) return std::nullopt;
   const double p_hi = *upper(*b_hi);
   const double p_lo = -*neg_lower(*b_lo);
   return Interval{prices.clamp(p_lo), prices.clamp(p_hi)};
}

} // namespace opod
