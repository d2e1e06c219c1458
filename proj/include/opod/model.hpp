#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "opod/rng.hpp"

namespace opod {

/// Raised for invalid configuration or out-of-domain parameters.
class ParameterError : public std::invalid_argument {
public:
   using std::invalid_argument::invalid_argument;
};

/// Linear demand D = alpha + beta * p + noise. Also used as a plain 2-vector
/// (estimates, candidate parameters), in which case beta may be nonnegative.
struct DemandParams {
   double alpha = 0.0;
   double beta = 0.0;

   friend bool operator==(const DemandParams&, const DemandParams&) = default;
};

/// Known rectangle containing the true parameter.
struct ParamBox {
   double alpha_min = 0.0;
   double alpha_max = 0.0;
   double beta_min = 0.0;
   double beta_max = 0.0;

   bool contains(const DemandParams& theta) const noexcept
   {
      return theta.alpha >= alpha_min && theta.alpha <= alpha_max && theta.beta >= beta_min &&
             theta.beta <= beta_max;
   }

   DemandParams project(const DemandParams& theta) const noexcept
   {
      return {std::clamp(theta.alpha, alpha_min, alpha_max), std::clamp(theta.beta, beta_min, beta_max)};
   }
};

struct PriceInterval {
   double l = 0.0;
   double u = 1.0;

   double clamp(double p) const noexcept { return std::clamp(p, l, u); }
   double midpoint() const noexcept { return 0.5 * (l + u); }
   bool contains(double p) const noexcept { return p >= l && p <= u; }
};

enum class NoiseFamily { gaussian, truncated_gaussian, uniform, rademacher_scaled };

/// Zero-mean R^2-sub-Gaussian noise.
///
///  - gaussian: N(0, R^2).
///  - truncated_gaussian: N(0, R^2) conditioned on |x| <= 2R. Symmetric truncation
///    of a Gaussian keeps the MGF below exp(x^2 R^2 / 2).
///  - uniform: U[-a, a] with a = R * sqrt(3). Its MGF sinh(ax)/(ax) is bounded by
///    exp(a^2 x^2 / 6) = exp(x^2 R^2 / 2).
///  - rademacher_scaled: +R or -R with probability 1/2; cosh(Rx) <= exp(x^2 R^2 / 2).
struct NoiseSpec {
   NoiseFamily family = NoiseFamily::gaussian;
   double scale = 1.0;
};

inline std::string_view to_string(NoiseFamily f)
{
   switch (f) {
   case NoiseFamily::gaussian: return "gaussian";
   case NoiseFamily::truncated_gaussian: return "truncated_gaussian";
   case NoiseFamily::uniform: return "uniform";
   case NoiseFamily::rademacher_scaled: return "rademacher_scaled";
   }
   return "gaussian";
}

inline NoiseFamily noise_family_from_string(std::string_view s)
{
   if (s == "gaussian") return NoiseFamily::gaussian;
   if (s == "truncated_gaussian") return NoiseFamily::truncated_gaussian;
   if (s == "uniform") return NoiseFamily::uniform;
   if (s == "rademacher_scaled") return NoiseFamily::rademacher_scaled;
   throw ParameterError("unknown noise family: " + std::string(s));
}

/// Unconstrained revenue-maximizing price alpha / (-2 beta).
inline double peak_price(const DemandParams& theta) noexcept { return theta.alpha / (-2.0 * theta.beta); }

inline double optimal_price(const DemandParams& theta, const PriceInterval& prices) noexcept
{
   return prices.clamp(peak_price(theta));
}

inline double expected_revenue(double p, const DemandParams& theta) noexcept
{
   return p * (theta.alpha + theta.beta * p);
}

inline double optimal_revenue(const DemandParams& theta, const PriceInterval& prices) noexcept
{
   return expected_revenue(optimal_price(theta, prices), theta);
}

/// A complete simulation environment.
struct Instance {
   std::string name;
   DemandParams theta_star;
   ParamBox box;
   PriceInterval prices;
   NoiseSpec noise;

   /// Regularization used by every least-squares policy.
   double lambda() const noexcept { return 1.0 + prices.u * prices.u; }

   /// Throws ParameterError unless the instance is well posed: beta < 0 over the
   /// box, theta* inside the box, and the peak price of every box member strictly
   /// inside [l, u].
   void validate() const
   {
      if (!(prices.l >= 0.0 && prices.l < prices.u))
         throw ParameterError("price interval requires 0 <= l < u");
      if (!(box.alpha_min > 0.0 && box.alpha_min <= box.alpha_max))
         throw ParameterError("parameter box requires 0 < alpha_min <= alpha_max");
      if (!(box.beta_min <= box.beta_max && box.beta_max < 0.0))
         throw ParameterError("parameter box requires beta_min <= beta_max < 0");
      if (!(noise.scale > 0.0)) throw ParameterError("noise scale R must be positive");
      if (!box.contains(theta_star)) throw ParameterError("theta* lies outside the parameter box");
      // alpha / (-2 beta) is increasing in alpha and in beta on the box.
      const double lo = box.alpha_min / (-2.0 * box.beta_min);
      const double hi = box.alpha_max / (-2.0 * box.beta_max);
      if (!(lo > prices.l && hi < prices.u))
         throw ParameterError("peak price of some box member is not interior to [l, u]");
   }
};

inline double sample_noise(const NoiseSpec& noise, CounterRng& rng)
{
   const double r = noise.scale;
   switch (noise.family) {
   case NoiseFamily::gaussian: {
      std::normal_distribution<double> dist(0.0, r);
      return dist(rng);
   }
   case NoiseFamily::truncated_gaussian: {
      std::normal_distribution<double> dist(0.0, r);
      for (;;) {
         const double x = dist(rng);
         if (std::abs(x) <= 2.0 * r) return x;
      }
   }
   case NoiseFamily::uniform: {
      const double a = r * std::sqrt(3.0);
      std::uniform_real_distribution<double> dist(-a, a);
      return dist(rng);
   }
   case NoiseFamily::rademacher_scaled: return (rng() >> 63) ? r : -r;
   }
   return 0.0;
}

/// One demand realization. Not truncated at zero.
inline double sample_demand(double p, const DemandParams& theta, const NoiseSpec& noise, CounterRng& rng)
{
   return theta.alpha + theta.beta * p + sample_noise(noise, rng);
}

struct PricedSample {
   double price = 0.0;
   double demand = 0.0;
};

/// `count` observations at a single price, stored through their sufficient
/// statistic (the demand sum). Used for very large single-price datasets.
struct PooledBlock {
   double price = 0.0;
   std::uint64_t count = 0;
   double demand_sum = 0.0;
};

/// Historical (price, demand) observations with running price statistics.
class OfflineDataset {
public:
   OfflineDataset() = default;

   void add(double price, double demand)
   {
      samples_.push_back({price, demand});
      merge_stats(price, 1);
   }

   void add(const PricedSample& s) { add(s.price, s.demand); }

   void add_pooled(double price, std::uint64_t count, double demand_sum)
   {
      if (count == 0) return;
      pooled_.push_back({price, count, demand_sum});
      merge_stats(price, count);
   }

   std::span<const PricedSample> samples() const noexcept { return samples_; }
   std::span<const PooledBlock> pooled() const noexcept { return pooled_; }

   std::uint64_t size() const noexcept { return n_; }
   bool empty() const noexcept { return n_ == 0; }

   /// Average historical price; absent for an empty dataset.
   std::optional<double> mean_price() const noexcept
   {
      if (n_ == 0) return std::nullopt;
      return mean_;
   }

   /// Population standard deviation of the historical prices (0 when empty).
   double sigma() const noexcept { return n_ == 0 ? 0.0 : std::sqrt(std::max(0.0, m2_ / static_cast<double>(n_))); }

   /// n * sigma^2, the offline design variance.
   double spread() const noexcept { return std::max(0.0, m2_); }

   /// |mean price - peak price of theta|; absent for an empty dataset.
   std::optional<double> delta(const DemandParams& theta) const noexcept
   {
      if (n_ == 0) return std::nullopt;
      return std::abs(mean_ - peak_price(theta));
   }

   std::size_t clamped_count() const noexcept { return clamped_; }
   void note_clamped() noexcept { ++clamped_; }

   /// True when every observation shares one price (sigma = 0 exactly).
   bool single_price() const noexcept
   {
      std::optional<double> first;
      for (const auto& s : samples_) {
         if (!first) first = s.price;
         else if (s.price != *first) return false;
      }
      for (const auto& b : pooled_) {
         if (!first) first = b.price;
         else if (b.price != *first) return false;
      }
      return true;
   }

   /// This dataset followed by `extra` online observations.
   OfflineDataset extended(std::span<const PricedSample> extra) const
   {
      OfflineDataset out = *this;
      for (const auto& s : extra) out.add(s);
      return out;
   }

private:
   // Chan et al. pairwise update; the incoming block has zero internal variance.
   void merge_stats(double price, std::uint64_t count)
   {
      const double na = static_cast<double>(n_);
      const double nb = static_cast<double>(count);
      const double n = na + nb;
      const double d = price - mean_;
      mean_ += d * nb / n;
      m2_ += d * d * na * nb / n;
      n_ += count;
   }

   std::vector<PricedSample> samples_;
   std::vector<PooledBlock> pooled_;
   std::uint64_t n_ = 0;
   double mean_ = 0.0;
   double m2_ = 0.0;
   std::size_t clamped_ = 0;
};

/// One independent demand draw per listed price.
inline OfflineDataset generate_offline_fixed(std::span<const double> prices, const Instance& instance,
                                             CounterRng& rng)
{
   OfflineDataset data;
   for (double p : prices) {
      if (!instance.prices.contains(p))
         throw ParameterError("offline price " + std::to_string(p) + " outside [l, u]");
      data.add(p, sample_demand(p, instance.theta_star, instance.noise, rng));
   }
   return data;
}

/// `count` draws at one price kept as a pooled sufficient statistic. Gaussian
/// noise sums are drawn exactly in one shot; other families are summed.
inline OfflineDataset generate_offline_pooled(double price, std::uint64_t count, const Instance& instance,
                                              CounterRng& rng)
{
   if (!instance.prices.contains(price)) throw ParameterError("offline price outside [l, u]");
   OfflineDataset data;
   if (count == 0) return data;
   const double mean = instance.theta_star.alpha + instance.theta_star.beta * price;
   double noise_sum = 0.0;
   if (instance.noise.family == NoiseFamily::gaussian) {
      std::normal_distribution<double> dist(0.0, instance.noise.scale * std::sqrt(static_cast<double>(count)));
      noise_sum = dist(rng);
   } else {
      for (std::uint64_t i = 0; i < count; ++i) noise_sum += sample_noise(instance.noise, rng);
   }
   data.add_pooled(price, count, static_cast<double>(count) * mean + noise_sum);
   return data;
}

/// Maps the history generated so far to the next offline price.
using OfflinePolicy = std::function<double(std::span<const PricedSample>)>;

/// Autoregressive offline data: price i may depend on observations 1..i-1.
/// Prices outside [l, u] are clamped and counted.
inline OfflineDataset generate_offline_adaptive(const OfflinePolicy& policy, std::size_t n,
                                                const Instance& instance, CounterRng& rng)
{
   OfflineDataset data;
   for (std::size_t i = 0; i < n; ++i) {
      double p = policy(data.samples());
      if (!instance.prices.contains(p)) {
         p = instance.prices.clamp(p);
         data.note_clamped();
      }
      data.add(p, sample_demand(p, instance.theta_star, instance.noise, rng));
   }
   return data;
}

} // namespace opod
