#pragma once

#include <cstdint>
#include <limits>

namespace opod {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
   z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
   return z ^ (z >> 31);
}

/// Counter-based random stream keyed by (experiment seed, replication index).
///
/// Output i of a stream is a pure function of (key, i), so replications can be
/// generated in any order or in parallel and still produce identical draws.
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
public:
   using result_type = std::uint64_t;

   CounterRng() = default;
   CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(mix64(seed ^ 0x9e3779b97f4a7c15ULL) + stream * 0xd1b54a32d192ed03ULL))
   {
   }

   static constexpr result_type min() { return 0; }
   static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

   result_type operator()() noexcept
   {
      return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
   }

   std::uint64_t key() const noexcept { return key_; }
   std::uint64_t counter() const noexcept { return counter_; }

private:
   std::uint64_t key_ = 0x2545f4914f6cdd1dULL;
   std::uint64_t counter_ = 0;
};

inline CounterRng replication_stream(std::uint64_t seed, std::uint64_t replication)
{
   return CounterRng(seed, replication);
}

} // namespace opod
