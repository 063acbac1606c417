#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace fmds {

//! Counter-based 64-bit generator: output i is the SplitMix64 finalizer
//! applied to `key + i * golden_gamma`. Streams are split by hashing a name
//! or an index into a fresh key, so sub-streams never share state and any
//! output can be recomputed from (key, counter) alone.
class CounterRng
{
public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0)
    : key_(mix(key))
    , counter_(counter)
  {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max()
  {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() { return next_u64(); }

  constexpr std::uint64_t next_u64()
  {
    return mix(key_ + (counter_++) * golden_gamma);
  }

  //! Uniform double strictly inside (0, 1), 53-bit resolution.
  constexpr double next_open01()
  {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  CounterRng split(std::string_view name) const
  {
    return CounterRng(key_ ^ fnv1a(name));
  }

  constexpr CounterRng split(std::uint64_t index) const
  {
    return CounterRng(key_ ^ mix(index + golden_gamma));
  }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z)
  {
    z += golden_gamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t fnv1a(std::string_view s)
  {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

} // namespace fmds
