#pragma once

// Philox4x32-10 counter-based generator (Salmon, Moraes, Dror, Shaw, SC'11).
// Every draw is a pure function of (key, counter), so particles can be
// stepped in any order on any number of threads and still see the same noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfsim {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Stream domains keep initialisation draws disjoint from stepping draws.
enum class StreamDomain : std::uint32_t { kStep = 0u, kInit = 0x80000000u };

/// Two independent standard normals for (seed, particle, step, block).
/// Box-Muller on two 53-bit uniforms built from one Philox block.
inline std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream,
                                         std::uint64_t step, std::uint32_t block,
                                         StreamDomain domain = StreamDomain::kStep) noexcept {
  const PhiloxKey key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const PhiloxCounter ctr{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(step),
                          static_cast<std::uint32_t>(step >> 32) ^
                              (static_cast<std::uint32_t>(stream >> 32) << 16),
                          block | static_cast<std::uint32_t>(domain)};
  const PhiloxCounter r = philox4x32_10(ctr, key);
  const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
  constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * kTwoPow53Inv;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * kTwoPow53Inv;          // [0, 1)
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace mfsim
