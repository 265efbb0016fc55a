#pragma once

// Counter-based pseudorandom generation for the simulator.
//
// The block function is Philox4x64 with 10 rounds (Salmon et al., SC'11), the
// same generator numpy exposes as `numpy.random.Philox`. Given a 256-bit
// counter and a 128-bit key it returns four 64-bit words; nothing else is
// stateful, so any sample can be regenerated from (key, counter) alone.
//
// Known-answer vectors (counter words c0..c3, key words k0 k1 -> outputs):
//   c = {0,0,0,0}, k = {0,0}
//     -> 16554d9eca36314c db20fe9d672d0fdc d7e772cee186176b 7e68b68aec7ba23b
//   c = {5,0,0,0}, k = {1234,7}
//     -> bf2e4549434d52b3 936b1d05ee49dd0f 8f9024145b4a0181 e226d6e0118d9f8e
//
// Streams: the simulator keys every stream with (master seed, stream id), puts
// the per-source seed in counter word 1 and walks counter word 0 up from zero.
// Stream ids are built by stream_id().
// Uniform doubles take the top 53 bits of a word; normals use Box-Muller on
// consecutive uniform pairs.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace editer {

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo)
{
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

} // namespace detail

inline PhiloxCounter philox4x64_10(PhiloxCounter ctr, PhiloxKey key)
{
  constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t m1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t w1 = 0xBB67AE8584CAA73BULL;

  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += w0;
      key[1] += w1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    detail::mulhilo64(m0, ctr[0], hi0, lo0);
    detail::mulhilo64(m1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

enum class StreamKind : std::uint64_t {
  source_waveform = 1,
  source_phase = 2,
  thermal_noise = 3,
  user = 15,
};

/// Stream id layout: kind in bits 60..63, partition in bits 40..59, index in bits 0..39.
inline std::uint64_t stream_id(StreamKind kind, std::uint64_t partition, std::uint64_t index)
{
  return (static_cast<std::uint64_t>(kind) << 60) | ((partition & 0xFFFFFULL) << 40) | (index & 0xFFFFFFFFFFULL);
}

/// Sequential reader over one Philox stream.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t lane = 0) : key_{seed, stream}, lane_(lane) {}

  std::uint64_t next_u64()
  {
    if (pos_ == 4) {
      block_ = philox4x64_10({counter_, lane_, 0, 0}, key_);
      ++counter_;
      pos_ = 0;
    }
    return block_[pos_++];
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

private:
  PhiloxKey key_;
  std::uint64_t lane_ = 0;
  std::uint64_t counter_ = 0;
  PhiloxCounter block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace editer
