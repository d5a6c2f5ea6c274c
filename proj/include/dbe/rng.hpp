#pragma once

#include <cstdint>
#include <string>

namespace dbe {

// splitmix64; used to expand seeds and to derive independent stream keys.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with 256-bit state.  Streams for independent chains are
// derived by hashing (seed, stream_id) through splitmix64, which gives
// collision-free decorrelated states for the stream counts used here.
class Rng {
 public:
  static constexpr const char* kIdentity = "xoshiro256++/splitmix64-streams";

  Rng() : Rng(0, 0) {}

  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed;
    splitmix64(sm);
    sm ^= 0xA5A5A5A5A5A5A5A5ULL * (stream + 1);
    for (auto& w : s_) w = splitmix64(sm);
    // avoid the all-zero state, however unlikely
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), n > 0; Lemire-style rejection
  std::uint64_t uniform_below(std::uint64_t n) {
    for (;;) {
      std::uint64_t x = next_u64();
      std::uint64_t r = x % n;
      if (x - r <= ~std::uint64_t{0} - (n - 1)) return r;
    }
  }

  bool coin() { return (next_u64() >> 63) != 0; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace dbe
