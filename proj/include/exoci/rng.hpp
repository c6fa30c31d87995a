#pragma once

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based random streams (Philox 4x32-10, Salmon et al. 2011).
// Each (seed, purpose, replication) triple owns an independent stream, so
// replications can be evaluated in any order on any number of threads and
// still produce identical draws.

namespace exoci {

struct Philox4x32 {
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// SplitMix64; used to derive sub-seeds from a master seed plus context words.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t w0,
                                 std::uint64_t w1 = 0, std::uint64_t w2 = 0) {
  std::uint64_t s = mix64(master ^ 0xD6E8FEB86659FD93ull);
  s = mix64(s ^ w0);
  s = mix64(s ^ w1);
  s = mix64(s ^ w2);
  return s;
}

inline std::uint64_t double_bits(double v) {
  std::uint64_t b;
  static_assert(sizeof(b) == sizeof(v));
  __builtin_memcpy(&b, &v, sizeof(b));
  return b;
}

// Purpose tags keep sub-streams of one replication provably disjoint.
enum class StreamPurpose : std::uint32_t {
  generic = 0,
  cp = 1,
  sel_num = 2,
  sel_term = 3,
};

// Stream of i.i.d. N(0,1) draws for one replication. Box-Muller on top of
// Philox blocks; `retry` reseeds the replication after a degenerate draw.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t replication,
               std::uint32_t retry = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        base_{static_cast<std::uint32_t>(replication),
              static_cast<std::uint32_t>(replication >> 32),
              (static_cast<std::uint32_t>(purpose) << 8) | (retry & 0xFFu)} {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const auto words = Philox4x32::block({base_[0], base_[1], base_[2], block_++}, key_);
    const double u1 = to_unit(words[0], words[1]);
    const double u2 = to_unit(words[2], words[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform on (0,1), exclusive of both ends.
  double next_uniform() {
    const auto words = Philox4x32::block({base_[0], base_[1], base_[2], block_++}, key_);
    return to_unit(words[0], words[1]);
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t v = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(v >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 3> base_;
  std::uint32_t block_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace exoci
