#pragma once

#include <cmath>
#include <cstdint>

/// Counter-based random number generation.
///
/// Every random quantity in the library is a pure function of
/// (master_seed, stream_id, slot, purpose, draw index).  A draw never depends
/// on how work was scheduled, so ensembles reproduce bit-for-bit across runs
/// and across thread counts, and two solver runs that share a master seed see
/// common randomness wherever their (stream, slot, purpose) coordinates agree.
///
/// The block generator is Philox4x32-10, chosen for its tiny state and its
/// well-studied statistical quality in parallel Monte Carlo.
namespace mvsde {

/// Namespaces the independent substreams hanging off one (seed, stream) pair.
enum class StreamPurpose : std::uint32_t {
  kBrownian = 0,
  kJumpTimes = 1,
  kJumpMarks = 2,
  kMarkBatch = 3,
  kInitial = 4,
  kAudit = 5,
};

namespace detail {

struct PhiloxBlock {
  std::uint32_t x[4];
};

inline std::uint32_t mulhi32(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) >> 32);
}

/// One 10-round Philox4x32 evaluation of `ctr` under `key`.
inline PhiloxBlock philox4x32(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2, std::uint32_t c3,
                              std::uint32_t k0, std::uint32_t k1) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint32_t hi0 = mulhi32(kM0, c0);
    const std::uint32_t lo0 = kM0 * c0;
    const std::uint32_t hi1 = mulhi32(kM1, c2);
    const std::uint32_t lo1 = kM1 * c2;
    const std::uint32_t n0 = hi1 ^ c1 ^ k0;
    const std::uint32_t n1 = lo1;
    const std::uint32_t n2 = hi0 ^ c3 ^ k1;
    const std::uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += kW0;
    k1 += kW1;
  }
  return PhiloxBlock{{c0, c1, c2, c3}};
}

}  // namespace detail

/// One logical substream: an endless deterministic sequence of draws.
///
/// The (slot, stream, purpose) coordinates are fixed at construction; the
/// running draw counter advances as values are consumed.  Instances are cheap
/// value types; construct them on the fly wherever a substream is needed.
class CounterStream {
 public:
  CounterStream(std::uint64_t master_seed, std::uint32_t stream_id, std::uint32_t slot, StreamPurpose purpose)
      : k0_(static_cast<std::uint32_t>(master_seed)),
        k1_(static_cast<std::uint32_t>(master_seed >> 32)),
        c1_(slot),
        c2_(stream_id),
        c3_(static_cast<std::uint32_t>(purpose)) {}

  /// Next 64 uniform random bits.
  std::uint64_t next_u64() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const detail::PhiloxBlock b = detail::philox4x32(c0_++, c1_, c2_, c3_, k0_, k1_);
    spare_ = (static_cast<std::uint64_t>(b.x[2]) << 32) | b.x[3];
    have_spare_ = true;
    return (static_cast<std::uint64_t>(b.x[0]) << 32) | b.x[1];
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a logarithm argument.
  double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal draw (Box-Muller; consumes uniforms pairwise).
  double gaussian() {
    if (have_gauss_) {
      have_gauss_ = false;
      return gauss_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    gauss_ = r * std::sin(th);
    have_gauss_ = true;
    return r * std::cos(th);
  }

  /// Exponential draw with the given rate.
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

 private:
  std::uint32_t k0_, k1_;
  std::uint32_t c0_ = 0;
  std::uint32_t c1_, c2_, c3_;
  std::uint64_t spare_ = 0;
  bool have_spare_ = false;
  double gauss_ = 0.0;
  bool have_gauss_ = false;
};

/// Mixes a run index into a master seed, giving decorrelated per-run seeds
/// that do not depend on execution order (SplitMix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t run_index) {
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ull * (run_index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace mvsde
