#pragma once

#include <cmath>
#include <cstdint>

namespace hazard {

// Counter-based splittable random stream.
//
// Output k of a stream with key K is mix64(K + k*GOLDEN), i.e. the SplitMix64
// sequence started at K. Child streams are derived from the parent key and a
// 64-bit index only (never from the parent's position), so per-sample /
// per-epoch streams can be handed out to parallel workers while staying
// identical to a sequential run. Integer arithmetic end to end: identical
// seed + call order gives identical output on every platform.
class RngState {
 public:
  RngState() : RngState{0} {}
  explicit RngState(std::uint64_t seed) : key_{mix64(seed + kKeySalt)} {}

  // Independent stream addressed by (this stream, index); deterministic and
  // insensitive to how much the parent has been consumed.
  RngState child(std::uint64_t index) const {
    RngState c;
    c.key_ = mix64((key_ ^ kChildSalt) + index * kGolden);
    c.counter_ = 0;
    return c;
  }
  // Multi-level convenience: child(a).child(b) without the intermediate object.
  RngState child(std::uint64_t a, std::uint64_t b) const { return child(a).child(b); }
  RngState child(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return child(a).child(b).child(c);
  }

  std::uint64_t next_u64() {
    counter_ += 1;
    return mix64(key_ + counter_ * kGolden);
  }

  // Uniform on [0,1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as the argument of log.
  double next_unit_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Inverse-CDF exponential draw; rate must be positive.
  double next_exp(double rate) { return -std::log(next_unit_positive()) / rate; }

  // Uniform on [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, bound) by rejection-free scaling; bound >= 1.
  // 64-bit multiply-shift keeps the draw unbiased to < 2^-64.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kKeySalt = 0xD1B54A32D192ED03ull;
  static constexpr std::uint64_t kChildSalt = 0xA5A5A5A55A5A5A5Aull;

  // SplitMix64 finalizer (Steele et al.); bijective on 64-bit words.
  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace hazard
