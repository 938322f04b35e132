#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace locdiff {

/// One Philox4x64-10 block: a pure function of (counter, key).
std::array<std::uint64_t, 4> philox4x64(const std::array<std::uint64_t, 4>& counter,
                                        const std::array<std::uint64_t, 2>& key);

/// Stable sub-experiment seed: a pure function of (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Counter-based random stream. A stream is identified by (seed, stream id);
/// every draw is addressed by an explicit 128-bit counter (hi, lo), so draws
/// are reproducible regardless of evaluation order or worker count.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

  std::uint64_t seed() const { return key_[0]; }
  std::uint64_t stream() const { return key_[1]; }

  std::array<std::uint64_t, 4> raw(std::uint64_t hi, std::uint64_t lo) const {
    return philox4x64({lo, hi, 0, 0}, key_);
  }

  /// Four iid uniforms in [0,1) from one block.
  std::array<double, 4> uniforms(std::uint64_t hi, std::uint64_t lo) const;

  /// Four iid standard normals from one block (two Box-Muller pairs).
  std::array<double, 4> normals(std::uint64_t hi, std::uint64_t lo) const;

  /// One standard normal addressed by (hi, lo); lane 0 of the block at that counter.
  double normal_at(std::uint64_t hi, std::uint64_t lo) const { return normals(hi, lo)[0]; }

  /// Fills out with iid standard normals using consecutive lo counters starting
  /// at lo_base (each block yields four values).
  void fill_normals(std::uint64_t hi, std::uint64_t lo_base, std::span<double> out) const;

 private:
  std::array<std::uint64_t, 2> key_;
};

/// Convenience sequential view over a CounterRng: an incrementing counter plus
/// a small buffer. Deterministic given (seed, stream).
class SequentialRng {
 public:
  SequentialRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t hi = 0)
      : base_(seed, stream), hi_(hi) {}

  explicit SequentialRng(const CounterRng& base, std::uint64_t hi = 0) : base_(base), hi_(hi) {}

  double uniform();                       // [0,1)
  double normal();                        // N(0,1)
  std::uint64_t uniform_int(std::uint64_t n);  // {0,...,n-1}, unbiased
  double gamma(double shape);             // Gamma(shape, scale=1), shape > 0
  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

  /// Fisher-Yates shuffle of [first, first+n).
  template <typename T>
  void shuffle(T* first, std::size_t n) {
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(first[i - 1], first[j]);
    }
  }

  const CounterRng& base() const { return base_; }

 private:
  void refill();

  CounterRng base_;
  std::uint64_t hi_ = 0;
  std::uint64_t lo_ = 0;
  std::array<double, 4> norm_buf_{};
  int norm_avail_ = 0;
  std::array<double, 4> unif_buf_{};
  int unif_avail_ = 0;
};

}  // namespace locdiff
