#include "locdiff/rng.hpp"

#include <cmath>

#include "locdiff/errors.hpp"

namespace locdiff {

namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mul_hilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

inline std::array<std::uint64_t, 4> philox_round(const std::array<std::uint64_t, 4>& c,
                                                 const std::array<std::uint64_t, 2>& k) {
  std::uint64_t hi0, lo0, hi1, lo1;
  mul_hilo(kPhiloxM0, c[0], hi0, lo0);
  mul_hilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr double kU64ToUnit = 0x1.0p-53;  // 2^-53

inline double to_uniform(std::uint64_t x) { return static_cast<double>(x >> 11) * kU64ToUnit; }

// (0,1] variant so log() below is safe
inline double to_uniform_pos(std::uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * kU64ToUnit;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::array<std::uint64_t, 4> philox4x64(const std::array<std::uint64_t, 4>& counter,
                                        const std::array<std::uint64_t, 2>& key) {
  std::array<std::uint64_t, 4> c = counter;
  std::array<std::uint64_t, 2> k = key;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = philox_round(c, k);
  }
  return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return philox4x64({a, b, 0, 0}, {seed, 0x5eedc0de5eedc0deULL})[0];
}

std::array<double, 4> CounterRng::uniforms(std::uint64_t hi, std::uint64_t lo) const {
  auto r = raw(hi, lo);
  return {to_uniform(r[0]), to_uniform(r[1]), to_uniform(r[2]), to_uniform(r[3])};
}

std::array<double, 4> CounterRng::normals(std::uint64_t hi, std::uint64_t lo) const {
  auto r = raw(hi, lo);
  double u0 = to_uniform_pos(r[0]);
  double u1 = to_uniform(r[1]);
  double u2 = to_uniform_pos(r[2]);
  double u3 = to_uniform(r[3]);
  double m0 = std::sqrt(-2.0 * std::log(u0));
  double m1 = std::sqrt(-2.0 * std::log(u2));
  return {m0 * std::cos(kTwoPi * u1), m0 * std::sin(kTwoPi * u1),
          m1 * std::cos(kTwoPi * u3), m1 * std::sin(kTwoPi * u3)};
}

void CounterRng::fill_normals(std::uint64_t hi, std::uint64_t lo_base, std::span<double> out) const {
  std::size_t i = 0;
  std::uint64_t lo = lo_base;
  while (i < out.size()) {
    auto z = normals(hi, lo++);
    for (int lane = 0; lane < 4 && i < out.size(); ++lane) out[i++] = z[lane];
  }
}

void SequentialRng::refill() { ++lo_; }

double SequentialRng::uniform() {
  if (unif_avail_ == 0) {
    unif_buf_ = base_.uniforms(hi_, lo_++);
    unif_avail_ = 4;
  }
  return unif_buf_[4 - unif_avail_--];
}

double SequentialRng::normal() {
  if (norm_avail_ == 0) {
    norm_buf_ = base_.normals(hi_, lo_++);
    norm_avail_ = 4;
  }
  return norm_buf_[4 - norm_avail_--];
}

std::uint64_t SequentialRng::uniform_int(std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_int: n must be positive");
  // rejection below the last full multiple of n keeps the draw unbiased
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    auto r = base_.raw(hi_, lo_++);
    for (int lane = 0; lane < 4; ++lane) {
      if (r[lane] >= threshold) return r[lane] % n;
    }
  }
}

double SequentialRng::gamma(double shape) {
  if (!(shape > 0.0)) throw ArgumentError("gamma: shape must be positive");
  if (shape < 1.0) {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace locdiff
