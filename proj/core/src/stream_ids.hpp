#pragma once

#include <cstdint>

// Stream ids keying the counter-based RNG. Each independent source of
// randomness owns one id so that draws never collide across subsystems.
namespace locdiff::streams {

inline constexpr std::uint64_t kReverseSampler = 0x01;
inline constexpr std::uint64_t kGaussianData = 0x02;
inline constexpr std::uint64_t kBandedFactor = 0x03;
inline constexpr std::uint64_t kForwardPerturb = 0x04;
inline constexpr std::uint64_t kTradeoffRep = 0x05;
inline constexpr std::uint64_t kWeightInit = 0x06;
inline constexpr std::uint64_t kTrainNoise = 0x07;
inline constexpr std::uint64_t kTrainPoints = 0x08;
inline constexpr std::uint64_t kCirSimulate = 0x09;
inline constexpr std::uint64_t kCirGenerate = 0x0a;
inline constexpr std::uint64_t kDsmLoss = 0x0b;
inline constexpr std::uint64_t kOracleMc = 0x0c;

}  // namespace locdiff::streams
