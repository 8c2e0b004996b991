#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace sdamarl {

using Rng = std::mt19937_64;

/// Independent generator for one consumer (env, exploration, init, ...).
/// Streams derived from the same seed never share state, so adding or
/// removing a consumer leaves every other stream untouched.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill order so that a batch of one row draws the same numbers
  // as the leading row of a larger batch.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = standard_normal(rng);
  return out;
}

// Named stream ids used across the trainer and harness.
namespace streams {
inline constexpr std::uint64_t kEnvReset = 1;
inline constexpr std::uint64_t kExploration = 2;
inline constexpr std::uint64_t kActorInit = 3;
inline constexpr std::uint64_t kCriticInit = 4;
inline constexpr std::uint64_t kDiffusionInit = 5;
inline constexpr std::uint64_t kReplaySample = 6;
inline constexpr std::uint64_t kDiffusionSample = 7;
inline constexpr std::uint64_t kHarvest = 8;
inline constexpr std::uint64_t kHarvestReset = 9;
inline constexpr std::uint64_t kEvalReset = 10;
inline constexpr std::uint64_t kCriticChoice = 11;
inline constexpr std::uint64_t kDiffusionCriticInit = 12;
}  // namespace streams

}  // namespace sdamarl
