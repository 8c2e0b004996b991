#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace sdamarl::marl {

/// Greedy nearest-first assignment of AUVs to targets. Each target receives
/// floor(N_A/N_T) or ceil(N_A/N_T) AUVs; ties break on (AUV, target) index.
inline std::vector<std::size_t> assign_targets(const std::vector<Eigen::Vector3d>& auvs,
                                               const std::vector<Eigen::Vector3d>& targets) {
  if (targets.empty()) throw std::invalid_argument("assign_targets: no targets");
  if (auvs.size() < targets.size()) throw std::invalid_argument("assign_targets: fewer AUVs than targets");

  const std::size_t base = auvs.size() / targets.size();
  const std::size_t extra = auvs.size() % targets.size();

  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  pairs.reserve(auvs.size() * targets.size());
  for (std::size_t a = 0; a < auvs.size(); ++a)
    for (std::size_t t = 0; t < targets.size(); ++t) pairs.emplace_back((auvs[a] - targets[t]).norm(), a, t);
  std::sort(pairs.begin(), pairs.end());

  constexpr auto kUnassigned = static_cast<std::size_t>(-1);
  std::vector<std::size_t> out(auvs.size(), kUnassigned);
  std::vector<std::size_t> load(targets.size(), 0);
  std::size_t oversized = 0;
  for (const auto& [dist, a, t] : pairs) {
    if (out[a] != kUnassigned) continue;
    if (load[t] < base) {
      out[a] = t;
      ++load[t];
    } else if (load[t] == base && oversized < extra) {
      out[a] = t;
      ++load[t];
      ++oversized;
    }
  }
  return out;
}

}  // namespace sdamarl::marl
