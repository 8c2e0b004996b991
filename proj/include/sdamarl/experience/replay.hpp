#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "sdamarl/common/random.hpp"

namespace sdamarl::experience {

enum class Source : std::uint8_t { Live = 0, Harvested = 1 };

/// Joint transition. Per-agent blocks are concatenated in agent order.
struct Transition {
  Eigen::VectorXd obs;       // N * obs_dim
  Eigen::VectorXd actions;   // N * action_dim
  Eigen::VectorXd rewards;   // N
  Eigen::VectorXd next_obs;  // N * obs_dim
  bool done = false;
  Source source = Source::Live;
};

struct TransitionSchema {
  std::size_t num_agents = 0;
  std::size_t obs_dim = 0;     // per agent
  std::size_t action_dim = 0;  // per agent

  bool operator==(const TransitionSchema&) const = default;
};

/// Row-per-sample matrices for one minibatch.
struct Batch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd rewards;
  Eigen::MatrixXd next_obs;
  Eigen::VectorXd done;    // 1.0 for terminal transitions
  Eigen::VectorXd source;  // 0 or 1
  std::vector<std::size_t> slots;

  Eigen::Index size() const { return obs.rows(); }
};

enum class SourceFilter { Any, OnlyHarvested, Mixed };

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fixed-capacity ring with oldest-first eviction. Each source keeps an
/// index list of the slots it occupies, so filtered sampling is O(batch).
class ReplayBuffer {
 public:
  ReplayBuffer(TransitionSchema schema, std::size_t capacity) : schema_(schema), capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
  }

  const TransitionSchema& schema() const { return schema_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  std::size_t count(Source s) const { return by_source_[index(s)].size(); }
  std::uint64_t total_pushed() const { return pushed_; }
  std::uint64_t total_evicted() const { return evicted_; }
  const Transition& at(std::size_t slot) const { return items_.at(slot); }

  void push(Transition t) {
    check_schema(t);
    std::size_t slot;
    if (items_.size() < capacity_) {
      slot = items_.size();
      items_.push_back(std::move(t));
      position_.push_back(0);
    } else {
      slot = next_;
      forget(slot);
      items_[slot] = std::move(t);
      ++evicted_;
    }
    auto& list = by_source_[index(items_[slot].source)];
    position_[slot] = list.size();
    list.push_back(slot);
    next_ = (slot + 1) % capacity_;
    ++pushed_;
  }

  /// Uniform sample without replacement. Returns nothing when too few
  /// eligible items exist. Mixed draws half (rounded down) from live and
  /// the rest from harvested transitions.
  std::optional<Batch> sample(std::size_t batch, SourceFilter filter, Rng& rng) const {
    if (batch == 0) throw std::invalid_argument("sample: batch must be > 0");
    std::vector<std::size_t> slots;
    switch (filter) {
      case SourceFilter::Any:
        if (size() < batch) return std::nullopt;
        for (auto i : draw(size(), batch, rng)) slots.push_back(i);
        break;
      case SourceFilter::OnlyHarvested: {
        const auto& h = by_source_[1];
        if (h.size() < batch) return std::nullopt;
        for (auto i : draw(h.size(), batch, rng)) slots.push_back(h[i]);
        break;
      }
      case SourceFilter::Mixed: {
        const std::size_t live_n = batch / 2, harvest_n = batch - live_n;
        const auto& l = by_source_[0];
        const auto& h = by_source_[1];
        if (l.size() < live_n || h.size() < harvest_n) return std::nullopt;
        for (auto i : draw(l.size(), live_n, rng)) slots.push_back(l[i]);
        for (auto i : draw(h.size(), harvest_n, rng)) slots.push_back(h[i]);
        break;
      }
    }
    return gather(slots);
  }

  Batch gather(const std::vector<std::size_t>& slots) const {
    const auto B = static_cast<Eigen::Index>(slots.size());
    const auto ow = static_cast<Eigen::Index>(schema_.num_agents * schema_.obs_dim);
    const auto aw = static_cast<Eigen::Index>(schema_.num_agents * schema_.action_dim);
    const auto n = static_cast<Eigen::Index>(schema_.num_agents);
    Batch b;
    b.obs.resize(B, ow);
    b.next_obs.resize(B, ow);
    b.actions.resize(B, aw);
    b.rewards.resize(B, n);
    b.done.resize(B);
    b.source.resize(B);
    b.slots = slots;
    for (Eigen::Index r = 0; r < B; ++r) {
      const Transition& t = items_.at(slots[static_cast<std::size_t>(r)]);
      b.obs.row(r) = t.obs.transpose();
      b.next_obs.row(r) = t.next_obs.transpose();
      b.actions.row(r) = t.actions.transpose();
      b.rewards.row(r) = t.rewards.transpose();
      b.done(r) = t.done ? 1.0 : 0.0;
      b.source(r) = t.source == Source::Harvested ? 1.0 : 0.0;
    }
    return b;
  }

 private:
  static std::size_t index(Source s) { return s == Source::Harvested ? 1 : 0; }

  void check_schema(const Transition& t) const {
    const auto ow = static_cast<Eigen::Index>(schema_.num_agents * schema_.obs_dim);
    const auto aw = static_cast<Eigen::Index>(schema_.num_agents * schema_.action_dim);
    if (t.obs.size() != ow || t.next_obs.size() != ow || t.actions.size() != aw ||
        t.rewards.size() != static_cast<Eigen::Index>(schema_.num_agents))
      throw SchemaError("push: transition dimensions do not match the buffer schema");
  }

  // Swap-remove the slot from its source list.
  void forget(std::size_t slot) {
    auto& list = by_source_[index(items_[slot].source)];
    const std::size_t pos = position_[slot];
    const std::size_t last = list.back();
    list[pos] = last;
    position_[last] = pos;
    list.pop_back();
  }

  // Floyd's algorithm: k distinct indices from [0, n).
  static std::vector<std::size_t> draw(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> out;
    out.reserve(k);
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = n - k; j < n; ++j) {
      const std::size_t v = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      if (seen.insert(v).second) out.push_back(v);
      else {
        seen.insert(j);
        out.push_back(j);
      }
    }
    return out;
  }

  TransitionSchema schema_;
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::vector<std::size_t> position_;  // slot -> index within its source list
  std::array<std::vector<std::size_t>, 2> by_source_;
  std::size_t next_ = 0;
  std::uint64_t pushed_ = 0;
  std::uint64_t evicted_ = 0;
};

}  // namespace sdamarl::experience
