#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "epose/env/env.hpp"
#include "epose/util/rng.hpp"

namespace epose::replay {

// Handle to one stored transition: step t of a stored episode.
struct SampleRef {
  std::uint64_t episode_id = 0;
  int t = 0;
};

struct Transition {
  std::shared_ptr<const routing::ProblemInstance> instance;
  env::ConstructionState state;
  int action = 0;
  double reward = 0.0;
  env::ConstructionState next_state;
  bool terminal = false;
};

// FIFO buffer over construction episodes. Stores the instance pointer and the
// action sequence only; states and rewards are reconstructed by replaying the
// environment, which is deterministic given (instance, actions). Capacity is
// counted in transitions and eviction drops whole episodes from the front.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_transitions);

  std::uint64_t push_episode(std::shared_ptr<const routing::ProblemInstance> instance,
                             std::vector<int> actions);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t episode_count() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushed_transitions() const { return pushed_; }
  std::uint64_t sampled_transitions() const { return sampled_; }

  // Uniform over the transitions currently held.
  SampleRef sample_ref(util::Rng& rng);
  Transition materialize(const SampleRef& ref) const;
  Transition sample(util::Rng& rng);

  const std::vector<int>& actions_of(std::uint64_t episode_id) const;

  std::size_t approx_bytes() const { return bytes_; }

 private:
  struct Stored {
    std::uint64_t id;
    std::uint64_t start;  // global index of this episode's first transition
    std::shared_ptr<const routing::ProblemInstance> instance;
    std::vector<int> actions;
  };

  static std::size_t bytes_of(const Stored& s);
  const Stored& find(std::uint64_t episode_id) const;

  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t bytes_ = 0;
  std::uint64_t next_id_ = 0;
  std::uint64_t next_start_ = 0;
  std::uint64_t base_ = 0;  // global index of the oldest held transition
  std::uint64_t pushed_ = 0;
  mutable std::uint64_t sampled_ = 0;
  std::deque<Stored> episodes_;
};

}  // namespace epose::replay
