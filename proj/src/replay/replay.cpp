#include "epose/replay/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace epose::replay {

ReplayBuffer::ReplayBuffer(std::size_t capacity_transitions) : capacity_(capacity_transitions) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
}

std::size_t ReplayBuffer::bytes_of(const Stored& s) {
  std::size_t b = sizeof(Stored) + s.actions.capacity() * sizeof(int);
  const auto& inst = *s.instance;
  b += sizeof(inst) + inst.coords.capacity() * sizeof(routing::Point) +
       inst.demand_units.capacity() * sizeof(int);
  return b;
}

std::uint64_t ReplayBuffer::push_episode(
    std::shared_ptr<const routing::ProblemInstance> instance, std::vector<int> actions) {
  if (!instance) throw std::invalid_argument("push_episode: null instance");
  if (actions.empty()) throw std::invalid_argument("push_episode: empty episode");
  if (actions.size() > capacity_)
    throw std::invalid_argument("push_episode: episode longer than buffer capacity");

  Stored s{next_id_++, next_start_, std::move(instance), std::move(actions)};
  next_start_ += s.actions.size();
  size_ += s.actions.size();
  pushed_ += s.actions.size();
  bytes_ += bytes_of(s);
  episodes_.push_back(std::move(s));

  while (size_ > capacity_) {
    const Stored& front = episodes_.front();
    size_ -= front.actions.size();
    base_ = front.start + front.actions.size();
    bytes_ -= bytes_of(front);
    episodes_.pop_front();
  }
  return episodes_.back().id;
}

SampleRef ReplayBuffer::sample_ref(util::Rng& rng) {
  if (size_ == 0) throw std::logic_error("sample from empty replay buffer");
  const std::uint64_t g = base_ + rng.uniform_index(size_);
  // Episodes are ordered by start; find the one containing transition g.
  const auto it = std::upper_bound(
      episodes_.begin(), episodes_.end(), g,
      [](std::uint64_t v, const Stored& s) { return v < s.start; });
  const Stored& ep = *std::prev(it);
  ++sampled_;
  return SampleRef{ep.id, static_cast<int>(g - ep.start)};
}

const ReplayBuffer::Stored& ReplayBuffer::find(std::uint64_t episode_id) const {
  const auto it = std::lower_bound(
      episodes_.begin(), episodes_.end(), episode_id,
      [](const Stored& s, std::uint64_t v) { return s.id < v; });
  if (it == episodes_.end() || it->id != episode_id)
    throw std::out_of_range("replay episode not found (evicted?)");
  return *it;
}

const std::vector<int>& ReplayBuffer::actions_of(std::uint64_t episode_id) const {
  return find(episode_id).actions;
}

Transition ReplayBuffer::materialize(const SampleRef& ref) const {
  const Stored& ep = find(ref.episode_id);
  if (ref.t < 0 || ref.t >= static_cast<int>(ep.actions.size()))
    throw std::out_of_range("replay transition index out of range");

  env::ConstructionState s = env::reset(ep.instance);
  for (int i = 0; i < ref.t; ++i) s = env::step(s, ep.actions[static_cast<std::size_t>(i)]).state;

  Transition tr;
  tr.instance = ep.instance;
  tr.state = s;
  tr.action = ep.actions[static_cast<std::size_t>(ref.t)];
  auto res = env::step(s, tr.action);
  tr.reward = res.reward;
  tr.next_state = std::move(res.state);
  tr.terminal = tr.next_state.terminal;
  return tr;
}

Transition ReplayBuffer::sample(util::Rng& rng) { return materialize(sample_ref(rng)); }

}  // namespace epose::replay
