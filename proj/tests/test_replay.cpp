#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "epose/replay/replay.hpp"
#include "epose/routing/core.hpp"
#include "epose/util/rng.hpp"

using namespace epose;
using replay::ReplayBuffer;
using replay::SampleRef;
using routing::ProblemInstance;
using routing::ProblemKind;

namespace {

std::shared_ptr<const ProblemInstance> make(ProblemKind k, int n, std::uint64_t seed) {
  return std::make_shared<const ProblemInstance>(routing::generate_instance(k, n, seed));
}

// A random complete episode (instance, actions) pair.
struct Episode {
  std::shared_ptr<const ProblemInstance> instance;
  std::vector<int> actions;
  std::vector<double> rewards;
};

Episode roll(ProblemKind kind, int n, std::uint64_t seed, util::Rng& rng) {
  Episode ep;
  ep.instance = make(kind, n, seed);
  auto s = env::reset(ep.instance);
  while (!s.terminal) {
    const auto mask = env::feasible_mask(s);
    std::vector<int> feas;
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j]) feas.push_back(static_cast<int>(j));
    const int a = feas[rng.uniform_index(feas.size())];
    const auto r = env::step(s, a);
    ep.actions.push_back(a);
    ep.rewards.push_back(r.reward);
    s = r.state;
  }
  return ep;
}

}  // namespace

TEST_CASE("pushed episodes are counted in transitions") {
  ReplayBuffer buf(1000);
  CHECK(buf.empty());
  util::Rng rng(1);
  std::size_t expect = 0;
  for (int i = 0; i < 10; ++i) {
    const auto ep = roll(ProblemKind::Tsp, 5, 100 + static_cast<std::uint64_t>(i), rng);
    buf.push_episode(ep.instance, ep.actions);
    expect += ep.actions.size();
  }
  CHECK(buf.size() == expect);
  CHECK(buf.episode_count() == 10);
  CHECK(buf.pushed_transitions() == expect);
}

TEST_CASE("eviction drops whole episodes from the front") {
  util::Rng rng(2);
  // TSP n=4 episodes have exactly 4 transitions; capacity holds 3 episodes.
  ReplayBuffer buf(12);
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < 3; ++i) {
    const auto ep = roll(ProblemKind::Tsp, 4, 200 + static_cast<std::uint64_t>(i), rng);
    ids.push_back(buf.push_episode(ep.instance, ep.actions));
  }
  CHECK(buf.size() == 12);
  const auto ep = roll(ProblemKind::Tsp, 4, 299, rng);
  ids.push_back(buf.push_episode(ep.instance, ep.actions));
  CHECK(buf.size() == 12);  // one evicted, one added
  CHECK(buf.episode_count() == 3);
  CHECK_THROWS_AS(buf.actions_of(ids[0]), std::out_of_range);
  CHECK_NOTHROW(buf.actions_of(ids[1]));
  CHECK_NOTHROW(buf.actions_of(ids[3]));
}

TEST_CASE("degenerate pushes are rejected") {
  ReplayBuffer buf(4);
  CHECK_THROWS_AS(buf.push_episode(nullptr, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(buf.push_episode(make(ProblemKind::Tsp, 4, 1), {}), std::invalid_argument);
  // An episode longer than the whole buffer can never be held.
  util::Rng rng(3);
  const auto ep = roll(ProblemKind::Tsp, 8, 300, rng);
  CHECK_THROWS_AS(buf.push_episode(ep.instance, ep.actions), std::invalid_argument);
}

TEST_CASE("materialized transitions replay the environment exactly") {
  util::Rng rng(4);
  const auto ep = roll(ProblemKind::Sdvrp, 6, 400, rng);
  ReplayBuffer buf(1000);
  const auto id = buf.push_episode(ep.instance, ep.actions);

  // Direct environment replay as the reference.
  auto s = env::reset(ep.instance);
  for (std::size_t t = 0; t < ep.actions.size(); ++t) {
    const auto ref1 = buf.materialize({id, static_cast<int>(t)});
    const auto ref2 = buf.materialize({id, static_cast<int>(t)});
    const auto r = env::step(s, ep.actions[t]);

    CHECK(ref1.action == ep.actions[t]);
    CHECK(ref1.reward == ep.rewards[t]);
    CHECK(ref1.reward == r.reward);
    CHECK(ref1.terminal == r.state.terminal);
    CHECK(ref1.state.sequence == s.sequence);
    CHECK(ref1.state.capacity_units == s.capacity_units);
    CHECK(ref1.state.remaining_units == s.remaining_units);
    CHECK(ref1.next_state.sequence == r.state.sequence);
    CHECK(ref1.next_state.visited == r.state.visited);
    // Bit-identical across repeated materializations.
    CHECK(ref1.reward == ref2.reward);
    CHECK(ref1.state.sequence == ref2.state.sequence);
    CHECK(ref1.next_state.remaining_units == ref2.next_state.remaining_units);
    s = r.state;
  }
  CHECK_THROWS_AS(buf.materialize({id, static_cast<int>(ep.actions.size())}),
                  std::out_of_range);
  CHECK_THROWS_AS(buf.materialize({id + 999, 0}), std::out_of_range);
}

TEST_CASE("samples always reference held transitions") {
  util::Rng roll_rng(5);
  ReplayBuffer buf(64);
  std::set<std::uint64_t> live;
  for (int i = 0; i < 12; ++i) {
    const auto ep = roll(ProblemKind::Cvrp, 5, 500 + static_cast<std::uint64_t>(i), roll_rng);
    live.insert(buf.push_episode(ep.instance, ep.actions));
  }
  util::Rng rng(6);
  for (int k = 0; k < 64; ++k) {
    const SampleRef ref = buf.sample_ref(rng);
    const auto& actions = buf.actions_of(ref.episode_id);  // throws if evicted
    CHECK(ref.t >= 0);
    CHECK(ref.t < static_cast<int>(actions.size()));
  }
  CHECK(buf.sampled_transitions() == 64);
}

TEST_CASE("sampling is reproducible from the seed") {
  util::Rng roll_rng(7);
  ReplayBuffer a(256), b(256);
  for (int i = 0; i < 8; ++i) {
    const auto ep = roll(ProblemKind::Tsp, 6, 700 + static_cast<std::uint64_t>(i), roll_rng);
    a.push_episode(ep.instance, ep.actions);
    b.push_episode(ep.instance, ep.actions);
  }
  util::Rng r1(util::derive_seed(42, 1)), r2(util::derive_seed(42, 1));
  for (int k = 0; k < 200; ++k) {
    const auto s1 = a.sample_ref(r1);
    const auto s2 = b.sample_ref(r2);
    CHECK(s1.episode_id == s2.episode_id);
    CHECK(s1.t == s2.t);
  }
}

TEST_CASE("sampling is uniform over held transitions") {
  // 10 single-transition episodes: TSP n=2 has exactly 2 transitions, so use
  // 5 episodes of n=2 for 10 slots keyed by (episode, t).
  util::Rng roll_rng(8);
  ReplayBuffer buf(1000);
  for (int i = 0; i < 5; ++i) {
    const auto ep = roll(ProblemKind::Tsp, 2, 800 + static_cast<std::uint64_t>(i), roll_rng);
    REQUIRE(ep.actions.size() == 2);
    buf.push_episode(ep.instance, ep.actions);
  }
  REQUIRE(buf.size() == 10);

  util::Rng rng(9);
  std::map<std::pair<std::uint64_t, int>, long> counts;
  const long draws = 100000;
  for (long k = 0; k < draws; ++k) {
    const auto ref = buf.sample_ref(rng);
    ++counts[{ref.episode_id, ref.t}];
  }
  CHECK(counts.size() == 10);
  const double p = 0.1;
  const double expect = draws * p;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (const auto& [key, c] : counts) {
    CAPTURE(key.first);
    CAPTURE(key.second);
    CHECK(std::abs(c - expect) <= 3.0 * sigma);
  }
}

TEST_CASE("memory accounting stays proportional to contents") {
  util::Rng rng(10);
  ReplayBuffer buf(100000);
  CHECK(buf.approx_bytes() == 0);
  std::size_t after_100 = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto ep = roll(ProblemKind::Tsp, 10, 900 + static_cast<std::uint64_t>(i), rng);
    buf.push_episode(ep.instance, ep.actions);
    if (i == 99) after_100 = buf.approx_bytes();
  }
  const std::size_t after_1000 = buf.approx_bytes();
  CHECK(after_100 > 0);
  // Ten times the episodes costs about ten times the bytes: the accounting
  // carries no per-sample state and no quadratic term.
  CHECK(after_1000 >= 8 * after_100);
  CHECK(after_1000 <= 12 * after_100);
  // And the per-transition cost is small: instance + visit list only.
  CHECK(after_1000 / buf.size() < 1024);
}
