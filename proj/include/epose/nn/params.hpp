#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "epose/nn/mat.hpp"
#include "epose/routing/types.hpp"

namespace epose::nn {

struct NetConfig {
  int embed_dim = 128;
  int encoder_layers = 3;
  int heads = 8;
  int ff_dim = 512;
  double clip_c = 10.0;
  int critic_layers = 3;
  int critic_hidden = 128;

  void validate() const;  // throws std::invalid_argument
  bool operator==(const NetConfig&) const = default;
};

// Parameter groups. Policy covers encoder, decoder and the state-value
// critic; Q groups each own an encoder plus compatibility head; targets are
// shape-identical copies of their online group.
enum class Group : std::uint8_t { Policy, Q1, Q2, Q1Target, Q2Target, Alpha };

struct ParamEntry {
  std::string name;
  Mat value;
  Group group;
  bool trainable;  // false for batch-norm running statistics
};

class ParameterSet {
 public:
  // Fresh parameters: weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
  // batch-norm affine at identity, running stats at (0, 1). Target groups
  // start as hard copies of their online group.
  static ParameterSet build(const NetConfig& cfg, routing::ProblemKind kind,
                            std::uint64_t init_seed, double log_alpha_init);

  int index_of(std::string_view name) const;  // -1 when missing
  int require(std::string_view name) const;   // throws when missing

  Mat& value(int idx) { return entries_[static_cast<std::size_t>(idx)].value; }
  const Mat& value(int idx) const { return entries_[static_cast<std::size_t>(idx)].value; }
  const ParamEntry& entry(int idx) const { return entries_[static_cast<std::size_t>(idx)]; }
  std::size_t size() const { return entries_.size(); }

  // Entry indices of a group, in declaration order.
  const std::vector<int>& group_indices(Group g) const;
  // Trainable subset of a group, in declaration order.
  std::vector<int> trainable_indices(Group g) const;

  double log_alpha() const;
  void set_log_alpha(double v);
  double alpha() const;

  routing::ProblemKind kind() const { return kind_; }
  const NetConfig& config() const { return cfg_; }

  // Copies every array of `from` onto `to` (shapes must match pairwise).
  void hard_copy_group(Group from, Group to);
  // target <- eta * online + (1 - eta) * target, elementwise over both
  // online/target pairs (Q1->Q1Target, Q2->Q2Target).
  void soft_update_targets(double eta);

  bool operator==(const ParameterSet& o) const;

 private:
  int add(std::string name, int rows, int cols, Group g, bool trainable);

  routing::ProblemKind kind_ = routing::ProblemKind::Tsp;
  NetConfig cfg_;
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, int> by_name_;
  std::vector<std::vector<int>> by_group_;

  friend ParameterSet load_checkpoint(const std::string& path);
};

// Binary checkpoint: magic/version, kind, NetConfig, then a self-describing
// array table (name, rank, dims) followed by all payloads as little-endian
// float32 in declaration order. save(load(x)) is byte-identical.
void save_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::string& path);

}  // namespace epose::nn
