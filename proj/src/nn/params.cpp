#include "epose/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "epose/util/rng.hpp"

namespace epose::nn {

using routing::ProblemKind;

void NetConfig::validate() const {
  if (embed_dim <= 0 || encoder_layers <= 0 || heads <= 0 || ff_dim <= 0 ||
      critic_layers <= 0 || critic_hidden <= 0)
    throw std::invalid_argument("NetConfig: dimensions must be positive");
  if (embed_dim % heads != 0)
    throw std::invalid_argument("NetConfig: embed_dim must be divisible by heads");
  if (clip_c <= 0.0) throw std::invalid_argument("NetConfig: clip_c must be positive");
}

int ParameterSet::add(std::string name, int rows, int cols, Group g, bool trainable) {
  const int idx = static_cast<int>(entries_.size());
  by_name_.emplace(name, idx);
  by_group_[static_cast<std::size_t>(g)].push_back(idx);
  entries_.push_back(ParamEntry{std::move(name), Mat(rows, cols), g, trainable});
  return idx;
}

namespace {

// Context width for the decoder / Q heads: TSP packs [graph, first, last],
// VRP packs [graph, last, remaining-capacity].
int context_dim(const NetConfig& cfg, ProblemKind kind) {
  return kind == ProblemKind::Tsp ? 3 * cfg.embed_dim : 2 * cfg.embed_dim + 1;
}

void add_encoder_layer(ParameterSet& p, const std::string& prefix, int l, int d, int ff,
                       Group g, const std::function<int(std::string, int, int, bool)>& add) {
  const std::string base = prefix + "enc" + std::to_string(l) + "/";
  add(base + "attn/Wq", d, d, true);
  add(base + "attn/Wk", d, d, true);
  add(base + "attn/Wv", d, d, true);
  add(base + "attn/Wo", d, d, true);
  add(base + "bn1/gamma", 1, d, true);
  add(base + "bn1/beta", 1, d, true);
  add(base + "bn1/run_mean", 1, d, false);
  add(base + "bn1/run_var", 1, d, false);
  add(base + "ff/W1", d, ff, true);
  add(base + "ff/b1", 1, ff, true);
  add(base + "ff/W2", ff, d, true);
  add(base + "ff/b2", 1, d, true);
  add(base + "bn2/gamma", 1, d, true);
  add(base + "bn2/beta", 1, d, true);
  add(base + "bn2/run_mean", 1, d, false);
  add(base + "bn2/run_var", 1, d, false);
  (void)g;
}

}  // namespace

ParameterSet ParameterSet::build(const NetConfig& cfg, ProblemKind kind,
                                 std::uint64_t init_seed, double log_alpha_init) {
  cfg.validate();
  ParameterSet p;
  p.kind_ = kind;
  p.cfg_ = cfg;
  p.by_group_.resize(6);

  const int d = cfg.embed_dim;
  const bool vrp = kind != ProblemKind::Tsp;
  const int in_dim = vrp ? 3 : 2;
  const int ctx = context_dim(cfg, kind);

  auto add_group = [&](Group g, const std::string& prefix, bool is_policy) {
    auto add = std::function<int(std::string, int, int, bool)>(
        [&p, g](std::string name, int rows, int cols, bool trainable) {
          return p.add(std::move(name), rows, cols, g, trainable);
        });

    add(prefix + "embed/W", in_dim, d, true);
    add(prefix + "embed/b", 1, d, true);
    if (vrp) {
      add(prefix + "embed_depot/W", 2, d, true);
      add(prefix + "embed_depot/b", 1, d, true);
    }
    const int layers = is_policy ? cfg.encoder_layers : cfg.critic_layers;
    for (int l = 0; l < layers; ++l)
      add_encoder_layer(p, prefix, l, d, cfg.ff_dim, g, add);

    if (is_policy) {
      add(prefix + "dec/Wq_ctx", ctx, d, true);
      add(prefix + "dec/Wk_g", d, d, true);
      add(prefix + "dec/Wv_g", d, d, true);
      add(prefix + "dec/Wo_g", d, d, true);
      add(prefix + "dec/Wk_p", d, d, true);
      if (!vrp) {
        add(prefix + "dec/first_ph", 1, d, true);
        add(prefix + "dec/last_ph", 1, d, true);
      }
      add(prefix + "vcrit/visited", 1, d, true);
      for (int l = 0; l < cfg.critic_layers; ++l)
        add_encoder_layer(p, prefix + "vcrit/", l, d, cfg.ff_dim, g, add);
      add(prefix + "vcrit/head/W1", d, cfg.critic_hidden, true);
      add(prefix + "vcrit/head/b1", 1, cfg.critic_hidden, true);
      add(prefix + "vcrit/head/W2", cfg.critic_hidden, 1, true);
      add(prefix + "vcrit/head/b2", 1, 1, true);
    } else {
      add(prefix + "head/Wq_ctx", ctx, d, true);
      add(prefix + "head/Wk", d, d, true);
      if (!vrp) {
        add(prefix + "head/first_ph", 1, d, true);
        add(prefix + "head/last_ph", 1, d, true);
      }
    }
  };

  add_group(Group::Policy, "policy/", true);
  add_group(Group::Q1, "q1/", false);
  add_group(Group::Q2, "q2/", false);
  add_group(Group::Q1Target, "q1t/", false);
  add_group(Group::Q2Target, "q2t/", false);
  p.add("log_alpha", 1, 1, Group::Alpha, true);

  // Initialize in declaration order from one deterministic stream.
  util::Rng rng(util::derive_seed(init_seed, 0x70617261));
  for (auto& e : p.entries_) {
    const auto slash = e.name.rfind('/');
    const std::string leaf = slash == std::string::npos ? e.name : e.name.substr(slash + 1);
    if (leaf == "gamma" || leaf == "run_var") {
      for (auto& v : e.value.a) v = 1.0;
    } else if (leaf == "beta" || leaf == "run_mean") {
      // zeros
    } else if (e.name == "log_alpha") {
      e.value.a[0] = log_alpha_init;
    } else {
      // fan_in: weight rows; vectors (placeholders, biases, offsets) use the
      // embedding width.
      const int fan_in = e.value.rows > 1 ? e.value.rows : d;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : e.value.a) v = rng.uniform(-bound, bound);
    }
  }

  p.hard_copy_group(Group::Q1, Group::Q1Target);
  p.hard_copy_group(Group::Q2, Group::Q2Target);
  return p;
}

int ParameterSet::index_of(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? -1 : it->second;
}

int ParameterSet::require(std::string_view name) const {
  const int idx = index_of(name);
  if (idx < 0) throw std::logic_error("missing parameter: " + std::string(name));
  return idx;
}

const std::vector<int>& ParameterSet::group_indices(Group g) const {
  return by_group_[static_cast<std::size_t>(g)];
}

std::vector<int> ParameterSet::trainable_indices(Group g) const {
  std::vector<int> out;
  for (const int idx : group_indices(g))
    if (entries_[static_cast<std::size_t>(idx)].trainable) out.push_back(idx);
  return out;
}

double ParameterSet::log_alpha() const {
  return entries_[static_cast<std::size_t>(require("log_alpha"))].value.a[0];
}

void ParameterSet::set_log_alpha(double v) {
  entries_[static_cast<std::size_t>(require("log_alpha"))].value.a[0] = v;
}

double ParameterSet::alpha() const { return std::exp(log_alpha()); }

void ParameterSet::hard_copy_group(Group from, Group to) {
  const auto& src = group_indices(from);
  const auto& dst = group_indices(to);
  if (src.size() != dst.size()) throw std::logic_error("hard_copy_group: group size mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Mat& s = entries_[static_cast<std::size_t>(src[i])].value;
    Mat& t = entries_[static_cast<std::size_t>(dst[i])].value;
    if (!s.same_shape(t)) throw std::logic_error("hard_copy_group: shape mismatch");
    t.a = s.a;
  }
}

void ParameterSet::soft_update_targets(double eta) {
  const auto pairs = {std::pair{Group::Q1, Group::Q1Target},
                      std::pair{Group::Q2, Group::Q2Target}};
  for (const auto& [from, to] : pairs) {
    const auto& src = group_indices(from);
    const auto& dst = group_indices(to);
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Mat& s = entries_[static_cast<std::size_t>(src[i])].value;
      Mat& t = entries_[static_cast<std::size_t>(dst[i])].value;
      for (std::size_t k = 0; k < t.a.size(); ++k)
        t.a[k] = eta * s.a[k] + (1.0 - eta) * t.a[k];
    }
  }
}

bool ParameterSet::operator==(const ParameterSet& o) const {
  if (kind_ != o.kind_ || !(cfg_ == o.cfg_) || entries_.size() != o.entries_.size())
    return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto &a = entries_[i], &b = o.entries_[i];
    if (a.name != b.name || a.group != b.group || a.trainable != b.trainable ||
        a.value.rows != b.value.rows || a.value.cols != b.value.cols ||
        a.value.a != b.value.a)
      return false;
  }
  return true;
}

// --- checkpoint io -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint8_t>(params.kind()));
  const NetConfig& c = params.config();
  put(out, static_cast<std::int32_t>(c.embed_dim));
  put(out, static_cast<std::int32_t>(c.encoder_layers));
  put(out, static_cast<std::int32_t>(c.heads));
  put(out, static_cast<std::int32_t>(c.ff_dim));
  put(out, c.clip_c);
  put(out, static_cast<std::int32_t>(c.critic_layers));
  put(out, static_cast<std::int32_t>(c.critic_hidden));

  put(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamEntry& e = params.entry(static_cast<int>(i));
    put(out, static_cast<std::uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put(out, static_cast<std::uint8_t>(e.group));
    put(out, static_cast<std::uint8_t>(e.trainable ? 1 : 0));
    const Mat& m = e.value;
    std::uint8_t rank = 2;
    if (m.rows == 1 && m.cols == 1) rank = 0;
    else if (m.rows == 1) rank = 1;
    put(out, rank);
    if (rank == 1) put(out, static_cast<std::uint32_t>(m.cols));
    if (rank == 2) {
      put(out, static_cast<std::uint32_t>(m.rows));
      put(out, static_cast<std::uint32_t>(m.cols));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat& m = params.entry(static_cast<int>(i)).value;
    for (const double v : m.a) put(out, static_cast<float>(v));
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic: " + path);
  if (get<std::uint32_t>(in) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version");

  ParameterSet p;
  p.kind_ = static_cast<ProblemKind>(get<std::uint8_t>(in));
  p.cfg_.embed_dim = get<std::int32_t>(in);
  p.cfg_.encoder_layers = get<std::int32_t>(in);
  p.cfg_.heads = get<std::int32_t>(in);
  p.cfg_.ff_dim = get<std::int32_t>(in);
  p.cfg_.clip_c = get<double>(in);
  p.cfg_.critic_layers = get<std::int32_t>(in);
  p.cfg_.critic_hidden = get<std::int32_t>(in);
  p.cfg_.validate();

  const auto count = get<std::uint32_t>(in);
  p.by_group_.resize(6);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint16_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto group = static_cast<Group>(get<std::uint8_t>(in));
    const bool trainable = get<std::uint8_t>(in) != 0;
    const auto rank = get<std::uint8_t>(in);
    int rows = 1, cols = 1;
    if (rank == 1) cols = static_cast<int>(get<std::uint32_t>(in));
    else if (rank == 2) {
      rows = static_cast<int>(get<std::uint32_t>(in));
      cols = static_cast<int>(get<std::uint32_t>(in));
    } else if (rank != 0) {
      throw std::runtime_error("checkpoint: bad rank");
    }
    p.add(std::move(name), rows, cols, group, trainable);
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    Mat& m = p.value(static_cast<int>(i));
    for (auto& v : m.a) v = static_cast<double>(get<float>(in));
  }
  if (p.index_of("log_alpha") < 0) throw std::runtime_error("checkpoint: missing log_alpha");
  return p;
}

}  // namespace epose::nn
