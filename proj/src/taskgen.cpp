#include "cotd/taskgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "cotd/random.hpp"

namespace cotd::taskgen {
namespace {

struct Layout {
  std::vector<std::size_t> parent;
  std::vector<std::size_t> level_begin;
};

Layout build_layout(const Degrees& profile) {
  if (profile.empty()) throw std::invalid_argument("tree profile must have at least one level");
  Layout out;
  out.level_begin.push_back(0);
  out.level_begin.push_back(1);
  std::size_t width = 1;
  for (std::uint32_t m : profile) {
    if (m < 1) throw std::invalid_argument("tree degrees must be >= 1");
    if (width > kMaxTreeNodes / m) throw std::length_error("tree is too large");
    width *= m;
    if (out.level_begin.back() + width > kMaxTreeNodes) throw std::length_error("tree is too large");
    out.level_begin.push_back(out.level_begin.back() + width);
  }
  out.parent.assign(out.level_begin.back(), 0);
  for (std::size_t level = 1; level <= profile.size(); ++level) {
    const std::size_t m = profile[level - 1];
    for (std::size_t node = out.level_begin[level]; node < out.level_begin[level + 1]; ++node) {
      out.parent[node] = out.level_begin[level - 1] + (node - out.level_begin[level]) / m;
    }
  }
  return out;
}

std::vector<int> parities(const Layout& layout, std::span<const EdgeOp> ops) {
  std::vector<int> par(layout.parent.size(), 0);
  for (std::size_t node = 1; node < par.size(); ++node) {
    par[node] = par[layout.parent[node]] ^ static_cast<int>(ops[node - 1]);
  }
  return par;
}

std::size_t parse_index(std::string_view digits) {
  std::size_t value = 0;
  const auto* end = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(digits.data(), end, value);
  if (digits.empty() || ec != std::errc{} || ptr != end) {
    throw std::invalid_argument("malformed node label");
  }
  return value;
}

}  // namespace

std::string_view to_string(EdgeOp op) { return op == EdgeOp::identity ? "ID" : "NOT"; }

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::direct: return "direct";
    case Mode::reasoning: return "reasoning";
    case Mode::thinking: return "thinking";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  if (text == "direct") return Mode::direct;
  if (text == "reasoning") return Mode::reasoning;
  if (text == "thinking") return Mode::thinking;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

// -- ReasoningTree ---------------------------------------------------------

ReasoningTree::ReasoningTree(Degrees profile, std::vector<double> w, std::vector<EdgeOp> ops)
    : profile_(std::move(profile)), w_(std::move(w)), ops_(std::move(ops)) {
  auto layout = build_layout(profile_);
  parent_ = std::move(layout.parent);
  level_begin_ = std::move(layout.level_begin);
  if (ops_.size() + 1 != parent_.size()) {
    throw std::invalid_argument(fmt::format("expected {} edge ops, got {}", parent_.size() - 1,
                                            ops_.size()));
  }
  if (w_.empty()) throw std::invalid_argument("context dimension must be >= 1");
  double norm2 = 0.0;
  for (double x : w_) {
    if (!std::isfinite(x)) throw std::invalid_argument("reference vector must be finite");
    norm2 += x * x;
  }
  if (norm2 == 0.0) throw std::invalid_argument("reference vector must be non-zero");
  // Already-unit vectors (e.g. reloaded descriptors) are kept bit for bit.
  if (std::abs(norm2 - 1.0) > 1e-12) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : w_) x *= inv;
  }
}

ReasoningTree ReasoningTree::generate(Degrees profile, std::size_t context_dim,
                                      std::uint64_t seed) {
  if (context_dim < 1) throw std::invalid_argument("context dimension must be >= 1");
  const auto layout = build_layout(profile);
  Rng w_rng = Rng::for_purpose(seed, "taskgen.tree.w");
  auto w = uniform_on_sphere(w_rng, context_dim);
  Rng op_rng = Rng::for_purpose(seed, "taskgen.tree.ops");
  std::vector<EdgeOp> ops(layout.parent.size() - 1);
  for (auto& op : ops) op = op_rng.coin() ? EdgeOp::negate : EdgeOp::identity;
  return ReasoningTree(std::move(profile), std::move(w), std::move(ops));
}

ReasoningTree ReasoningTree::from_parts(Degrees profile, std::vector<double> w,
                                        std::vector<EdgeOp> ops) {
  return ReasoningTree(std::move(profile), std::move(w), std::move(ops));
}

std::size_t ReasoningTree::level_of(std::size_t node) const {
  if (node >= node_count()) throw std::out_of_range("node index out of range");
  const auto it = std::upper_bound(level_begin_.begin(), level_begin_.end(), node);
  return static_cast<std::size_t>(it - level_begin_.begin()) - 1;
}

bool ReasoningTree::is_constant_degree() const {
  return std::all_of(profile_.begin(), profile_.end(),
                     [&](std::uint32_t m) { return m == profile_.front(); });
}

std::string ReasoningTree::label(std::size_t node) const {
  if (node >= node_count()) throw std::out_of_range("node index out of range");
  return node == 0 ? std::string(".") : "X" + std::to_string(node);
}

std::optional<std::size_t> ReasoningTree::find(std::string_view label) const {
  if (label.size() < 2 || label.front() != 'X') return std::nullopt;
  try {
    const std::size_t idx = parse_index(label.substr(1));
    if (idx >= 1 && idx < node_count()) return idx;
  } catch (const std::invalid_argument&) {
  }
  return std::nullopt;
}

std::vector<std::size_t> ReasoningTree::path(std::size_t node) const {
  if (node >= node_count()) throw std::out_of_range("node index out of range");
  std::vector<std::size_t> out;
  for (std::size_t cur = node; cur != 0; cur = parent_[cur]) out.push_back(cur);
  std::reverse(out.begin(), out.end());
  return out;
}

int ReasoningTree::path_parity(std::size_t node) const {
  if (node >= node_count()) throw std::out_of_range("node index out of range");
  int parity = 0;
  for (std::size_t cur = node; cur != 0; cur = parent_[cur]) {
    parity ^= static_cast<int>(ops_[cur - 1]);
  }
  return parity;
}

int root_bit(const ReasoningTree& tree, std::span<const double> v) {
  if (v.size() != tree.context_dim()) {
    throw std::invalid_argument(fmt::format("context has {} components, tree expects {}",
                                            v.size(), tree.context_dim()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * tree.w()[i];
  return dot > 0.0 ? 1 : 0;
}

int node_value(const ReasoningTree& tree, std::span<const double> v, std::size_t node) {
  int bit = root_bit(tree, v);
  for (std::size_t n : tree.path(node)) {
    if (tree.op(n) == EdgeOp::negate) bit ^= 1;
  }
  return bit;
}

int node_value(const ReasoningTree& tree, std::span<const double> v, std::string_view label) {
  const auto node = tree.find(label);
  if (!node) throw std::out_of_range("unknown node '" + std::string(label) + "'");
  return node_value(tree, v, *node);
}

// -- samples ---------------------------------------------------------------

std::string format_context(std::span<const double> v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt::format("{:.6f}", v[i]);
  }
  out += ']';
  return out;
}

namespace {

std::string input_text_for(std::span<const double> v, std::string_view target) {
  return format_context(v) + " Target: " + std::string(target);
}

}  // namespace

Sample render_sample(const ReasoningTree& tree, std::span<const double> v,
                     std::string_view target_leaf, Mode mode) {
  const auto leaf = tree.find(target_leaf);
  if (!leaf) throw std::out_of_range("unknown node '" + std::string(target_leaf) + "'");
  if (!tree.is_leaf(*leaf)) {
    throw std::invalid_argument("target '" + std::string(target_leaf) + "' is not a leaf");
  }
  if (mode == Mode::thinking) {
    throw std::invalid_argument("thinking samples need an augmented tree");
  }
  Sample s;
  s.v.assign(v.begin(), v.end());
  s.target = std::string(target_leaf);
  s.mode = mode;
  s.input_text = input_text_for(v, target_leaf);

  int bit = root_bit(tree, v);
  std::string trace;
  for (std::size_t n : tree.path(*leaf)) {
    if (tree.op(n) == EdgeOp::negate) bit ^= 1;
    if (mode == Mode::reasoning || n == *leaf) {
      if (!trace.empty()) trace += ' ';
      trace += tree.label(n) + '=' + static_cast<char>('0' + bit);
    }
  }
  s.output_text = std::move(trace);
  s.answer_bit = bit;
  return s;
}

namespace {

std::vector<double> draw_context(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void require_count(std::size_t count) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
}

}  // namespace

Dataset sample_dataset(const ReasoningTree& tree, std::size_t count, Mode mode,
                       std::uint64_t seed) {
  require_count(count);
  if (mode == Mode::thinking) {
    throw std::invalid_argument("thinking datasets need an augmented tree");
  }
  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::for_purpose(seed, "taskgen.sample", {i});
    const auto v = draw_context(rng, tree.context_dim());
    const std::size_t leaf = tree.first_leaf() + rng.below(tree.leaf_count());
    out.push_back(render_sample(tree, v, tree.label(leaf), mode));
  }
  return out;
}

std::vector<std::pair<std::string, int>> parse_trace(std::string_view text) {
  std::vector<std::pair<std::string, int>> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto item = text.substr(pos, end - pos);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 2 != item.size() ||
        (item.back() != '0' && item.back() != '1')) {
      throw std::invalid_argument("malformed trace item '" + std::string(item) + "'");
    }
    out.emplace_back(std::string(item.substr(0, eq)), item.back() - '0');
    pos = end + 1;
  }
  return out;
}

Degrees structure_profile(std::uint32_t m, std::uint32_t n, std::uint32_t k) {
  if (m < 1) throw std::invalid_argument("degree m must be >= 1");
  if (n < 1 || k < 1 || k > n) throw std::out_of_range("structure index k must be in [1, n]");
  std::uint64_t big = 1;
  for (std::uint32_t i = 0; i < n - k + 1; ++i) {
    big *= m;
    if (big > UINT32_MAX) throw std::overflow_error("structure degree overflows");
  }
  Degrees out(k - 1, m);
  out.push_back(static_cast<std::uint32_t>(big));
  out.insert(out.end(), n - k, 1u);
  return out;
}

std::size_t default_reasoning_dataset_size(std::uint32_t n) {
  return static_cast<std::size_t>(std::llround(15000.0 * std::pow(static_cast<double>(n), 0.7)));
}

// -- AugmentedTree ---------------------------------------------------------

std::size_t augmented_depth(double r, std::size_t n) {
  if (!(r >= 1.0) || !std::isfinite(r)) throw std::invalid_argument("depth factor r must be >= 1");
  const double rn = r * static_cast<double>(n);
  const double rounded = std::round(rn);
  if (std::abs(rn - rounded) > 1e-9) {
    throw std::invalid_argument(fmt::format("r * n = {} is not an integer", rn));
  }
  const auto depth = static_cast<std::size_t>(rounded);
  if (depth < n) throw std::invalid_argument("augmented depth must be >= base depth");
  return depth;
}

AugmentedTree::AugmentedTree(ReasoningTree base, ReasoningTree deep, double r,
                             std::vector<std::size_t> leaf_map)
    : base_(std::move(base)), deep_(std::move(deep)), r_(r), leaf_map_(std::move(leaf_map)) {}

namespace {

Degrees deep_profile_for(const ReasoningTree& base, double r) {
  if (!base.is_constant_degree()) {
    throw std::invalid_argument("thinking augmentation needs a constant-degree base tree");
  }
  return Degrees(augmented_depth(r, base.depth()), base.profile().front());
}

}  // namespace

AugmentedTree AugmentedTree::from_parts(ReasoningTree base, double r,
                                        std::vector<EdgeOp> deep_ops,
                                        std::vector<std::size_t> leaf_map) {
  auto profile = deep_profile_for(base, r);
  ReasoningTree deep = ReasoningTree::from_parts(std::move(profile), base.w(), std::move(deep_ops));
  if (leaf_map.size() != deep.leaf_count()) {
    throw std::invalid_argument(fmt::format("leaf map has {} entries, deep tree has {} leaves",
                                            leaf_map.size(), deep.leaf_count()));
  }
  for (std::size_t b : leaf_map) {
    if (b >= base.leaf_count()) throw std::out_of_range("leaf map names an unknown base leaf");
  }
  return AugmentedTree(std::move(base), std::move(deep), r, std::move(leaf_map));
}

std::size_t AugmentedTree::mapped_base_leaf(std::size_t deep_node) const {
  if (!deep_.is_leaf(deep_node)) throw std::invalid_argument("not a deep leaf");
  return base_.first_leaf() + leaf_map_[deep_node - deep_.first_leaf()];
}

std::vector<std::size_t> AugmentedTree::deep_leaves_for(std::size_t base_leaf_node) const {
  if (!base_.is_leaf(base_leaf_node)) throw std::invalid_argument("not a base leaf");
  const std::size_t ordinal = base_leaf_node - base_.first_leaf();
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < leaf_map_.size(); ++j) {
    if (leaf_map_[j] == ordinal) out.push_back(deep_.first_leaf() + j);
  }
  return out;
}

std::string AugmentedTree::label(std::size_t deep_node) const {
  if (deep_node == 0) return ".";
  if (deep_.is_leaf(deep_node)) return base_.label(mapped_base_leaf(deep_node));
  if (deep_node >= deep_.node_count()) throw std::out_of_range("node index out of range");
  return "Y" + std::to_string(deep_node);
}

void solve_final_ops(const ReasoningTree& base, const Degrees& deep_profile,
                     std::vector<EdgeOp>& deep_ops, std::span<const std::size_t> leaf_map) {
  const auto layout = build_layout(deep_profile);
  if (deep_ops.size() + 1 != layout.parent.size()) {
    throw std::invalid_argument("deep op count does not match the deep profile");
  }
  const std::size_t first_leaf = layout.level_begin[deep_profile.size()];
  if (leaf_map.size() != layout.parent.size() - first_leaf) {
    throw std::invalid_argument("leaf map size does not match the deep leaf count");
  }
  // Parities of internal nodes do not depend on final-level ops.
  const auto par = parities(layout, deep_ops);
  for (std::size_t j = 0; j < leaf_map.size(); ++j) {
    const std::size_t leaf = first_leaf + j;
    const int want = base.path_parity(base.first_leaf() + leaf_map[j]);
    deep_ops[leaf - 1] = static_cast<EdgeOp>(par[layout.parent[leaf]] ^ want);
  }
}

AugmentedTree augment_tree(const ReasoningTree& base, double r, std::uint64_t seed) {
  const Degrees profile = deep_profile_for(base, r);
  if (profile.size() == base.depth()) {
    std::vector<std::size_t> identity(base.leaf_count());
    for (std::size_t j = 0; j < identity.size(); ++j) identity[j] = j;
    return AugmentedTree::from_parts(base, r, base.ops(), std::move(identity));
  }

  const auto layout = build_layout(profile);
  const std::size_t first_leaf = layout.level_begin[profile.size()];
  const std::size_t deep_leaves = layout.parent.size() - first_leaf;
  const std::size_t base_leaves = base.leaf_count();

  Rng op_rng = Rng::for_purpose(seed, "taskgen.augment.ops");
  std::vector<EdgeOp> ops(layout.parent.size() - 1, EdgeOp::identity);
  for (std::size_t node = 1; node < first_leaf; ++node) {
    ops[node - 1] = op_rng.coin() ? EdgeOp::negate : EdgeOp::identity;
  }

  // Balanced: every base leaf gets floor or ceil of deep/base deep leaves.
  std::vector<std::size_t> leaf_map(deep_leaves);
  for (std::size_t j = 0; j < deep_leaves; ++j) leaf_map[j] = j % base_leaves;
  Rng map_rng = Rng::for_purpose(seed, "taskgen.augment.leaf_map");
  map_rng.shuffle(leaf_map);

  solve_final_ops(base, profile, ops, leaf_map);
  return AugmentedTree::from_parts(base, r, std::move(ops), std::move(leaf_map));
}

ConsistencyReport verify_consistency(const AugmentedTree& aug) {
  const auto& deep = aug.deep();
  const auto& base = aug.base();
  for (int b = 0; b <= 1; ++b) {
    for (std::size_t leaf = deep.first_leaf(); leaf < deep.node_count(); ++leaf) {
      const int deep_bit = b ^ deep.path_parity(leaf);
      const int base_bit = b ^ base.path_parity(aug.mapped_base_leaf(leaf));
      if (deep_bit != base_bit) {
        return {false, ConsistencyViolation{leaf, b, deep_bit, base_bit}};
      }
    }
  }
  return {};
}

Sample render_thinking_sample(const AugmentedTree& aug, std::span<const double> v,
                              std::size_t deep_leaf) {
  const auto& deep = aug.deep();
  if (!deep.is_leaf(deep_leaf)) throw std::invalid_argument("thinking path must end at a deep leaf");
  Sample s;
  s.v.assign(v.begin(), v.end());
  s.mode = Mode::thinking;
  s.target = aug.label(deep_leaf);
  s.input_text = input_text_for(v, s.target);
  int bit = root_bit(deep, v);
  std::string trace;
  for (std::size_t n : deep.path(deep_leaf)) {
    if (deep.op(n) == EdgeOp::negate) bit ^= 1;
    if (!trace.empty()) trace += ' ';
    trace += aug.label(n) + '=' + static_cast<char>('0' + bit);
  }
  s.output_text = std::move(trace);
  s.answer_bit = bit;
  return s;
}

Dataset sample_thinking_dataset(const AugmentedTree& aug, std::size_t count, std::uint64_t seed) {
  require_count(count);
  const auto& base = aug.base();
  std::vector<std::vector<std::size_t>> paths(base.leaf_count());
  for (std::size_t j = 0; j < paths.size(); ++j) {
    paths[j] = aug.deep_leaves_for(base.first_leaf() + j);
    if (paths[j].empty()) {
      throw std::logic_error("base leaf " + base.label(base.first_leaf() + j) +
                             " has no deep leaves");
    }
  }
  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::for_purpose(seed, "taskgen.thinking_sample", {i});
    const auto v = draw_context(rng, base.context_dim());
    const auto& choices = paths[rng.below(paths.size())];
    out.push_back(render_thinking_sample(aug, v, choices[rng.below(choices.size())]));
  }
  return out;
}

}  // namespace cotd::taskgen
