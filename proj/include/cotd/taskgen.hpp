#pragma once

// Synthetic logical-deduction tasks: a tree whose root bit is 1[v . w > 0]
// and whose edges apply IDENTITY or NOT, serialized for direct, reasoning
// and thinking (redundant deeper tree) supervision.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cotd::taskgen {

enum class EdgeOp : std::uint8_t { identity = 0, negate = 1 };
enum class Mode { direct, reasoning, thinking };

std::string_view to_string(EdgeOp op);
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Integer per-level degrees of a task tree.
using Degrees = std::vector<std::uint32_t>;

/// Upper bound on the number of nodes a generated tree may have.
inline constexpr std::size_t kMaxTreeNodes = 1u << 26;

/// Task tree stored breadth first. Node 0 is the unlabeled root; node i >= 1
/// is labeled X<i>, so the children of X1 come before the children of X2.
class ReasoningTree {
 public:
  /// Random tree: w uniform on the unit sphere, each edge op a fair coin.
  static ReasoningTree generate(Degrees profile, std::size_t context_dim, std::uint64_t seed);

  /// Tree with explicit reference vector and ops. ops[i] belongs to the edge
  /// into node i + 1. w is normalized.
  static ReasoningTree from_parts(Degrees profile, std::vector<double> w,
                                  std::vector<EdgeOp> ops);

  const Degrees& profile() const { return profile_; }
  std::size_t depth() const { return profile_.size(); }
  std::size_t context_dim() const { return w_.size(); }
  const std::vector<double>& w() const { return w_; }
  const std::vector<EdgeOp>& ops() const { return ops_; }

  std::size_t node_count() const { return parent_.size(); }
  /// First node index on a level (level 0 is the root).
  std::size_t level_begin(std::size_t level) const { return level_begin_[level]; }
  std::size_t level_size(std::size_t level) const {
    return level_begin_[level + 1] - level_begin_[level];
  }
  std::size_t level_of(std::size_t node) const;
  std::size_t leaf_count() const { return level_size(depth()); }
  std::size_t first_leaf() const { return level_begin(depth()); }
  bool is_leaf(std::size_t node) const { return node >= first_leaf() && node < node_count(); }

  std::size_t parent(std::size_t node) const { return parent_.at(node); }
  EdgeOp op(std::size_t node) const { return ops_.at(node - 1); }
  bool is_constant_degree() const;

  /// "X<i>"; the root has no label and yields ".".
  std::string label(std::size_t node) const;
  std::optional<std::size_t> find(std::string_view label) const;

  /// Nodes from level 1 down to node (root excluded).
  std::vector<std::size_t> path(std::size_t node) const;
  /// Parity of NOT edges on the root-to-node path.
  int path_parity(std::size_t node) const;

 private:
  ReasoningTree(Degrees profile, std::vector<double> w, std::vector<EdgeOp> ops);

  Degrees profile_;
  std::vector<double> w_;
  std::vector<EdgeOp> ops_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> level_begin_;
};

/// 1[v . w > 0]; v . w == 0 maps to 0.
int root_bit(const ReasoningTree& tree, std::span<const double> v);

/// Bit of a node by propagating ops from the root.
int node_value(const ReasoningTree& tree, std::span<const double> v, std::size_t node);
int node_value(const ReasoningTree& tree, std::span<const double> v, std::string_view label);

struct Sample {
  std::vector<double> v;
  std::string target;
  Mode mode = Mode::direct;
  std::string input_text;
  std::string output_text;
  int answer_bit = 0;
};

using Dataset = std::vector<Sample>;

/// "[c1,c2,...]" with six fractional digits per component.
std::string format_context(std::span<const double> v);

Sample render_sample(const ReasoningTree& tree, std::span<const double> v,
                     std::string_view target_leaf, Mode mode);

/// count samples with v uniform in [-1, 1]^dim and uniform target leaves.
/// Sample i draws from its own stream, so any index range can be produced
/// independently. Mode must be direct or reasoning.
Dataset sample_dataset(const ReasoningTree& tree, std::size_t count, Mode mode,
                       std::uint64_t seed);

/// Splits "A=0 B=1" into {("A",0), ("B",1)}. Throws on malformed text.
std::vector<std::pair<std::string, int>> parse_trace(std::string_view output_text);

/// [m] x (k-1) ++ [m^(n-k+1)] ++ [1] x (n-k); k = n is the balanced tree.
Degrees structure_profile(std::uint32_t m, std::uint32_t n, std::uint32_t k);

/// Default training-set size for a reasoning task of depth n (15000 n^0.7).
std::size_t default_reasoning_dataset_size(std::uint32_t n);
inline constexpr std::size_t kDefaultThinkingDatasetSize = 50'000;

// -- thinking trees --------------------------------------------------------

/// Deeper tree of the same degree whose leaves are mapped many-to-one onto
/// the leaves of a base tree. Internal deep nodes are labeled Y<i>
/// (breadth first); a deep leaf carries the label of its base leaf.
class AugmentedTree {
 public:
  /// deep_ops[i] belongs to the edge into deep node i + 1; leaf_map[j] is the
  /// base-leaf ordinal (0-based among base leaves) of deep leaf j. No
  /// consistency is enforced here; see verify_consistency.
  static AugmentedTree from_parts(ReasoningTree base, double r, std::vector<EdgeOp> deep_ops,
                                  std::vector<std::size_t> leaf_map);

  const ReasoningTree& base() const { return base_; }
  const ReasoningTree& deep() const { return deep_; }
  double r() const { return r_; }
  std::size_t deep_depth() const { return deep_.depth(); }
  const std::vector<std::size_t>& leaf_map() const { return leaf_map_; }

  /// Base-tree node index of the base leaf that deep leaf `deep_node` maps to.
  std::size_t mapped_base_leaf(std::size_t deep_node) const;
  /// Deep leaf nodes mapped to a base leaf node.
  std::vector<std::size_t> deep_leaves_for(std::size_t base_leaf_node) const;

  std::string label(std::size_t deep_node) const;

 private:
  AugmentedTree(ReasoningTree base, ReasoningTree deep, double r,
                std::vector<std::size_t> leaf_map);

  ReasoningTree base_;
  ReasoningTree deep_;
  double r_;
  std::vector<std::size_t> leaf_map_;
};

/// Depth r * n as an integer, or throws std::invalid_argument when r * n is
/// not (within 1e-9) a whole number >= n.
std::size_t augmented_depth(double r, std::size_t n);

/// Sets the op of every final-level deep edge so that each deep leaf has the
/// same path parity as its mapped base leaf.
void solve_final_ops(const ReasoningTree& base, const Degrees& deep_profile,
                     std::vector<EdgeOp>& deep_ops, std::span<const std::size_t> leaf_map);

/// Builds the depth r*n tree: random ops above the last level, a balanced
/// shuffled leaf map, then solved final-level ops. r = 1 copies the base
/// tree with the identity map.
AugmentedTree augment_tree(const ReasoningTree& base, double r, std::uint64_t seed);

struct ConsistencyViolation {
  std::size_t deep_leaf;  ///< deep node index
  int root_bit;
  int deep_bit;
  int base_bit;
};

struct ConsistencyReport {
  bool consistent = true;
  std::optional<ConsistencyViolation> counterexample;
};

/// Checks every deep leaf against its base leaf for both root bits. Leaf
/// bits depend on v only through the root bit, so this is exhaustive.
ConsistencyReport verify_consistency(const AugmentedTree& aug);

/// Thinking sample for a given deep path (deep leaf node).
Sample render_thinking_sample(const AugmentedTree& aug, std::span<const double> v,
                              std::size_t deep_leaf);

/// Uniform base target, then a uniform deep path among those mapped to it.
Dataset sample_thinking_dataset(const AugmentedTree& aug, std::size_t count, std::uint64_t seed);

// -- serialization ---------------------------------------------------------

/// One JSON object per sample: v, target, mode, input_text, output_text,
/// answer_bit.
void write_jsonl(std::ostream& out, const Dataset& data);
/// Reads samples back, skipping blank lines and lines starting with '#'.
Dataset read_jsonl(std::istream& in);

/// Plain-text tree descriptor (profile, w, edges with ops).
void write_tree(std::ostream& out, const ReasoningTree& tree);
ReasoningTree read_tree(std::istream& in);

/// Augmented descriptor: r, the base tree, deep edges and the leaf map.
void write_augmented(std::ostream& out, const AugmentedTree& aug);
AugmentedTree read_augmented(std::istream& in);

}  // namespace cotd::taskgen
