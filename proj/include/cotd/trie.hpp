#pragma once

// Byte-level BPE, prefix tries over token sequences, and the branching
// statistics used to compare task degree with tokenized trace structure.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cotd::trie {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

/// Ids 0..base_size()-1 are single bytes in ascending byte order; merge i
/// creates id base_size() + i.
struct BpeTokenizer {
  std::vector<std::string> vocab;
  std::vector<std::pair<TokenId, TokenId>> merges;

  std::size_t base_size() const { return vocab.size() - merges.size(); }
  std::size_t size() const { return vocab.size(); }
};

/// Merges the most frequent adjacent pair (ties: smallest left bytes, then
/// smallest right bytes) until vocab_size tokens exist or the best pair
/// occurs fewer than min_pair_count times.
BpeTokenizer train_bpe(std::span<const std::string> corpus, std::size_t vocab_size,
                       std::size_t min_pair_count = 1);

/// Throws std::invalid_argument on a byte outside the base vocabulary.
TokenSeq encode(const BpeTokenizer& tok, std::string_view text);
std::string decode(const BpeTokenizer& tok, std::span<const TokenId> ids);

/// Tokenizer that maps every byte to its own token (no merges).
BpeTokenizer byte_tokenizer(std::span<const std::string> corpus);

/// Text format: header, base vocab as hex bytes, then merges as id pairs.
void write_tokenizer(std::ostream& out, const BpeTokenizer& tok);
BpeTokenizer read_tokenizer(std::istream& in);

class PrefixTrie {
 public:
  struct Node {
    std::map<TokenId, std::size_t> children;
    std::size_t count = 0;
    std::size_t depth = 0;
  };

  PrefixTrie();

  void insert(std::span<const TokenId> seq);

  const Node& root() const { return nodes_.front(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t node_count() const { return nodes_.size(); }
  /// Number of inserted sequences.
  std::size_t sequences() const { return root().count; }
  std::optional<std::size_t> find(std::span<const TokenId> prefix) const;

 private:
  std::vector<Node> nodes_;
};

PrefixTrie build_trie(std::span<const TokenSeq> sequences);

/// Branching over internal nodes (nodes with at least one child).
struct DegreeReport {
  double mean_degree = 0.0;
  double geo_mean_degree = 0.0;
  std::vector<double> per_depth;  ///< index = depth of the parent, root is 0
  std::size_t max_degree = 0;
  std::size_t internal_nodes = 0;
  std::size_t leaves = 0;
};

/// Throws std::invalid_argument when the trie has no edges.
DegreeReport degree_report(const PrefixTrie& trie);

struct TaskTrieOptions {
  std::uint32_t depth = 2;
  std::size_t vocab_size = 500;
  /// Traces per task; above this the traces are sampled without replacement.
  std::size_t trace_cap = 4096;
  std::size_t context_dim = 10;
  /// false: one token per byte (control run).
  bool tokenize = true;
};

struct TaskTrieRow {
  std::uint32_t task_degree = 0;
  std::size_t traces = 0;
  bool capped = false;
  DegreeReport report;
};

struct TaskTrieResult {
  std::vector<TaskTrieRow> rows;
  /// Spearman rank correlation of task degree vs trie mean degree; empty
  /// when it is undefined (fewer than two tasks or a constant column).
  std::optional<double> spearman;
};

/// Every trace (each leaf under both root bits) of a random depth-n tree
/// of degree m, rendered as reasoning output text.
std::vector<std::string> all_traces(std::uint32_t m, std::uint32_t n, std::size_t context_dim,
                                    std::uint64_t seed);

TaskTrieResult task_vs_trie_degree(std::span<const std::uint32_t> m_list,
                                   const TaskTrieOptions& opts, std::uint64_t seed);

/// CSV task_degree,trie_mean_degree,trie_geo_mean,depth,per_depth_mean with
/// one row per task and trie depth.
void write_degree_csv(std::ostream& out, const TaskTrieResult& result);

}  // namespace cotd::trie
