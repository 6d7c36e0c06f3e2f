#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cotd/trie.hpp"

namespace cotd::trie {

PrefixTrie::PrefixTrie() : nodes_(1) {}

void PrefixTrie::insert(std::span<const TokenId> seq) {
  std::size_t cur = 0;
  ++nodes_[cur].count;
  for (TokenId t : seq) {
    const auto it = nodes_[cur].children.find(t);
    std::size_t next;
    if (it == nodes_[cur].children.end()) {
      next = nodes_.size();
      const std::size_t depth = nodes_[cur].depth + 1;
      nodes_[cur].children.emplace(t, next);
      nodes_.push_back(Node{{}, 0, depth});
    } else {
      next = it->second;
    }
    cur = next;
    ++nodes_[cur].count;
  }
}

std::optional<std::size_t> PrefixTrie::find(std::span<const TokenId> prefix) const {
  std::size_t cur = 0;
  for (TokenId t : prefix) {
    const auto it = nodes_[cur].children.find(t);
    if (it == nodes_[cur].children.end()) return std::nullopt;
    cur = it->second;
  }
  return cur;
}

PrefixTrie build_trie(std::span<const TokenSeq> sequences) {
  PrefixTrie trie;
  for (const auto& s : sequences) trie.insert(s);
  return trie;
}

DegreeReport degree_report(const PrefixTrie& trie) {
  DegreeReport rep;
  double sum = 0.0, log_sum = 0.0;
  std::vector<double> depth_sum;
  std::vector<std::size_t> depth_n;
  for (std::size_t i = 0; i < trie.node_count(); ++i) {
    const auto& node = trie.node(i);
    const std::size_t k = node.children.size();
    if (k == 0) {
      ++rep.leaves;
      continue;
    }
    ++rep.internal_nodes;
    sum += static_cast<double>(k);
    log_sum += std::log(static_cast<double>(k));
    rep.max_degree = std::max(rep.max_degree, k);
    if (depth_sum.size() <= node.depth) {
      depth_sum.resize(node.depth + 1, 0.0);
      depth_n.resize(node.depth + 1, 0);
    }
    depth_sum[node.depth] += static_cast<double>(k);
    ++depth_n[node.depth];
  }
  if (rep.internal_nodes == 0) throw std::invalid_argument("degree report of an empty trie");
  const double n = static_cast<double>(rep.internal_nodes);
  rep.mean_degree = sum / n;
  rep.geo_mean_degree = std::exp(log_sum / n);
  for (std::size_t d = 0; d < depth_sum.size(); ++d) {
    rep.per_depth.push_back(depth_n[d] ? depth_sum[d] / static_cast<double>(depth_n[d]) : 0.0);
  }
  return rep;
}

}  // namespace cotd::trie
