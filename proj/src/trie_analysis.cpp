#include <algorithm>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "cotd/random.hpp"
#include "cotd/stats.hpp"
#include "cotd/taskgen.hpp"
#include "cotd/trie.hpp"

namespace cotd::trie {

std::vector<std::string> all_traces(std::uint32_t m, std::uint32_t n, std::size_t context_dim,
                                    std::uint64_t seed) {
  using namespace cotd::taskgen;
  const auto tree = ReasoningTree::generate(Degrees(n, m), context_dim, seed);
  const auto& w = tree.w();
  std::vector<double> neg(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) neg[i] = -w[i];
  std::vector<std::string> out;
  out.reserve(2 * tree.leaf_count());
  for (std::size_t leaf = tree.first_leaf(); leaf < tree.node_count(); ++leaf) {
    const auto label = tree.label(leaf);
    out.push_back(render_sample(tree, neg, label, Mode::reasoning).output_text);
    out.push_back(render_sample(tree, w, label, Mode::reasoning).output_text);
  }
  return out;
}

TaskTrieResult task_vs_trie_degree(std::span<const std::uint32_t> m_list,
                                   const TaskTrieOptions& opts, std::uint64_t seed) {
  if (m_list.empty()) throw std::invalid_argument("task degree list is empty");
  if (opts.trace_cap == 0) throw std::invalid_argument("trace cap must be positive");
  TaskTrieResult result;
  std::vector<double> task, trie_mean;
  for (std::uint32_t m : m_list) {
    if (m < 1) throw std::invalid_argument("task degree must be >= 1");
    auto traces = all_traces(m, opts.depth, opts.context_dim, derive_seed(seed, "trie.tree", {m}));
    TaskTrieRow row;
    row.task_degree = m;
    if (traces.size() > opts.trace_cap) {
      Rng rng = Rng::for_purpose(seed, "trie.trace_sample", {m});
      rng.shuffle(traces);
      traces.resize(opts.trace_cap);
      row.capped = true;
    }
    row.traces = traces.size();
    const auto tok = opts.tokenize ? train_bpe(traces, std::max(opts.vocab_size, byte_tokenizer(traces).size()))
                                   : byte_tokenizer(traces);
    PrefixTrie trie;
    for (const auto& t : traces) trie.insert(encode(tok, t));
    row.report = degree_report(trie);
    task.push_back(m);
    trie_mean.push_back(row.report.mean_degree);
    result.rows.push_back(std::move(row));
  }
  result.spearman = spearman(task, trie_mean);
  return result;
}

void write_degree_csv(std::ostream& out, const TaskTrieResult& result) {
  out << "task_degree,trie_mean_degree,trie_geo_mean,depth,per_depth_mean\n";
  for (const auto& row : result.rows) {
    const auto& r = row.report;
    for (std::size_t depth = 0; depth < r.per_depth.size(); ++depth) {
      out << fmt::format("{},{:.17g},{:.17g},{},{:.17g}\n", row.task_degree, r.mean_degree,
                         r.geo_mean_degree, depth, r.per_depth[depth]);
    }
  }
}

}  // namespace cotd::trie
