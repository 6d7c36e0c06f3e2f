#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "cotd/trie.hpp"

namespace cotd::trie {
namespace {

using Pair = std::pair<TokenId, TokenId>;

struct Word {
  TokenSeq ids;
  std::size_t count;
};

std::array<int, 256> byte_index(const BpeTokenizer& tok) {
  std::array<int, 256> index;
  index.fill(-1);
  for (std::size_t i = 0; i < tok.base_size(); ++i) {
    index[static_cast<unsigned char>(tok.vocab[i][0])] = static_cast<int>(i);
  }
  return index;
}

TokenSeq to_base_ids(const std::array<int, 256>& index, std::string_view text) {
  TokenSeq ids;
  ids.reserve(text.size());
  for (char c : text) {
    const int id = index[static_cast<unsigned char>(c)];
    if (id < 0) {
      throw std::invalid_argument(
          fmt::format("byte 0x{:02x} is not in the base vocabulary", static_cast<unsigned char>(c)));
    }
    ids.push_back(static_cast<TokenId>(id));
  }
  return ids;
}

// Left-to-right, non-overlapping.
void apply_merge(TokenSeq& ids, Pair pair, TokenId merged) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i + 1 < ids.size() && ids[i] == pair.first && ids[i + 1] == pair.second) {
      ids[out++] = merged;
      ++i;
    } else {
      ids[out++] = ids[i];
    }
  }
  ids.resize(out);
}

std::string to_hex(std::string_view bytes) {
  std::string s;
  for (char c : bytes) s += fmt::format("{:02x}", static_cast<unsigned char>(c));
  return s;
}

std::string from_hex(const std::string& hex) {
  if (hex.empty() || hex.size() % 2 != 0) throw std::runtime_error("tokenizer: bad hex '" + hex + "'");
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(hex.substr(i, 2), &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != 2) throw std::runtime_error("tokenizer: bad hex '" + hex + "'");
    out += static_cast<char>(v);
  }
  return out;
}

}  // namespace

BpeTokenizer byte_tokenizer(std::span<const std::string> corpus) {
  std::array<bool, 256> seen{};
  for (const auto& s : corpus) {
    for (char c : s) seen[static_cast<unsigned char>(c)] = true;
  }
  BpeTokenizer tok;
  for (int b = 0; b < 256; ++b) {
    if (seen[b]) tok.vocab.emplace_back(1, static_cast<char>(b));
  }
  return tok;
}

BpeTokenizer train_bpe(std::span<const std::string> corpus, std::size_t vocab_size,
                       std::size_t min_pair_count) {
  if (corpus.empty()) throw std::invalid_argument("BPE corpus is empty");
  BpeTokenizer tok = byte_tokenizer(corpus);
  if (tok.vocab.empty()) throw std::invalid_argument("BPE corpus has no bytes");
  if (vocab_size < tok.size()) {
    throw std::invalid_argument(fmt::format("vocab size {} is below the {} distinct corpus bytes",
                                            vocab_size, tok.size()));
  }
  min_pair_count = std::max<std::size_t>(min_pair_count, 1);

  const auto index = byte_index(tok);
  std::map<std::string, std::size_t> distinct;
  for (const auto& s : corpus) ++distinct[s];
  std::vector<Word> words;
  for (const auto& [text, count] : distinct) words.push_back({to_base_ids(index, text), count});

  while (tok.size() < vocab_size) {
    std::map<Pair, std::size_t> counts;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.ids.size(); ++i) counts[{w.ids[i], w.ids[i + 1]}] += w.count;
    }
    const Pair* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, count] : counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      } else if (count == best_count) {
        const auto& a = tok.vocab[pair.first];
        const auto& b = tok.vocab[best->first];
        if (a < b || (a == b && tok.vocab[pair.second] < tok.vocab[best->second])) best = &pair;
      }
    }
    if (!best || best_count < min_pair_count) break;
    const Pair pair = *best;
    const auto merged = static_cast<TokenId>(tok.size());
    tok.vocab.push_back(tok.vocab[pair.first] + tok.vocab[pair.second]);
    tok.merges.push_back(pair);
    for (auto& w : words) apply_merge(w.ids, pair, merged);
  }
  return tok;
}

TokenSeq encode(const BpeTokenizer& tok, std::string_view text) {
  TokenSeq ids = to_base_ids(byte_index(tok), text);
  std::map<Pair, std::size_t> rank;
  for (std::size_t i = 0; i < tok.merges.size(); ++i) rank.emplace(tok.merges[i], i);
  while (ids.size() > 1) {
    std::size_t best = tok.merges.size();
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      const auto it = rank.find({ids[i], ids[i + 1]});
      if (it != rank.end()) best = std::min(best, it->second);
    }
    if (best == tok.merges.size()) break;
    apply_merge(ids, tok.merges[best], static_cast<TokenId>(tok.base_size() + best));
  }
  return ids;
}

std::string decode(const BpeTokenizer& tok, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) out += tok.vocab.at(id);
  return out;
}

void write_tokenizer(std::ostream& out, const BpeTokenizer& tok) {
  out << "cotd-bpe 1\n";
  out << "base " << tok.base_size() << '\n';
  for (std::size_t i = 0; i < tok.base_size(); ++i) out << to_hex(tok.vocab[i]) << '\n';
  out << "merges " << tok.merges.size() << '\n';
  for (const auto& [a, b] : tok.merges) out << a << ' ' << b << '\n';
  out << "end\n";
}

BpeTokenizer read_tokenizer(std::istream& in) {
  const auto fail = [](const std::string& what) -> void {
    throw std::runtime_error("tokenizer: " + what);
  };
  std::string word;
  while ((in >> std::ws) && in.peek() == '#') std::getline(in, word);
  int version = 0;
  if (!(in >> word >> version) || word != "cotd-bpe" || version != 1) fail("bad header");
  std::size_t base = 0;
  if (!(in >> word >> base) || word != "base" || base == 0 || base > 256) fail("bad base line");
  BpeTokenizer tok;
  for (std::size_t i = 0; i < base; ++i) {
    if (!(in >> word)) fail("truncated base vocabulary");
    auto bytes = from_hex(word);
    if (bytes.size() != 1) fail("base token '" + word + "' is not a single byte");
    if (!tok.vocab.empty() && static_cast<unsigned char>(tok.vocab.back()[0]) >=
                                  static_cast<unsigned char>(bytes[0])) {
      fail("base vocabulary is not in ascending byte order");
    }
    tok.vocab.push_back(std::move(bytes));
  }
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "merges") fail("bad merges line");
  for (std::size_t i = 0; i < count; ++i) {
    TokenId a = 0, b = 0;
    if (!(in >> a >> b)) fail("truncated merge list");
    if (a >= tok.size() || b >= tok.size()) fail(fmt::format("merge {} refers to an unknown id", i + 1));
    tok.vocab.push_back(tok.vocab[a] + tok.vocab[b]);
    tok.merges.emplace_back(a, b);
  }
  if (!(in >> word) || word != "end") fail("missing end");
  return tok;
}

}  // namespace cotd::trie
