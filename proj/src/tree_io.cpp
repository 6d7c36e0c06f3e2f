#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include "json.hpp"

#include "cotd/taskgen.hpp"

namespace cotd::taskgen {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kTreeMagic = "cotd-tree";
constexpr std::string_view kAugmentedMagic = "cotd-augmented-tree";

[[noreturn]] void parse_error(const std::string& what) {
  throw std::runtime_error("tree descriptor: " + what);
}

std::string next_token(std::istream& in, std::string_view context) {
  std::string tok;
  if (!(in >> tok)) parse_error("unexpected end of input while reading " + std::string(context));
  return tok;
}

// Leading '#' header lines written by the command-line tool.
void skip_comments(std::istream& in) {
  std::string line;
  while ((in >> std::ws) && in.peek() == '#') std::getline(in, line);
}

void expect(std::istream& in, std::string_view keyword) {
  const auto tok = next_token(in, keyword);
  if (tok != keyword) parse_error("expected '" + std::string(keyword) + "', found '" + tok + "'");
}

template <typename T>
T read_number(std::istream& in, std::string_view context) {
  const auto tok = next_token(in, context);
  std::istringstream ss(tok);
  T value{};
  if (!(ss >> value) || !ss.eof()) parse_error("bad number '" + tok + "' in " + std::string(context));
  return value;
}

EdgeOp parse_op(const std::string& tok) {
  if (tok == "ID") return EdgeOp::identity;
  if (tok == "NOT") return EdgeOp::negate;
  parse_error("unknown edge op '" + tok + "'");
}

// Child and parent labels of the descriptor edge list. Deep leaves are
// written as L<ordinal> because their X labels repeat.
std::string edge_label(const ReasoningTree& t, std::size_t node, char internal, bool deep) {
  if (node == 0) return ".";
  if (deep && t.is_leaf(node)) return "L" + std::to_string(node - t.first_leaf() + 1);
  return internal + std::to_string(node);
}

void write_edges(std::ostream& out, const ReasoningTree& t, char internal, bool deep) {
  for (std::size_t node = 1; node < t.node_count(); ++node) {
    out << edge_label(t, node, internal, deep) << ' ' << edge_label(t, t.parent(node), internal, deep)
        << ' ' << to_string(t.op(node)) << '\n';
  }
}

std::vector<EdgeOp> read_edges(std::istream& in, const ReasoningTree& shape, char internal,
                               bool deep) {
  std::vector<EdgeOp> ops;
  ops.reserve(shape.node_count() - 1);
  for (std::size_t node = 1; node < shape.node_count(); ++node) {
    const auto child = next_token(in, "edge child");
    const auto parent = next_token(in, "edge parent");
    const auto op = next_token(in, "edge op");
    if (child != edge_label(shape, node, internal, deep) ||
        parent != edge_label(shape, shape.parent(node), internal, deep)) {
      parse_error("edge '" + child + " " + parent + "' does not match the profile layout");
    }
    ops.push_back(parse_op(op));
  }
  return ops;
}

// Zero ops of the right size, used only to validate labels while reading.
ReasoningTree shape_of(const Degrees& profile, std::size_t dim) {
  std::size_t nodes = 1, width = 1;
  for (auto m : profile) {
    if (m < 1 || width > kMaxTreeNodes / m) parse_error("profile is invalid or too large");
    width *= m;
    nodes += width;
    if (nodes > kMaxTreeNodes) parse_error("profile is too large");
  }
  return ReasoningTree::from_parts(profile, std::vector<double>(dim, 1.0),
                                   std::vector<EdgeOp>(nodes - 1, EdgeOp::identity));
}

}  // namespace

void write_jsonl(std::ostream& out, const Dataset& data) {
  for (const auto& s : data) {
    ordered_json j;
    j["v"] = s.v;
    j["target"] = s.target;
    j["mode"] = std::string(to_string(s.mode));
    j["input_text"] = s.input_text;
    j["output_text"] = s.output_text;
    j["answer_bit"] = s.answer_bit;
    out << j.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream& in) {
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.v = j.at("v").get<std::vector<double>>();
      s.target = j.at("target").get<std::string>();
      s.mode = parse_mode(j.at("mode").get<std::string>());
      s.input_text = j.at("input_text").get<std::string>();
      s.output_text = j.at("output_text").get<std::string>();
      s.answer_bit = j.at("answer_bit").get<int>();
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("dataset line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

void write_tree(std::ostream& out, const ReasoningTree& tree) {
  out << kTreeMagic << " 1\n";
  out << "profile";
  for (auto m : tree.profile()) out << ' ' << m;
  out << "\ncontext_dim " << tree.context_dim() << "\nw";
  for (double x : tree.w()) out << ' ' << fmt::format("{:.17g}", x);
  out << "\nedges " << tree.node_count() - 1 << '\n';
  write_edges(out, tree, 'X', false);
  out << "end\n";
}

ReasoningTree read_tree(std::istream& in) {
  skip_comments(in);
  expect(in, kTreeMagic);
  if (read_number<int>(in, "version") != 1) parse_error("unsupported version");
  expect(in, "profile");
  Degrees profile;
  std::string tok;
  while ((tok = next_token(in, "profile")) != "context_dim") {
    std::istringstream ss(tok);
    std::uint32_t m = 0;
    if (!(ss >> m) || !ss.eof()) parse_error("bad degree '" + tok + "'");
    profile.push_back(m);
  }
  const auto dim = read_number<std::size_t>(in, "context_dim");
  expect(in, "w");
  std::vector<double> w(dim);
  for (double& x : w) x = read_number<double>(in, "w");
  expect(in, "edges");
  const auto shape = shape_of(profile, dim);
  if (read_number<std::size_t>(in, "edge count") != shape.node_count() - 1) {
    parse_error("edge count does not match the profile");
  }
  auto ops = read_edges(in, shape, 'X', false);
  expect(in, "end");
  return ReasoningTree::from_parts(std::move(profile), std::move(w), std::move(ops));
}

void write_augmented(std::ostream& out, const AugmentedTree& aug) {
  const auto& deep = aug.deep();
  out << kAugmentedMagic << " 1\n";
  out << "r " << fmt::format("{:.17g}", aug.r()) << '\n';
  out << "deep_depth " << aug.deep_depth() << '\n';
  write_tree(out, aug.base());
  out << "deep_edges " << deep.node_count() - 1 << '\n';
  write_edges(out, deep, 'Y', true);
  out << "leaf_map " << aug.leaf_map().size() << '\n';
  for (std::size_t j = 0; j < aug.leaf_map().size(); ++j) {
    out << 'L' << j + 1 << ' ' << aug.label(deep.first_leaf() + j) << '\n';
  }
  out << "end\n";
}

AugmentedTree read_augmented(std::istream& in) {
  skip_comments(in);
  expect(in, kAugmentedMagic);
  if (read_number<int>(in, "version") != 1) parse_error("unsupported version");
  expect(in, "r");
  const auto r = read_number<double>(in, "r");
  expect(in, "deep_depth");
  const auto depth = read_number<std::size_t>(in, "deep_depth");
  auto base = read_tree(in);
  if (!base.is_constant_degree()) parse_error("base tree is not constant-degree");
  if (augmented_depth(r, base.depth()) != depth) parse_error("deep_depth does not equal r * n");
  expect(in, "deep_edges");
  const Degrees deep_profile(depth, base.profile().front());
  const auto shape = shape_of(deep_profile, base.context_dim());
  if (read_number<std::size_t>(in, "deep edge count") != shape.node_count() - 1) {
    parse_error("deep edge count does not match deep_depth");
  }
  auto ops = read_edges(in, shape, 'Y', true);
  expect(in, "leaf_map");
  const auto count = read_number<std::size_t>(in, "leaf_map size");
  if (count != shape.leaf_count()) parse_error("leaf_map size does not match the deep tree");
  std::vector<std::size_t> leaf_map(count);
  for (std::size_t j = 0; j < count; ++j) {
    const auto deep_label = next_token(in, "leaf_map");
    if (deep_label != "L" + std::to_string(j + 1)) parse_error("leaf_map out of order at " + deep_label);
    const auto base_label = next_token(in, "leaf_map");
    const auto node = base.find(base_label);
    if (!node || !base.is_leaf(*node)) parse_error("leaf_map names non-leaf '" + base_label + "'");
    leaf_map[j] = *node - base.first_leaf();
  }
  expect(in, "end");
  return AugmentedTree::from_parts(std::move(base), r, std::move(ops), std::move(leaf_map));
}

}  // namespace cotd::taskgen
