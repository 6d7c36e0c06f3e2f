#pragma once

// Hand-built trees shared by the unit and acceptance tests.

#include <vector>

#include "cotd/taskgen.hpp"

namespace fixtures {

using cotd::taskgen::EdgeOp;

inline constexpr EdgeOp ID = EdgeOp::identity;
inline constexpr EdgeOp NOT = EdgeOp::negate;

/// Degree 2, depth 2. Edge ops by node: X1 ID, X2 NOT, X3 NOT, X4 ID,
/// X5 NOT, X6 ID. With v = w the root bit is 1, X2 = 0 and X5 = 1.
inline cotd::taskgen::ReasoningTree small_tree() {
  return cotd::taskgen::ReasoningTree::from_parts({2, 2}, {0.6, -0.8},
                                                  {ID, NOT, NOT, ID, NOT, ID});
}

/// small_tree() deepened to depth 3 (r = 1.5). Internal ops: Y1 NOT, Y2 ID,
/// Y3 ID, Y4 NOT, Y5 NOT, Y6 NOT. Deep leaves L1..L8 map to X3 X6 X4 X5 X6
/// X3 X5 X4, so X5 is reached through Y1-Y4 and through Y2-Y6. Final-level
/// ops are solved from parity.
inline cotd::taskgen::AugmentedTree small_augmented() {
  const auto base = small_tree();
  std::vector<EdgeOp> ops{NOT, ID, ID, NOT, NOT, NOT};
  ops.resize(14, ID);
  const std::vector<std::size_t> leaf_map{0, 3, 1, 2, 3, 0, 2, 1};
  cotd::taskgen::solve_final_ops(base, {2, 2, 2}, ops, leaf_map);
  return cotd::taskgen::AugmentedTree::from_parts(base, 1.5, ops, leaf_map);
}

}  // namespace fixtures
