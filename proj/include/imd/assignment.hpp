#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace imd {

struct AssignmentSolution {
  std::vector<std::size_t> row_to_col;
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a dense n x n row-major cost matrix.
///
/// Shortest augmenting path with row/column dual potentials, in the
/// Jonker-Volgenant family (the variant described by Crouse, 2016). Column
/// reduction seeds the duals and a partial matching; each row left free is
/// then inserted with one Dijkstra search over reduced costs, so the whole
/// solve is O(n^3) in the worst case. Among equally short paths a free column is
/// preferred, then the lowest column index, so ties resolve deterministically
/// (an all-equal matrix yields the identity).
///
/// Throws std::invalid_argument on a non-finite entry or size mismatch.
AssignmentSolution solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace imd
