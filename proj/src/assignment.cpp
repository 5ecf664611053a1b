#include "imd/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace imd {

AssignmentSolution solve_assignment(std::span<const double> cost, std::size_t n) {
  if (n == 0) throw std::invalid_argument("solve_assignment: empty problem");
  if (cost.size() != n * n) throw std::invalid_argument("solve_assignment: cost is not n x n");
  for (std::size_t k = 0; k < cost.size(); ++k) {
    if (!std::isfinite(cost[k])) {
      throw std::invalid_argument("solve_assignment: non-finite cost at (" + std::to_string(k / n) + ", " +
                                  std::to_string(k % n) + ")");
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::vector<double> row_dual(n, 0.0), col_dual(n, 0.0);
  std::vector<std::size_t> col_of_row(n, kNone), row_of_col(n, kNone);

  // Column reduction: each column's minimum becomes its dual and the
  // minimising row (lowest index on ties) takes the column if still free.
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (cost[i * n + j] < cost[best * n + j]) best = i;
    }
    col_dual[j] = cost[best * n + j];
    if (col_of_row[best] == kNone) {
      col_of_row[best] = j;
      row_of_col[j] = best;
    }
  }

  // Column minima are feasible column duals with zero row duals, and every
  // edge taken above is tight, so the path search only handles the rows
  // still free.
  std::vector<std::size_t> free_rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (col_of_row[i] == kNone) free_rows.push_back(i);
  }

  // Shortest augmenting paths from each free row. `work` holds the tentative
  // path length of unscanned columns and +inf for scanned ones (whose final
  // length moves to `dist`); `block` adds +inf to scanned columns so the
  // relaxation loop needs no branches and vectorises.
  std::vector<double> work(n), dist(n), block(n), pred(n);
  std::vector<std::size_t> scanned_rows, scanned_cols;
  scanned_rows.reserve(n);
  scanned_cols.reserve(n);

  for (std::size_t start : free_rows) {
    std::fill(work.begin(), work.end(), kInf);
    std::fill(block.begin(), block.end(), 0.0);
    scanned_rows.clear();
    scanned_cols.clear();

    double reach = 0.0;
    std::size_t row = start;
    std::size_t sink = kNone;
    while (sink == kNone) {
      scanned_rows.push_back(row);
      const double* c = cost.data() + row * n;
      const double base = reach - row_dual[row];
      const auto row_tag = static_cast<double>(row);
      for (std::size_t j = 0; j < n; ++j) {
        const double r = base + c[j] - col_dual[j] + block[j];
        const double w = work[j];
        const bool better = r < w;
        work[j] = better ? r : w;
        pred[j] = better ? row_tag : pred[j];
      }
      // Separate passes: a min carried through the loop above blocks vectorisation.
      const Eigen::Map<const Eigen::ArrayXd> work_map(work.data(), static_cast<Eigen::Index>(n));
      const double lowest = work_map.minCoeff();
      if (lowest == kInf) throw std::logic_error("solve_assignment: no augmenting path");
      // Among columns at the minimum: a free column first, then the lowest index.
      std::size_t next_col = 0;
      while (work[next_col] != lowest) ++next_col;
      if (row_of_col[next_col] != kNone && (work_map == lowest).count() > 1) {
        for (std::size_t j = next_col + 1; j < n; ++j) {
          if (work[j] == lowest && row_of_col[j] == kNone) {
            next_col = j;
            break;
          }
        }
      }
      reach = lowest;
      dist[next_col] = lowest;
      work[next_col] = kInf;
      block[next_col] = kInf;
      scanned_cols.push_back(next_col);
      if (row_of_col[next_col] == kNone) {
        sink = next_col;
      } else {
        row = row_of_col[next_col];
      }
    }

    row_dual[start] += reach;
    for (std::size_t r : scanned_rows) {
      if (r != start) row_dual[r] += reach - dist[col_of_row[r]];
    }
    for (std::size_t j : scanned_cols) col_dual[j] -= reach - dist[j];

    for (std::size_t j = sink;;) {
      const auto r = static_cast<std::size_t>(pred[j]);
      row_of_col[j] = r;
      std::swap(col_of_row[r], j);
      if (r == start) break;
    }
  }

  AssignmentSolution out;
  out.row_to_col = std::move(col_of_row);
  for (std::size_t i = 0; i < n; ++i) out.total_cost += cost[i * n + out.row_to_col[i]];
  return out;
}

}  // namespace imd
