#pragma once

#include <vector>

#include "kel/linalg.hpp"

namespace kel {

struct Assignment {
  std::vector<Eigen::Index> row_to_col;
  double total_cost = 0.0;
};

// Minimum-cost perfect matching on a dense square cost matrix
// (Jonker-Volgenant: column reduction, augmenting row reduction, then
// shortest augmenting paths).
Assignment solve_assignment(const RowMat& cost);

}  // namespace kel
