#include "kel/assignment.hpp"

#include <limits>

#include "kel/error.hpp"

namespace kel {

namespace {

using Index = Eigen::Index;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Assignment solve_assignment(const RowMat& cost) {
  const Index n = cost.rows();
  require(cost.cols() == n, "assignment cost matrix must be square");
  require(cost.allFinite(), "assignment cost matrix must be finite");
  Assignment out;
  if (n == 0) return out;
  if (n == 1) {
    out.row_to_col = {0};
    out.total_cost = cost(0, 0);
    return out;
  }

  std::vector<Index> rowsol(n, -1), colsol(n, -1), free_rows(n), collist(n), pred(n);
  std::vector<int> matches(n, 0);
  std::vector<double> v(n), d(n);

  // Column reduction.
  for (Index j = n - 1; j >= 0; --j) {
    double lo = cost(0, j);
    Index imin = 0;
    for (Index i = 1; i < n; ++i) {
      if (cost(i, j) < lo) {
        lo = cost(i, j);
        imin = i;
      }
    }
    v[j] = lo;
    if (++matches[imin] == 1) {
      rowsol[imin] = j;
      colsol[j] = imin;
    } else if (v[j] < v[rowsol[imin]]) {
      const Index j1 = rowsol[imin];
      rowsol[imin] = j;
      colsol[j] = imin;
      colsol[j1] = -1;
    } else {
      colsol[j] = -1;
    }
  }

  // Reduction transfer.
  Index numfree = 0;
  for (Index i = 0; i < n; ++i) {
    if (matches[i] == 0) {
      free_rows[numfree++] = i;
    } else if (matches[i] == 1) {
      const Index j1 = rowsol[i];
      double lo = kInf;
      for (Index j = 0; j < n; ++j) {
        if (j != j1 && cost(i, j) - v[j] < lo) lo = cost(i, j) - v[j];
      }
      v[j1] -= lo;
    }
  }

  // Augmenting row reduction, two passes. The step cap guards against
  // long cycles of vanishing price decrements in floating point.
  for (int pass = 0; pass < 2; ++pass) {
    Index k = 0;
    const Index prvnumfree = numfree;
    numfree = 0;
    Index budget = 64 * n;
    while (k < prvnumfree) {
      const Index i = free_rows[k++];
      if (--budget < 0) {
        free_rows[numfree++] = i;
        continue;
      }
      double umin = cost(i, 0) - v[0];
      Index j1 = 0;
      Index j2 = -1;
      double usubmin = kInf;
      for (Index j = 1; j < n; ++j) {
        const double h = cost(i, j) - v[j];
        if (h < usubmin) {
          if (h >= umin) {
            usubmin = h;
            j2 = j;
          } else {
            usubmin = umin;
            umin = h;
            j2 = j1;
            j1 = j;
          }
        }
      }
      Index i0 = colsol[j1];
      if (umin < usubmin) {
        v[j1] -= usubmin - umin;
      } else if (i0 > -1) {
        j1 = j2;
        i0 = colsol[j2];
      }
      rowsol[i] = j1;
      colsol[j1] = i;
      if (i0 > -1) {
        if (umin < usubmin) {
          free_rows[--k] = i0;
        } else {
          free_rows[numfree++] = i0;
        }
      }
    }
  }

  // Shortest augmenting paths for the remaining free rows.
  for (Index f = 0; f < numfree; ++f) {
    const Index freerow = free_rows[f];
    for (Index j = 0; j < n; ++j) {
      d[j] = cost(freerow, j) - v[j];
      pred[j] = freerow;
      collist[j] = j;
    }
    Index low = 0;
    Index up = 0;
    Index last = 0;
    Index endofpath = -1;
    double lo = 0.0;
    bool found = false;
    while (!found) {
      if (up == low) {
        last = low - 1;
        lo = d[collist[up++]];
        for (Index k = up; k < n; ++k) {
          const Index j = collist[k];
          const double h = d[j];
          if (h <= lo) {
            if (h < lo) {
              up = low;
              lo = h;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
        }
        for (Index k = low; k < up; ++k) {
          if (colsol[collist[k]] < 0) {
            endofpath = collist[k];
            found = true;
            break;
          }
        }
      }
      if (!found) {
        const Index j1 = collist[low++];
        const Index i = colsol[j1];
        const double h = cost(i, j1) - v[j1] - lo;
        for (Index k = up; k < n; ++k) {
          const Index j = collist[k];
          const double v2 = cost(i, j) - v[j] - h;
          if (v2 < d[j]) {
            pred[j] = i;
            if (v2 == lo) {
              if (colsol[j] < 0) {
                endofpath = j;
                found = true;
                break;
              }
              collist[k] = collist[up];
              collist[up++] = j;
            }
            d[j] = v2;
          }
        }
      }
    }
    for (Index k = 0; k <= last; ++k) {
      const Index j1 = collist[k];
      v[j1] += d[j1] - lo;
    }
    Index i;
    do {
      i = pred[endofpath];
      colsol[endofpath] = i;
      const Index j1 = endofpath;
      endofpath = rowsol[i];
      rowsol[i] = j1;
    } while (i != freerow);
  }

  out.row_to_col = std::move(rowsol);
  for (Index i = 0; i < n; ++i) out.total_cost += cost(i, out.row_to_col[i]);
  return out;
}

}  // namespace kel
