#pragma once

#include <vector>

namespace kel {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule with n points mapped onto [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

}  // namespace kel
