#pragma once

#include <utility>
#include <vector>

namespace kel {

enum class FitMode {
  Exponential,  // ln value against t
  PowerLaw,     // ln value against ln t
};

struct FitWindow {
  double t_min = -1e300;
  double t_max = 1e300;
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  // Zero by convention when the fitted values are constant.
  double r2 = 0.0;
  int points = 0;
};

// Least squares on the transformed series restricted to the window.
// Requires at least 4 points in the window; throws NonPositiveValue for
// values <= 0.
FitResult rate_fit(const std::vector<std::pair<double, double>>& series, FitMode mode,
                   FitWindow window = {});

// Plain least-squares line through (x, y).
FitResult line_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kel
