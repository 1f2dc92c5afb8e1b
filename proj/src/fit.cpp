#include "kel/fit.hpp"

#include <cmath>
#include <string>

#include "kel/error.hpp"

namespace kel {

FitResult line_fit(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "fit abscissa and ordinate lengths differ");
  const double n = static_cast<double>(x.size());
  require(x.size() >= 2, "fit needs at least two points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "fit abscissae are all equal");
  FitResult r;
  r.points = static_cast<int>(x.size());
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - (r.intercept + r.slope * x[i]);
      ss_res += e * e;
    }
    r.r2 = 1.0 - ss_res / syy;
  }
  return r;
}

FitResult rate_fit(const std::vector<std::pair<double, double>>& series, FitMode mode,
                   FitWindow window) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [t, v] : series) {
    if (t < window.t_min || t > window.t_max) continue;
    if (!(v > 0.0)) {
      fail(ErrorCode::NonPositiveValue, "value " + std::to_string(v) + " at t=" +
                                            std::to_string(t) + " is not positive");
    }
    if (mode == FitMode::PowerLaw) require(t > 0.0, "power-law fit needs t > 0");
    x.push_back(mode == FitMode::PowerLaw ? std::log(t) : t);
    y.push_back(std::log(v));
  }
  require(x.size() >= 4, "rate fit needs at least 4 points in the window");
  return line_fit(x, y);
}

}  // namespace kel
