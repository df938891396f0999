#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "groupenet/errors.hpp"

namespace groupenet {

// Tricube-weighted local linear regression, evaluated at every input point.
// Used to produce the smoothed companion of exported metric curves; raw
// values are always kept alongside.
inline std::vector<double> loess_smooth(const std::vector<double>& x,
                                        const std::vector<double>& y,
                                        double span = 0.75) {
  const std::size_t n = x.size();
  if (y.size() != n) throw validation_error("loess_smooth: x and y lengths differ");
  if (n == 0) return {};
  if (!(span > 0.0 && span <= 1.0)) {
    throw validation_error("loess_smooth: span must lie in (0, 1]");
  }
  const std::size_t q =
      std::min(n, std::max<std::size_t>(2, static_cast<std::size_t>(
                                               std::ceil(span * static_cast<double>(n)))));
  std::vector<double> fitted(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) dist[k] = std::abs(x[k] - x[i]);
    std::vector<double> sorted = dist;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q - 1),
                     sorted.end());
    const double h = sorted[q - 1];
    // Weighted least squares line through the window.
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t k = 0; k < n; ++k) {
      double w;
      if (h > 0.0) {
        const double d = dist[k] / h;
        if (d >= 1.0) continue;
        const double c = 1.0 - d * d * d;
        w = c * c * c;
      } else {
        if (dist[k] > 0.0) continue;
        w = 1.0;  // all in-window points coincide with x[i]
      }
      sw += w;
      swx += w * x[k];
      swy += w * y[k];
      swxx += w * x[k] * x[k];
      swxy += w * x[k] * y[k];
    }
    const double det = sw * swxx - swx * swx;
    if (sw <= 0.0) {
      fitted[i] = y[i];
    } else if (std::abs(det) < 1e-12 * std::max(1.0, sw * swxx)) {
      fitted[i] = swy / sw;  // degenerate window: weighted mean
    } else {
      const double slope = (sw * swxy - swx * swy) / det;
      const double icept = (swy - slope * swx) / sw;
      fitted[i] = icept + slope * x[i];
    }
  }
  return fitted;
}

}  // namespace groupenet
