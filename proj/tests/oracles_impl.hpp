#pragma once

#include <cmath>

namespace oracle {

template <class MeanFn, class VarFn>
Gaussian1D grid_h_tilt(Gaussian1D hCav, double y, MeanFn mean, VarFn var, int points, double halfWidth) {
  const double sd = std::sqrt(hCav.var);
  const double step = 2.0 * halfWidth / (points - 1);
  std::vector<double> h(points), lw(points);
  double top = -INFINITY;
  for (int j = 0; j < points; ++j) {
    const double z = -halfWidth + j * step;
    h[j] = hCav.mean + sd * z;
    const double m = mean(h[j]);
    const double s = var(h[j]);
    lw[j] = -0.5 * z * z - 0.5 * std::log(s) - 0.5 * (y - m) * (y - m) / s;
    if (j == 0 || j == points - 1) lw[j] += std::log(0.5);
    top = std::max(top, lw[j]);
  }
  double z0 = 0.0, z1 = 0.0;
  for (int j = 0; j < points; ++j) {
    const double w = std::exp(lw[j] - top);
    z0 += w;
    z1 += w * h[j];
  }
  const double m1 = z1 / z0;
  double z2 = 0.0;
  for (int j = 0; j < points; ++j) z2 += std::exp(lw[j] - top) * (h[j] - m1) * (h[j] - m1);
  return {m1, z2 / z0};
}

}  // namespace oracle
