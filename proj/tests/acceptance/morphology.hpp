#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hitop/common/grid.hpp"

namespace hitop::acceptance {

// Digital disk of diameter d: offsets (i, j) in [0, d) with (i - c)^2 + (j - c)^2 <= (d / 2)^2, c = (d - 1) / 2.
inline std::vector<Pixel> disk(int d) {
  std::vector<Pixel> se;
  const double c = (d - 1) / 2.0, r2 = d * d / 4.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if ((i - c) * (i - c) + (j - c) * (j - c) <= r2 + 1e-12) se.push_back({i, j});
  return se;
}

// Union of all translates of the structuring element that fit inside the solid.
inline Mask opening(const Mask& solid, const std::vector<Pixel>& se, int extent) {
  Mask out(solid.rows(), solid.cols());
  for (int r = 0; r + extent <= solid.rows(); ++r)
    for (int c = 0; c + extent <= solid.cols(); ++c) {
      bool fits = true;
      for (const auto& p : se)
        if (!solid(r + p.row, c + p.col)) {
          fits = false;
          break;
        }
      if (!fits) continue;
      for (const auto& p : se) out(r + p.row, c + p.col) = 1;
    }
  return out;
}

// Largest disk diameter whose opening keeps each solid pixel (0 for void).
inline Grid<int> local_thickness(const Mask& solid, int max_d) {
  Grid<int> t(solid.rows(), solid.cols());
  for (int d = 1; d <= max_d; ++d) {
    const Mask o = opening(solid, disk(d), d);
    bool any = false;
    for (std::size_t i = 0; i < o.size(); ++i)
      if (o[i]) {
        t[i] = d;
        any = true;
      }
    if (!any) break;
  }
  return t;
}

struct FeatureSize {
  int robust = 0;  // 5th percentile of the local thickness over solid pixels in the region
  int minimum = 0;
  std::size_t pixels = 0;
};

inline FeatureSize region_feature_size(const Mask& solid, const Mask& region, int max_d = 40) {
  const auto t = local_thickness(solid, max_d);
  std::vector<int> v;
  for (std::size_t i = 0; i < solid.size(); ++i)
    if (solid[i] && region[i]) v.push_back(t[i]);
  FeatureSize fs;
  fs.pixels = v.size();
  if (v.empty()) return fs;
  std::sort(v.begin(), v.end());
  fs.minimum = v.front();
  fs.robust = v[static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(v.size() - 1)))];
  return fs;
}

}  // namespace hitop::acceptance
