#include <deque>

#include "hitop/common/error.hpp"
#include "hitop/dataset/dataset.hpp"

namespace hitop::dataset {

int count_distinct_regions(const Mask& solid) {
  const int R = solid.rows(), C = solid.cols();
  Grid<int> seen(R, C, 0);
  int solid_parts = 0, holes = 0;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      if (seen(r, c)) continue;
      const bool is_solid = solid(r, c) != 0;
      // Solid grows through 8 neighbours, void through 4.
      const int reach = is_solid ? 8 : 4;
      bool touches_border = false;
      std::deque<Pixel> queue{{r, c}};
      seen(r, c) = 1;
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        if (p.row == 0 || p.col == 0 || p.row == R - 1 || p.col == C - 1) touches_border = true;
        for (int k = 0; k < reach; ++k) {
          const Pixel q{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
          if (!solid.contains(q) || seen(q) || (solid(q) != 0) != is_solid) continue;
          seen(q) = 1;
          queue.push_back(q);
        }
      }
      if (is_solid)
        ++solid_parts;
      else if (!touches_border)
        ++holes;
    }
  }
  return solid_parts + holes;
}

template <typename T>
Grid<T> upscale(const Grid<T>& grid, int factor) {
  if (factor < 1) throw ParameterError("upscale factor must be >= 1");
  Grid<T> out(grid.rows() * factor, grid.cols() * factor);
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) = grid(r / factor, c / factor);
  return out;
}

template Grid<double> upscale(const Grid<double>&, int);
template Grid<std::uint8_t> upscale(const Grid<std::uint8_t>&, int);
template Grid<float> upscale(const Grid<float>&, int);

}  // namespace hitop::dataset
