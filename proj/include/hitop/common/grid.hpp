#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hitop/common/error.hpp"

namespace hitop {

/// Pixel (or element) coordinate; row grows downwards, col grows to the right.
struct Pixel {
  int row = 0;
  int col = 0;
  auto operator<=>(const Pixel&) const = default;
};

/// Dense row-major 2D array. Element (r, c) lives at index r * cols + c.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}
  Grid(int rows, int cols, std::vector<T> values) : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != checked_size(rows, cols)) throw ContractError("grid value count does not match dimensions");
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }
  bool contains(Pixel p) const noexcept { return contains(p.row, p.col); }
  std::size_t index(int r, int c) const noexcept { return static_cast<std::size_t>(r) * cols_ + c; }

  T& operator()(int r, int c) noexcept { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const noexcept { return data_[index(r, c)]; }
  T& operator()(Pixel p) noexcept { return data_[index(p.row, p.col)]; }
  const T& operator()(Pixel p) const noexcept { return data_[index(p.row, p.col)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool same_shape(const Grid<T>& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  bool operator==(const Grid&) const = default;

 private:
  static std::size_t checked_size(int rows, int cols) {
    if (rows < 0 || cols < 0) throw ContractError("grid dimensions must be non-negative");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;
using DensityGrid = Grid<double>;

inline std::size_t count_set(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

// Neighbour offsets in the traversal preference order: N, E, S, W, then NE, SE, SW, NW.
inline constexpr int kNeighbourRow[8] = {-1, 0, 1, 0, -1, 1, 1, -1};
inline constexpr int kNeighbourCol[8] = {0, 1, 0, -1, 1, 1, -1, -1};

}  // namespace hitop
