#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace hitop::fea {

// Mesh conventions
// ----------------
// Elements are unit squares laid out on an nely x nelx grid and indexed row-major:
// element (row, col) has index row * nelx + col, row 0 at the top.
// Nodes are numbered column-major (88-line convention): node (row, col) with
// row in [0, nely] and col in [0, nelx] has id col * (nely + 1) + row. Each node
// carries two dofs, 2 * id (x, positive right) and 2 * id + 1 (y, positive up).

struct PointLoad {
  int dof = 0;
  double value = 0.0;
  bool operator==(const PointLoad&) const = default;
};

struct DesignProblem {
  int nelx = 0;
  int nely = 0;
  std::vector<PointLoad> loads;
  std::vector<int> fixed_dofs;
  double volfrac = 0.5;
  std::vector<int> passive_solid;
  std::vector<int> passive_void;
  double poisson_ratio = 0.3;

  int element_count() const noexcept { return nelx * nely; }
  int node_count() const noexcept { return (nelx + 1) * (nely + 1); }
  int dof_count() const noexcept { return 2 * node_count(); }

  /// Volume of the design domain: all elements except the passive void ones.
  double reference_volume() const noexcept {
    return static_cast<double>(element_count()) - static_cast<double>(passive_void.size());
  }

  /// Throws ValidationError naming the offending field.
  void validate() const;

  /// Sorts and deduplicates index lists.
  void normalize();

  bool operator==(const DesignProblem&) const = default;
};

enum class ElementRole : std::uint8_t { Design, Solid, Void };

/// Per-element role derived from the passive sets.
std::vector<ElementRole> element_roles(const DesignProblem& problem);

inline int node_id(int nely, int row, int col) noexcept { return col * (nely + 1) + row; }
inline int dof_x(int nely, int row, int col) noexcept { return 2 * node_id(nely, row, col); }
inline int dof_y(int nely, int row, int col) noexcept { return 2 * node_id(nely, row, col) + 1; }

/// Global dofs of element `e`, ordered lower-left, lower-right, upper-right, upper-left.
std::array<int, 8> element_dofs(int nelx, int nely, int e) noexcept;

}  // namespace hitop::fea
