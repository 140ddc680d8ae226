#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msgfem {

using Index = std::int64_t;

/// Axis-aligned half-open box of cell indices, [lo[k], hi[k]) per axis.
/// Unused axes (k >= dim) are pinned to [0,1).
struct Box {
  std::array<Index, 3> lo{0, 0, 0};
  std::array<Index, 3> hi{1, 1, 1};

  bool empty() const {
    return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2];
  }
  Index volume() const {
    if (empty()) return 0;
    return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
  }
  bool contains(const std::array<Index, 3>& c) const {
    for (int k = 0; k < 3; ++k)
      if (c[k] < lo[k] || c[k] >= hi[k]) return false;
    return true;
  }
};

/// Uniform Cartesian grid on a box domain, Q1 nodes at cell corners.
/// Nodes and cells are numbered lexicographically (x fastest).
struct Mesh {
  int dim = 2;
  std::array<Index, 3> cells{1, 1, 1};      // cells per axis; 1 for unused axes
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::array<double, 3> extent{1.0, 1.0, 1.0};
  std::array<double, 3> h{1.0, 1.0, 1.0};   // cell size per axis

  std::array<Index, 3> nodes_per_axis() const {
    std::array<Index, 3> n{1, 1, 1};
    for (int k = 0; k < dim; ++k) n[k] = cells[k] + 1;
    return n;
  }
  Index node_count() const {
    auto n = nodes_per_axis();
    return n[0] * n[1] * n[2];
  }
  Index cell_count() const {
    return cells[0] * cells[1] * cells[2];
  }

  Index node_index(std::array<Index, 3> c) const {
    auto n = nodes_per_axis();
    return c[0] + n[0] * (c[1] + n[1] * c[2]);
  }
  std::array<Index, 3> node_coord(Index id) const {
    auto n = nodes_per_axis();
    std::array<Index, 3> c;
    c[0] = id % n[0];
    c[1] = (id / n[0]) % n[1];
    c[2] = id / (n[0] * n[1]);
    return c;
  }
  Index cell_index(std::array<Index, 3> c) const {
    return c[0] + cells[0] * (c[1] + cells[1] * c[2]);
  }
  std::array<Index, 3> cell_coord(Index id) const {
    std::array<Index, 3> c;
    c[0] = id % cells[0];
    c[1] = (id / cells[0]) % cells[1];
    c[2] = id / (cells[0] * cells[1]);
    return c;
  }

  std::array<double, 3> node_position(Index id) const {
    auto c = node_coord(id);
    return {origin[0] + c[0] * h[0], origin[1] + c[1] * h[1],
            origin[2] + c[2] * h[2]};
  }

  /// True if the node lies on the boundary of the domain box.
  bool is_boundary_node(Index id) const {
    auto c = node_coord(id);
    for (int k = 0; k < dim; ++k)
      if (c[k] == 0 || c[k] == cells[k]) return true;
    return false;
  }

  int corners_per_cell() const { return 1 << dim; }

  /// Global node ids of a cell's corners in lexicographic corner order.
  std::array<Index, 8> cell_nodes(Index cell) const {
    auto c = cell_coord(cell);
    std::array<Index, 8> out{};
    int m = corners_per_cell();
    for (int v = 0; v < m; ++v) {
      std::array<Index, 3> nc = c;
      for (int k = 0; k < dim; ++k)
        if (v & (1 << k)) ++nc[k];
      out[v] = node_index(nc);
    }
    return out;
  }
};

inline Mesh build_mesh(int dim, const std::vector<Index>& cells_per_axis,
                       std::array<double, 3> origin = {0.0, 0.0, 0.0},
                       std::array<double, 3> extent = {1.0, 1.0, 1.0}) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("build_mesh: dim must be 2 or 3");
  if ((Index)cells_per_axis.size() != dim)
    throw std::invalid_argument("build_mesh: need one cell count per axis");
  Mesh m;
  m.dim = dim;
  m.origin = origin;
  m.extent = extent;
  for (int k = 0; k < dim; ++k) {
    if (cells_per_axis[k] < 1)
      throw std::invalid_argument("build_mesh: cell counts must be positive");
    m.cells[k] = cells_per_axis[k];
    m.h[k] = extent[k] / double(cells_per_axis[k]);
    if (!(m.h[k] > 0.0))
      throw std::invalid_argument("build_mesh: extent must be positive");
  }
  for (int k = dim; k < 3; ++k) {
    m.cells[k] = 1;
    m.h[k] = 1.0;
    m.extent[k] = 1.0;
  }
  return m;
}

/// Sorted unique global node ids touched by a set of cells.
inline std::vector<Index> nodes_of_cells(const Mesh& mesh,
                                         const std::vector<Index>& cells) {
  std::vector<Index> nodes;
  nodes.reserve(cells.size() * mesh.corners_per_cell());
  for (Index c : cells) {
    auto cn = mesh.cell_nodes(c);
    for (int v = 0; v < mesh.corners_per_cell(); ++v) nodes.push_back(cn[v]);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

/// All cells a node touches (up to 2^dim).
inline std::vector<Index> cells_of_node(const Mesh& mesh, Index node) {
  auto c = mesh.node_coord(node);
  std::vector<Index> out;
  int m = mesh.corners_per_cell();
  for (int v = 0; v < m; ++v) {
    std::array<Index, 3> cc = c;
    bool ok = true;
    for (int k = 0; k < mesh.dim; ++k) {
      if (v & (1 << k)) --cc[k];
      if (cc[k] < 0 || cc[k] >= mesh.cells[k]) ok = false;
    }
    if (ok) out.push_back(mesh.cell_index(cc));
  }
  return out;
}

}  // namespace msgfem
