#pragma once

#include <cmath>

#include "mesh.hpp"

namespace msgfem {

/// One subdomain of a uniform brick decomposition.
///  - brick:       the non-overlapping brick
///  - omega:       brick grown by `overlap` fine layers (clipped to the domain)
///  - omega_star:  omega grown by `ell` fine layers (oversampling domain)
///  - omega_tilde: the part of omega where this subdomain's partition function
///                 equals one (per interior side: brick shrunk by `overlap`;
///                 boundary sides extend to the domain boundary)
///  - ring_cells:  cells supporting chi - eta (one-layer cut-off inside
///                 omega_tilde), a band around the interior sides of omega
///  - ring_star_cells: ring dilated by `ell` in the max norm, clipped
struct Subdomain {
  Box brick, omega, omega_star, omega_tilde;
  Box ring_hole;  // omega minus ring (cells where the ring has its hole)
  std::vector<Index> omega_cells, omega_star_cells, omega_tilde_cells;
  std::vector<Index> ring_cells, ring_star_cells;
  std::array<std::array<bool, 2>, 3> side_on_boundary{};  // [axis][lo/hi]
  bool boundary = false;         // omega_star touches the domain boundary
  bool ring_degenerate = false;  // ring_star fills all of omega_star
  double delta = 0.0;            // physical overlap width
  double h_star = 0.0;           // diameter of omega_star

  bool has_interior_side() const {
    for (int k = 0; k < 3; ++k)
      if (!side_on_boundary[k][0] || !side_on_boundary[k][1]) return true;
    return false;
  }
};

struct Decomposition {
  std::array<int, 3> grid{1, 1, 1};
  Index overlap = 2;
  Index ell = 2;
  std::vector<Subdomain> subdomains;
  int kappa = 0;       // max number of omegas covering a cell
  int kappa_star = 0;  // same for omega_star

  int size() const { return (int)subdomains.size(); }
};

inline std::vector<Index> cells_in_box(const Mesh& mesh, const Box& b) {
  std::vector<Index> out;
  out.reserve((size_t)b.volume());
  for (Index z = b.lo[2]; z < b.hi[2]; ++z)
    for (Index y = b.lo[1]; y < b.hi[1]; ++y)
      for (Index x = b.lo[0]; x < b.hi[0]; ++x)
        out.push_back(mesh.cell_index({x, y, z}));
  return out;
}

inline Box clip_box(const Mesh& mesh, Box b) {
  for (int k = 0; k < mesh.dim; ++k) {
    b.lo[k] = std::max<Index>(b.lo[k], 0);
    b.hi[k] = std::min<Index>(b.hi[k], mesh.cells[k]);
  }
  return b;
}

inline Decomposition build_decomposition(const Mesh& mesh,
                                         const std::vector<int>& grid,
                                         Index overlap, Index ell) {
  if ((int)grid.size() != mesh.dim)
    throw std::invalid_argument("build_decomposition: grid rank != mesh dim");
  if (overlap < 1) throw std::invalid_argument("overlap must be >= 1");
  if (ell < 0) throw std::invalid_argument("ell must be >= 0");
  std::array<Index, 3> bs{1, 1, 1};  // brick size per axis
  Decomposition d;
  d.overlap = overlap;
  d.ell = ell;
  for (int k = 0; k < mesh.dim; ++k) {
    if (grid[k] < 1 || mesh.cells[k] % grid[k] != 0)
      throw std::invalid_argument(
          "build_decomposition: subdomain grid must divide the mesh");
    d.grid[k] = grid[k];
    bs[k] = mesh.cells[k] / grid[k];
  }

  std::array<int, 3> g{d.grid[0], d.grid[1], d.grid[2]};
  for (int sz = 0; sz < g[2]; ++sz)
    for (int sy = 0; sy < g[1]; ++sy)
      for (int sx = 0; sx < g[0]; ++sx) {
        std::array<Index, 3> sc{sx, sy, sz};
        Subdomain s;
        for (int k = 0; k < mesh.dim; ++k) {
          s.brick.lo[k] = sc[k] * bs[k];
          s.brick.hi[k] = (sc[k] + 1) * bs[k];
          s.side_on_boundary[k][0] = (s.brick.lo[k] == 0);
          s.side_on_boundary[k][1] = (s.brick.hi[k] == mesh.cells[k]);
        }
        for (int k = mesh.dim; k < 3; ++k)
          s.side_on_boundary[k] = {true, true};

        Box om = s.brick, omt = s.brick, hole = s.brick;
        for (int k = 0; k < mesh.dim; ++k) {
          if (!s.side_on_boundary[k][0]) {
            om.lo[k] -= overlap;
            omt.lo[k] += overlap;
            hole.lo[k] += overlap + 1;
          } else {
            omt.lo[k] = 0;
            hole.lo[k] = 0;
          }
          if (!s.side_on_boundary[k][1]) {
            om.hi[k] += overlap;
            omt.hi[k] -= overlap;
            hole.hi[k] -= overlap + 1;
          } else {
            omt.hi[k] = mesh.cells[k];
            hole.hi[k] = mesh.cells[k];
          }
        }
        s.omega = clip_box(mesh, om);
        s.omega_tilde = omt;
        s.ring_hole = hole;
        if (s.omega_tilde.empty())
          throw std::invalid_argument(
              "build_decomposition: bricks too small for the overlap "
              "(omega_tilde empty); refine the mesh or reduce overlap");

        Box oms = s.omega;
        for (int k = 0; k < mesh.dim; ++k) {
          oms.lo[k] -= ell;
          oms.hi[k] += ell;
        }
        s.omega_star = clip_box(mesh, oms);
        s.boundary = false;
        for (int k = 0; k < mesh.dim; ++k)
          if (s.omega_star.lo[k] == 0 || s.omega_star.hi[k] == mesh.cells[k])
            s.boundary = true;

        s.omega_cells = cells_in_box(mesh, s.omega);
        s.omega_star_cells = cells_in_box(mesh, s.omega_star);
        s.omega_tilde_cells = cells_in_box(mesh, s.omega_tilde);

        // Ring R = omega \ hole; R* = {c in omega_star : the ell-neighborhood
        // of c meets R}. The neighborhood clipped to omega is a box, and it
        // misses R exactly when it is contained in the hole on every axis.
        for (Index c : s.omega_cells) {
          auto cc = mesh.cell_coord(c);
          if (!hole.contains(cc)) s.ring_cells.push_back(c);
        }
        if (s.ring_cells.empty() || hole.empty()) {
          s.ring_degenerate = true;
          s.ring_cells = s.omega_cells;
          s.ring_star_cells = s.omega_star_cells;
        } else {
          for (Index c : s.omega_star_cells) {
            auto cc = mesh.cell_coord(c);
            bool inside_hole = true;
            for (int k = 0; k < mesh.dim; ++k) {
              Index lo = std::max(cc[k] - ell, s.omega.lo[k]);
              Index hi = std::min(cc[k] + ell + 1, s.omega.hi[k]);
              if (lo < hole.lo[k] || hi > hole.hi[k]) inside_hole = false;
            }
            if (!inside_hole) s.ring_star_cells.push_back(c);
          }
          if ((Index)s.ring_star_cells.size() ==
              (Index)s.omega_star_cells.size())
            s.ring_degenerate = true;
        }

        double hmin = mesh.h[0];
        for (int k = 1; k < mesh.dim; ++k) hmin = std::min(hmin, mesh.h[k]);
        s.delta = s.has_interior_side() ? 2.0 * double(overlap) * hmin
                                        : hmin * double(mesh.cells[0]);
        double d2 = 0.0;
        for (int k = 0; k < mesh.dim; ++k) {
          double w = double(s.omega_star.hi[k] - s.omega_star.lo[k]) * mesh.h[k];
          d2 += w * w;
        }
        s.h_star = std::sqrt(d2);
        d.subdomains.push_back(std::move(s));
      }

  // Cover counts, exhaustive over cells.
  std::vector<int> cnt(mesh.cell_count(), 0), cnt_star(mesh.cell_count(), 0);
  for (const auto& s : d.subdomains) {
    for (Index c : s.omega_cells) ++cnt[c];
    for (Index c : s.omega_star_cells) ++cnt_star[c];
  }
  for (Index c = 0; c < mesh.cell_count(); ++c) {
    d.kappa = std::max(d.kappa, cnt[c]);
    d.kappa_star = std::max(d.kappa_star, cnt_star[c]);
    if (cnt[c] == 0)
      throw std::runtime_error("build_decomposition: cell not covered");
  }
  return d;
}

}  // namespace msgfem
