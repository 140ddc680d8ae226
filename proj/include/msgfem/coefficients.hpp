#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "mesh.hpp"

namespace msgfem {

/// Cell-wise constant scalar diffusion coefficient.
struct CoefficientField {
  Eigen::VectorXd values;  // one value per cell, mesh cell ordering

  double min() const { return values.minCoeff(); }
  double max() const { return values.maxCoeff(); }
  double contrast() const { return max() / min(); }
};

inline void validate_coefficient(const CoefficientField& coeff,
                                 const Mesh& mesh) {
  if (coeff.values.size() != mesh.cell_count())
    throw std::invalid_argument("coefficient: expected one value per cell");
  for (Index c = 0; c < coeff.values.size(); ++c) {
    double v = coeff.values[c];
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(
          "coefficient: non-positive or non-finite value at cell " +
          std::to_string(c));
  }
}

inline CoefficientField constant_field(const Mesh& mesh, double value = 1.0) {
  CoefficientField f;
  f.values = Eigen::VectorXd::Constant(mesh.cell_count(), value);
  validate_coefficient(f, mesh);
  return f;
}

/// Contrast of a coefficient restricted to a cell subset.
inline double local_contrast(const CoefficientField& coeff,
                             const std::vector<Index>& cells) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Index c : cells) {
    lo = std::min(lo, coeff.values[c]);
    hi = std::max(hi, coeff.values[c]);
  }
  return hi / lo;
}

/// Random piecewise-constant blocks ("skyscraper"): background 1, a seeded
/// subset of blocks gets values in (1, high]; one block is pinned to exactly
/// `high` so the global contrast is exact.
inline CoefficientField skyscraper_field(const Mesh& mesh, std::uint64_t seed,
                                         Index block_size, double high) {
  if (block_size < 1) throw std::invalid_argument("skyscraper: block_size >= 1");
  if (!(high >= 1.0)) throw std::invalid_argument("skyscraper: high >= 1");
  std::array<Index, 3> nb{1, 1, 1};
  for (int k = 0; k < mesh.dim; ++k) {
    if (mesh.cells[k] % block_size != 0)
      throw std::invalid_argument(
          "skyscraper: block_size must divide the cell count per axis");
    nb[k] = mesh.cells[k] / block_size;
  }
  Index nblocks = nb[0] * nb[1] * nb[2];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd bv = Eigen::VectorXd::Ones(nblocks);
  std::vector<Index> raised;
  for (Index b = 0; b < nblocks; ++b) {
    double pick = unif(rng);
    double level = unif(rng);
    if (pick < 0.25) {
      // log-uniform in (1, high]
      bv[b] = std::pow(high, level);
      raised.push_back(b);
    }
  }
  if (raised.empty()) raised.push_back(nblocks / 2);
  bv[raised[raised.size() / 2]] = high;

  CoefficientField f;
  f.values.resize(mesh.cell_count());
  for (Index c = 0; c < mesh.cell_count(); ++c) {
    auto cc = mesh.cell_coord(c);
    std::array<Index, 3> bc{cc[0] / block_size, cc[1] / block_size,
                            cc[2] / block_size};
    for (int k = mesh.dim; k < 3; ++k) bc[k] = 0;
    f.values[c] = bv[bc[0] + nb[0] * (bc[1] + nb[1] * bc[2])];
  }
  validate_coefficient(f, mesh);
  return f;
}

/// Geometry of the designed channel coefficient (2D). A subdomain grid of
/// sx x sy bricks positions the features:
///  - `channels` vertical strips of width `width` cells run inside brick
///    column `column`, kept clear of the column's left and right edges by
///    `margin` cells and of the domain's top and bottom boundary by
///    `y_margin` cells (so the high-contrast region floats: it does not
///    touch the Dirichlet boundary and its near-constant modes must be
///    captured by the coarse space);
///  - one horizontal bar of thickness `bar_thickness` connects all strips,
///    centered vertically inside brick (column, bar_row); `bar_row = -1`
///    places one such bar in every brick row, so the strips are joined
///    inside each subdomain while any ring around a subdomain still sees
///    them as disconnected pieces.
/// Strip/bar cells take the value 10^contrast_exponent, the rest 1.
struct ChannelGeometry {
  int subdomains_x = 4;
  int subdomains_y = 4;
  int column = 1;
  int bar_row = 1;
  int channels = 3;
  Index width = 2;
  Index margin = 6;
  Index y_margin = 6;
  Index bar_thickness = 2;
};

inline CoefficientField channel_field(const Mesh& mesh, double contrast_exponent,
                                      const ChannelGeometry& g = {}) {
  if (mesh.dim != 2)
    throw std::invalid_argument("channel_field: 2D only");
  if (mesh.cells[0] % g.subdomains_x != 0 || mesh.cells[1] % g.subdomains_y != 0)
    throw std::invalid_argument(
        "channel_field: subdomain grid must divide the mesh");
  Index bw = mesh.cells[0] / g.subdomains_x;  // brick width in cells
  Index bh = mesh.cells[1] / g.subdomains_y;
  Index x0 = g.column * bw;
  Index usable = bw - 2 * g.margin;
  if (usable < g.channels * g.width)
    throw std::invalid_argument("channel_field: brick too narrow for channels");
  // Strip left edges, evenly spread across the usable band.
  std::vector<std::pair<Index, Index>> strips;  // [lo, hi) in x
  for (int s = 0; s < g.channels; ++s) {
    double t = (g.channels == 1) ? 0.5 : double(s) / double(g.channels - 1);
    Index lo = x0 + g.margin +
               Index(std::lround(t * double(usable - g.width)));
    strips.emplace_back(lo, lo + g.width);
  }
  std::vector<Index> bar_rows;
  if (g.bar_row < 0)
    for (int r = 0; r < g.subdomains_y; ++r) bar_rows.push_back(r);
  else
    bar_rows.push_back(g.bar_row);
  std::vector<std::pair<Index, Index>> bars;  // [lo, hi) in y
  for (Index r : bar_rows) {
    Index y0 = r * bh + bh / 2 - g.bar_thickness / 2;
    bars.emplace_back(y0, y0 + g.bar_thickness);
  }
  Index bar_x_lo = strips.front().first;
  Index bar_x_hi = strips.back().second;
  Index y_lo = g.y_margin;
  Index y_hi = mesh.cells[1] - g.y_margin;
  if (y_lo >= y_hi)
    throw std::invalid_argument("channel_field: domain too short for channels");

  double red = std::pow(10.0, contrast_exponent);
  CoefficientField f;
  f.values = Eigen::VectorXd::Ones(mesh.cell_count());
  for (Index c = 0; c < mesh.cell_count(); ++c) {
    auto cc = mesh.cell_coord(c);
    bool hot = false;
    if (cc[1] >= y_lo && cc[1] < y_hi)
      for (auto [lo, hi] : strips)
        if (cc[0] >= lo && cc[0] < hi) hot = true;
    if (!hot && cc[0] >= bar_x_lo && cc[0] < bar_x_hi)
      for (auto [lo, hi] : bars)
        if (cc[1] >= lo && cc[1] < hi) hot = true;
    if (hot) f.values[c] = red;
  }
  validate_coefficient(f, mesh);
  return f;
}

/// File format: first line "nx ny" or "nx ny nz", then one value per cell in
/// row-major (lexicographic) order, whitespace separated.
inline void save_field(const CoefficientField& coeff, const Mesh& mesh,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_field: cannot open " + path);
  out.precision(17);
  for (int k = 0; k < mesh.dim; ++k) out << (k ? " " : "") << mesh.cells[k];
  out << "\n";
  for (Index c = 0; c < coeff.values.size(); ++c) out << coeff.values[c] << "\n";
}

inline CoefficientField load_field(const Mesh& mesh, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_field: cannot open " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::vector<Index> dims;
  Index v;
  while (hs >> v) dims.push_back(v);
  if ((int)dims.size() != mesh.dim)
    throw std::runtime_error("load_field: header rank does not match mesh");
  for (int k = 0; k < mesh.dim; ++k)
    if (dims[k] != mesh.cells[k])
      throw std::runtime_error("load_field: cell counts do not match mesh");
  CoefficientField f;
  f.values.resize(mesh.cell_count());
  for (Index c = 0; c < mesh.cell_count(); ++c)
    if (!(in >> f.values[c]))
      throw std::runtime_error("load_field: too few values in " + path);
  validate_coefficient(f, mesh);
  return f;
}

}  // namespace msgfem
