#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "coefficients.hpp"
#include "mesh.hpp"

namespace msgfem {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Q1 stiffness matrix of the reference cell [0,h0]x[0,h1](x[0,h2]) with unit
/// coefficient, corners in lexicographic order. 2-point Gauss per axis, which
/// integrates the bilinear-gradient products exactly.
inline Eigen::MatrixXd unit_element_stiffness(const Mesh& mesh) {
  int d = mesh.dim;
  int m = mesh.corners_per_cell();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  double vol = 1.0;
  for (int k = 0; k < d; ++k) vol *= mesh.h[k];
  int nq = 1 << d;
  for (int q = 0; q < nq; ++q) {
    std::array<double, 3> x{0.5, 0.5, 0.5};
    for (int k = 0; k < d; ++k) x[k] = gp[(q >> k) & 1];
    // gradients of the m corner basis functions at x (reference coords)
    Eigen::MatrixXd grad(m, d);
    for (int v = 0; v < m; ++v) {
      for (int k = 0; k < d; ++k) {
        double g = 1.0;
        for (int j = 0; j < d; ++j) {
          bool up = v & (1 << j);
          double f = up ? x[j] : (1.0 - x[j]);
          if (j == k)
            g *= (up ? 1.0 : -1.0) / mesh.h[j];
          else
            g *= f;
        }
        grad(v, k) = g;
      }
    }
    double w = vol / double(nq);
    K += w * grad * grad.transpose();
  }
  return K;
}

/// Assemble the global stiffness matrix over a subset of cells (all cells by
/// default), entries indexed by global node ids. Coefficient is cell-wise
/// constant, so each cell contributes coeff[c] * unit element matrix.
inline SpMat assemble_stiffness(const Mesh& mesh, const CoefficientField& coeff,
                                const std::vector<Index>* cells = nullptr) {
  validate_coefficient(coeff, mesh);
  Eigen::MatrixXd E0 = unit_element_stiffness(mesh);
  int m = mesh.corners_per_cell();
  std::vector<Triplet> trips;
  auto add_cell = [&](Index c) {
    auto cn = mesh.cell_nodes(c);
    double a = coeff.values[c];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        trips.emplace_back((int)cn[i], (int)cn[j], a * E0(i, j));
  };
  Index ncell = cells ? (Index)cells->size() : mesh.cell_count();
  trips.reserve(ncell * m * m);
  if (cells)
    for (Index c : *cells) add_cell(c);
  else
    for (Index c = 0; c < mesh.cell_count(); ++c) add_cell(c);
  SpMat K(mesh.node_count(), mesh.node_count());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

/// Assemble the load vector for a cell-wise constant source over a subset of
/// cells (all cells by default). For Q1 each corner receives f_c * vol / 2^d.
inline Eigen::VectorXd assemble_load(const Mesh& mesh,
                                     const Eigen::VectorXd& f_cells,
                                     const std::vector<Index>* cells = nullptr) {
  if (f_cells.size() != mesh.cell_count())
    throw std::invalid_argument("assemble_load: one source value per cell");
  double vol = 1.0;
  for (int k = 0; k < mesh.dim; ++k) vol *= mesh.h[k];
  int m = mesh.corners_per_cell();
  double wcorner = vol / double(m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.node_count());
  auto add_cell = [&](Index c) {
    auto cn = mesh.cell_nodes(c);
    for (int v = 0; v < m; ++v) b[cn[v]] += f_cells[c] * wcorner;
  };
  if (cells)
    for (Index c : *cells) add_cell(c);
  else
    for (Index c = 0; c < mesh.cell_count(); ++c) add_cell(c);
  return b;
}

inline double energy_norm(const SpMat& K, const Eigen::VectorXd& v) {
  double q = v.dot(K * v);
  // Guard against roundoff below zero for vectors in the kernel.
  return std::sqrt(std::max(q, 0.0));
}

}  // namespace msgfem
