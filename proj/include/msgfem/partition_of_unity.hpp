#pragma once

#include <Eigen/Dense>

#include "decomposition.hpp"

namespace msgfem {

/// Nodal partition of unity chi_i subordinate to the overlapping cover, plus
/// the one-layer cut-off eta_i and the ring function chi_i^R = chi_i - eta_i.
///
/// chi_i is built from integer distance weights: at a node, w_i is the
/// minimal number of fine layers to a side of omega_i not lying on the domain
/// boundary (0 outside omega_i), normalized by the sum over all subdomains.
/// eta_i is the nodal indicator of the region one layer inside omega_tilde_i,
/// so the Q1 interpolants transition linearly over a single layer.
struct PartitionOfUnity {
  std::vector<Eigen::VectorXd> chi, eta, chi_ring;  // full node-length vectors
  std::vector<double> grad_chi_delta;       // max |grad chi_i| * delta_i
  std::vector<double> grad_chi_ring_delta;  // max |grad chi_i^R| * delta_i
};

namespace detail {

inline double pu_weight(const Mesh& mesh, const Subdomain& s,
                        const std::array<Index, 3>& nc) {
  double w = std::numeric_limits<double>::infinity();
  for (int k = 0; k < mesh.dim; ++k) {
    // node range of omega on this axis: [omega.lo, omega.hi]
    if (nc[k] < s.omega.lo[k] || nc[k] > s.omega.hi[k]) return 0.0;
    if (!s.side_on_boundary[k][0])
      w = std::min(w, double(nc[k] - s.omega.lo[k]));
    if (!s.side_on_boundary[k][1])
      w = std::min(w, double(s.omega.hi[k] - nc[k]));
  }
  if (!std::isfinite(w)) w = 1.0;  // single subdomain covering everything
  return w;
}

// Largest Q1 gradient component of a nodal function over a cell set equals
// the largest axis-aligned edge difference divided by the edge length.
inline double max_gradient(const Mesh& mesh, const Eigen::VectorXd& v,
                           const std::vector<Index>& cells) {
  double g = 0.0;
  for (Index c : cells) {
    auto cn = mesh.cell_nodes(c);
    int m = mesh.corners_per_cell();
    for (int a = 0; a < m; ++a)
      for (int k = 0; k < mesh.dim; ++k) {
        int b = a ^ (1 << k);
        if (b < a) continue;
        g = std::max(g, std::abs(v[cn[a]] - v[cn[b]]) / mesh.h[k]);
      }
  }
  return g;
}

}  // namespace detail

inline PartitionOfUnity build_partition_of_unity(const Mesh& mesh,
                                                 const Decomposition& d) {
  Index nn = mesh.node_count();
  int M = d.size();
  PartitionOfUnity pu;
  pu.chi.assign(M, Eigen::VectorXd::Zero(nn));
  pu.eta.assign(M, Eigen::VectorXd::Zero(nn));
  pu.chi_ring.assign(M, Eigen::VectorXd::Zero(nn));

  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(nn);
  std::vector<Eigen::VectorXd> w(M, Eigen::VectorXd::Zero(nn));
  for (int i = 0; i < M; ++i) {
    const Subdomain& s = d.subdomains[i];
    for (Index node : nodes_of_cells(mesh, s.omega_cells)) {
      double wi = detail::pu_weight(mesh, s, mesh.node_coord(node));
      w[i][node] = wi;
      wsum[node] += wi;
    }
  }
  for (Index node = 0; node < nn; ++node)
    if (!(wsum[node] > 0.0))
      throw std::runtime_error("partition of unity: node not covered");

  for (int i = 0; i < M; ++i) {
    const Subdomain& s = d.subdomains[i];
    Eigen::VectorXd& chi = pu.chi[i];
    for (Index node : nodes_of_cells(mesh, s.omega_cells))
      chi[node] = w[i][node] / wsum[node];

    // eta_i: 1 on nodes at least one layer inside omega_tilde, 0 on the
    // boundary of omega_tilde and outside it. Domain-boundary sides count as
    // inside.
    Eigen::VectorXd& eta = pu.eta[i];
    for (Index node : nodes_of_cells(mesh, s.omega_tilde_cells)) {
      auto nc = mesh.node_coord(node);
      bool inside = true;
      for (int k = 0; k < mesh.dim; ++k) {
        if (!s.side_on_boundary[k][0] && nc[k] < s.omega_tilde.lo[k] + 1)
          inside = false;
        if (!s.side_on_boundary[k][1] && nc[k] > s.omega_tilde.hi[k] - 1)
          inside = false;
      }
      if (inside) eta[node] = 1.0;
    }
    pu.chi_ring[i] = chi - eta;

    pu.grad_chi_delta.push_back(
        detail::max_gradient(mesh, chi, s.omega_cells) * s.delta);
    pu.grad_chi_ring_delta.push_back(
        detail::max_gradient(mesh, pu.chi_ring[i], s.omega_cells) * s.delta);
  }
  return pu;
}

}  // namespace msgfem
