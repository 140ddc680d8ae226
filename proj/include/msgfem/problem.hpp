#pragma once

#include <functional>

#include <Eigen/SparseCholesky>

#include "assembly.hpp"

namespace msgfem {

/// Maps mesh nodes to interior (free) dofs. Dirichlet conditions are imposed
/// on the whole domain boundary.
struct DofMap {
  std::vector<Index> interior;   // global node ids of free dofs, ascending
  std::vector<Index> boundary;   // global node ids on the domain boundary
  std::vector<Index> dof_of;     // node id -> interior dof index, -1 if fixed

  Index n_interior() const { return (Index)interior.size(); }
};

inline DofMap build_dofmap(const Mesh& mesh) {
  DofMap d;
  d.dof_of.assign(mesh.node_count(), -1);
  for (Index i = 0; i < mesh.node_count(); ++i) {
    if (mesh.is_boundary_node(i)) {
      d.boundary.push_back(i);
    } else {
      d.dof_of[i] = (Index)d.interior.size();
      d.interior.push_back(i);
    }
  }
  return d;
}

/// Fully assembled fine-scale Dirichlet problem: K is the full (Neumann-like)
/// stiffness matrix, K0 the interior block, f0 the interior right-hand side
/// after eliminating the boundary values, lift the boundary data extended by
/// zero to all nodes.
struct FineProblem {
  Mesh mesh;
  CoefficientField coeff;
  DofMap dofs;
  SpMat K;    // node_count x node_count
  SpMat K0;   // interior block
  Eigen::VectorXd f_cells;  // cell-wise constant source
  Eigen::VectorXd load;  // full-length load vector
  Eigen::VectorXd lift;  // boundary data at boundary nodes, 0 elsewhere
  Eigen::VectorXd f0;    // interior rhs

  Eigen::VectorXd embed_interior(const Eigen::VectorXd& u0) const {
    Eigen::VectorXd u = lift;
    for (Index i = 0; i < dofs.n_interior(); ++i) u[dofs.interior[i]] += u0[i];
    return u;
  }
  Eigen::VectorXd restrict_interior(const Eigen::VectorXd& u) const {
    Eigen::VectorXd u0(dofs.n_interior());
    for (Index i = 0; i < dofs.n_interior(); ++i) u0[i] = u[dofs.interior[i]];
    return u0;
  }
};

/// g maps a node position to its Dirichlet value.
using BoundaryData = std::function<double(const std::array<double, 3>&)>;

inline FineProblem build_problem(const Mesh& mesh, CoefficientField coeff,
                                 const Eigen::VectorXd& f_cells,
                                 const BoundaryData& g = nullptr) {
  FineProblem p;
  p.mesh = mesh;
  p.coeff = std::move(coeff);
  p.dofs = build_dofmap(mesh);
  p.K = assemble_stiffness(mesh, p.coeff);
  p.f_cells = f_cells;
  p.load = assemble_load(mesh, f_cells);
  p.lift = Eigen::VectorXd::Zero(mesh.node_count());
  if (g)
    for (Index b : p.dofs.boundary) p.lift[b] = g(mesh.node_position(b));

  Index n0 = p.dofs.n_interior();
  // Interior block and eliminated rhs: f0 = (load - K*lift) restricted.
  std::vector<Triplet> trips;
  for (Index col = 0; col < p.K.outerSize(); ++col) {
    Index jc = p.dofs.dof_of[col];
    if (jc < 0) continue;
    for (SpMat::InnerIterator it(p.K, col); it; ++it) {
      Index ir = p.dofs.dof_of[it.row()];
      if (ir >= 0) trips.emplace_back((int)ir, (int)jc, it.value());
    }
  }
  p.K0.resize(n0, n0);
  p.K0.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd r = p.load - p.K * p.lift;
  p.f0 = p.restrict_interior(r);
  return p;
}

/// Direct fine-scale solve (reference solution), full-length vector.
inline Eigen::VectorXd solve_fine(const FineProblem& p) {
  Eigen::SimplicialLDLT<SpMat> chol(p.K0);
  if (chol.info() != Eigen::Success)
    throw std::runtime_error("solve_fine: factorization failed");
  Eigen::VectorXd u0 = chol.solve(p.f0);
  return p.embed_interior(u0);
}

inline double relative_energy_error(const FineProblem& p,
                                    const Eigen::VectorXd& u_ref,
                                    const Eigen::VectorXd& u) {
  return energy_norm(p.K, u_ref - u) / energy_norm(p.K, u_ref);
}

}  // namespace msgfem
