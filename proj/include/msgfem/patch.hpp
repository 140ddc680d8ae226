#pragma once

#include <unordered_map>

#include "assembly.hpp"
#include "factorization.hpp"

namespace msgfem {

/// Node classes within a patch (a union of cells):
///  kInterior - all incident cells belong to the patch, node not on the
///              domain boundary
///  kInterface - on the patch boundary but not on the domain boundary
///  kPhysical - on the domain boundary
enum class NodeClass : std::uint8_t { kInterior, kInterface, kPhysical };

/// A local subproblem over a cell subset: local stiffness matrix over the
/// patch nodes plus the node classification used for Dirichlet/interface
/// handling in all local solves.
struct Patch {
  std::vector<Index> cells;   // global cell ids
  std::vector<Index> nodes;   // global node ids, ascending
  std::unordered_map<Index, int> local_of;  // global node -> local index
  std::vector<NodeClass> cls;
  SpMat A;  // |nodes| x |nodes| stiffness over the patch cells

  int n() const { return (int)nodes.size(); }
  int local(Index g) const {
    auto it = local_of.find(g);
    return it == local_of.end() ? -1 : it->second;
  }
  std::vector<int> of_class(NodeClass c) const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i)
      if (cls[i] == c) out.push_back(i);
    return out;
  }
};

inline Patch make_patch(const Mesh& mesh, const CoefficientField& coeff,
                        std::vector<Index> cells) {
  Patch p;
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  p.cells = std::move(cells);
  p.nodes = nodes_of_cells(mesh, p.cells);
  p.local_of.reserve(p.nodes.size() * 2);
  for (int i = 0; i < (int)p.nodes.size(); ++i) p.local_of[p.nodes[i]] = i;

  std::unordered_map<Index, char> cellset;
  cellset.reserve(p.cells.size() * 2);
  for (Index c : p.cells) cellset[c] = 1;

  p.cls.resize(p.nodes.size());
  for (int i = 0; i < (int)p.nodes.size(); ++i) {
    Index g = p.nodes[i];
    if (mesh.is_boundary_node(g)) {
      p.cls[i] = NodeClass::kPhysical;
      continue;
    }
    bool interior = true;
    for (Index c : cells_of_node(mesh, g))
      if (!cellset.count(c)) interior = false;
    p.cls[i] = interior ? NodeClass::kInterior : NodeClass::kInterface;
  }

  // Local assembly: identical element matrices scaled by the cell coefficient.
  Eigen::MatrixXd E0 = unit_element_stiffness(mesh);
  int m = mesh.corners_per_cell();
  std::vector<Triplet> trips;
  trips.reserve(p.cells.size() * m * m);
  for (Index c : p.cells) {
    auto cn = mesh.cell_nodes(c);
    double a = coeff.values[c];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        trips.emplace_back(p.local_of[cn[i]], p.local_of[cn[j]], a * E0(i, j));
  }
  p.A.resize(p.n(), p.n());
  p.A.setFromTriplets(trips.begin(), trips.end());
  return p;
}

/// Extract the (rows, cols) submatrix of a sparse matrix by index lists.
inline SpMat submatrix(const SpMat& A, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
  std::vector<int> rmap(A.rows(), -1);
  for (int i = 0; i < (int)rows.size(); ++i) rmap[rows[i]] = i;
  std::vector<Triplet> trips;
  for (int j = 0; j < (int)cols.size(); ++j)
    for (SpMat::InnerIterator it(A, cols[j]); it; ++it)
      if (rmap[it.row()] >= 0) trips.emplace_back(rmap[it.row()], j, it.value());
  SpMat S((int)rows.size(), (int)cols.size());
  S.setFromTriplets(trips.begin(), trips.end());
  return S;
}

/// Solve the patch problem with zero Dirichlet data on the whole patch
/// boundary (both interface and domain-boundary nodes), rhs given at all
/// patch nodes. Returns a patch-length vector (zeros on the boundary).
inline Eigen::VectorXd solve_patch_dirichlet0(const Patch& p,
                                              const Eigen::VectorXd& rhs) {
  auto I = p.of_class(NodeClass::kInterior);
  SpMat A_II = submatrix(p.A, I, I);
  SpdFactorization chol(A_II);
  Eigen::VectorXd b((int)I.size());
  for (int i = 0; i < (int)I.size(); ++i) b[i] = rhs[I[i]];
  Eigen::VectorXd x = chol.solve(b);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(p.n());
  for (int i = 0; i < (int)I.size(); ++i) u[I[i]] = x[i];
  return u;
}

/// Discrete operator-harmonic extension: given values on the patch boundary
/// (interface and domain-boundary nodes), fill the interior so the stiffness
/// rows at interior nodes vanish. `trace` is patch-length; interior entries
/// are ignored and overwritten.
inline Eigen::VectorXd harmonic_extend_patch(const Patch& p,
                                             const Eigen::VectorXd& trace) {
  auto I = p.of_class(NodeClass::kInterior);
  std::vector<int> B;
  for (int i = 0; i < p.n(); ++i)
    if (p.cls[i] != NodeClass::kInterior) B.push_back(i);
  Eigen::VectorXd u = trace;
  if (I.empty()) return u;
  SpMat A_II = submatrix(p.A, I, I);
  SpMat A_IB = submatrix(p.A, I, B);
  Eigen::VectorXd tb((int)B.size());
  for (int i = 0; i < (int)B.size(); ++i) tb[i] = trace[B[i]];
  SpdFactorization chol(A_II);
  Eigen::VectorXd rhs = -(A_IB * tb);
  Eigen::VectorXd x = chol.solve(rhs);
  for (int i = 0; i < (int)I.size(); ++i) u[I[i]] = x[i];
  return u;
}

/// Solve with Dirichlet data only on the domain boundary part of the patch
/// and natural (do-nothing) conditions on the rest of the patch boundary.
/// Used for the boundary part of the particular function.
inline Eigen::VectorXd solve_patch_boundary_data(const Patch& p,
                                                 const Eigen::VectorXd& rhs,
                                                 const Eigen::VectorXd& g) {
  std::vector<int> F;  // free: interior + interface
  std::vector<int> D;  // fixed: domain boundary
  for (int i = 0; i < p.n(); ++i)
    (p.cls[i] == NodeClass::kPhysical ? D : F).push_back(i);
  SpMat A_FF = submatrix(p.A, F, F);
  SpMat A_FD = submatrix(p.A, F, D);
  Eigen::VectorXd gd((int)D.size());
  for (int i = 0; i < (int)D.size(); ++i) gd[i] = g[D[i]];
  Eigen::VectorXd b((int)F.size());
  for (int i = 0; i < (int)F.size(); ++i) b[i] = rhs[F[i]];
  b -= A_FD * gd;
  SpdFactorization chol(A_FF);
  Eigen::VectorXd x = chol.solve(b);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(p.n());
  for (int i = 0; i < (int)F.size(); ++i) u[F[i]] = x[i];
  for (int i = 0; i < (int)D.size(); ++i) u[D[i]] = gd[i];
  return u;
}

}  // namespace msgfem
