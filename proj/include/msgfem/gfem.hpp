#pragma once

#include "local_spaces.hpp"

namespace msgfem {

/// Global multiscale (coarse) space: columns are I_h(chi_i u_k^ext) for the
/// first n_i eigenfunctions of subdomain i, expressed in global node ids.
/// Columns are ordered subdomain-major. Linearly dependent columns are
/// removed by a rank-revealing pass on the coarse stiffness matrix.
struct CoarseSpace {
  SpMat basis;  // node_count x dim, full-length columns (zero on boundary)
  std::vector<std::pair<int, int>> column_meta;   // (subdomain, eigenindex)
  std::vector<std::pair<int, int>> dropped;       // removed as dependent
  SpMat basis0;            // interior-dof rows only (n_interior x dim)
  Eigen::MatrixXd K_S;     // coarse stiffness, dense
  Eigen::LDLT<Eigen::MatrixXd> K_S_fact;

  Index dim() const { return basis.cols(); }
};

namespace detail {

/// Diagonal-pivoted Cholesky rank detection; returns the kept column set.
/// The test runs on the diagonally scaled matrix so that it is invariant
/// under per-column rescaling (column norms vary wildly with the
/// coefficient contrast).
inline std::vector<int> spd_rank_reveal(Eigen::MatrixXd G, double rel_tol) {
  int n = (int)G.rows();
  Eigen::VectorXd s(n);
  for (int j = 0; j < n; ++j)
    s[j] = G(j, j) > 0.0 ? 1.0 / std::sqrt(G(j, j)) : 0.0;
  G = s.asDiagonal() * G * s.asDiagonal();
  double tol = rel_tol;  // scaled diagonal starts at one
  std::vector<int> kept;
  std::vector<char> used(n, 0);
  for (int step = 0; step < n; ++step) {
    int piv = -1;
    double best = tol;
    for (int j = 0; j < n; ++j)
      if (!used[j] && G(j, j) > best) {
        best = G(j, j);
        piv = j;
      }
    if (piv < 0) break;
    used[piv] = 1;
    kept.push_back(piv);
    double d = G(piv, piv);
    // Snapshot the pivot row: the in-place update below must use the values
    // from the current Schur complement for every remaining row.
    Eigen::VectorXd prow = G.row(piv);
    for (int r = 0; r < n; ++r) {
      if (used[r]) continue;
      double f = prow[r] / d;
      for (int c = 0; c < n; ++c)
        if (!used[c]) G(r, c) -= f * prow[c];
      G(r, piv) = 0.0;
      G(piv, r) = 0.0;
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace detail

inline CoarseSpace build_coarse_space(const FineProblem& prob,
                                      const Decomposition& d,
                                      const PartitionOfUnity& pu,
                                      const std::vector<LocalSpectrum>& spectra,
                                      const std::vector<int>& n_per_subdomain,
                                      double drop_tol = 1e-12) {
  if ((int)spectra.size() != d.size() ||
      (int)n_per_subdomain.size() != d.size())
    throw std::invalid_argument(
        "build_coarse_space: one spectrum and one count per subdomain");
  Index nn = prob.mesh.node_count();
  std::vector<Triplet> trips;
  std::vector<std::pair<int, int>> meta;
  for (int i = 0; i < d.size(); ++i) {
    const LocalSpectrum& sp = spectra[i];
    int ni = n_per_subdomain[i];
    if (ni < 0 || ni > sp.vectors_ext.cols())
      throw std::invalid_argument(
          "build_coarse_space: subdomain " + std::to_string(i) +
          " provides too few eigenvectors");
    for (int k = 0; k < ni; ++k) {
      int col = (int)meta.size();
      for (int r = 0; r < (int)sp.star_nodes.size(); ++r) {
        Index g = sp.star_nodes[r];
        double v = pu.chi[i][g] * sp.vectors_ext(r, k);
        if (v != 0.0) trips.emplace_back((int)g, col, v);
      }
      meta.emplace_back(i, k);
    }
  }
  CoarseSpace cs;
  cs.basis.resize(nn, (Index)meta.size());
  cs.basis.setFromTriplets(trips.begin(), trips.end());
  cs.column_meta = meta;

  // Interior-dof restriction and coarse stiffness.
  auto restrict_rows = [&](const SpMat& B) {
    std::vector<Triplet> t;
    for (int j = 0; j < B.outerSize(); ++j)
      for (SpMat::InnerIterator it(B, j); it; ++it) {
        Index r = prob.dofs.dof_of[it.row()];
        if (r >= 0) t.emplace_back((int)r, j, it.value());
      }
    SpMat out(prob.dofs.n_interior(), B.cols());
    out.setFromTriplets(t.begin(), t.end());
    return out;
  };
  cs.basis0 = restrict_rows(cs.basis);
  Eigen::MatrixXd KS = Eigen::MatrixXd(
      SpMat(cs.basis0.transpose() * (prob.K0 * cs.basis0).eval()));
  KS = 0.5 * (KS + KS.transpose());

  std::vector<int> kept = detail::spd_rank_reveal(KS, drop_tol);
  if ((int)kept.size() < (int)meta.size()) {
    std::vector<char> keep((int)meta.size(), 0);
    for (int j : kept) keep[j] = 1;
    for (int j = 0; j < (int)meta.size(); ++j)
      if (!keep[j]) cs.dropped.push_back(meta[j]);
    // Rebuild with the dependent columns removed.
    std::vector<Triplet> t2;
    std::vector<std::pair<int, int>> meta2;
    for (int jj = 0; jj < (int)kept.size(); ++jj) {
      int j = kept[jj];
      for (SpMat::InnerIterator it(cs.basis, j); it; ++it)
        t2.emplace_back((int)it.row(), jj, it.value());
      meta2.push_back(meta[j]);
    }
    SpMat B(nn, (Index)kept.size());
    B.setFromTriplets(t2.begin(), t2.end());
    cs.basis = std::move(B);
    cs.column_meta = std::move(meta2);
    cs.basis0 = restrict_rows(cs.basis);
    Eigen::MatrixXd KS2(kept.size(), kept.size());
    for (int a = 0; a < (int)kept.size(); ++a)
      for (int b = 0; b < (int)kept.size(); ++b)
        KS2(a, b) = KS(kept[a], kept[b]);
    KS = std::move(KS2);
  }
  cs.K_S = KS;
  cs.K_S_fact.compute(cs.K_S);
  if (cs.K_S_fact.info() != Eigen::Success)
    throw std::runtime_error("build_coarse_space: coarse matrix factorization "
                             "failed after rank filtering");
  return cs;
}

/// Multiscale solution: u_G = u_p + sum over coarse basis with coefficients
/// from the Galerkin problem tested against the coarse space.
struct GfemSolution {
  Eigen::VectorXd u_p;     // glued particular function, full-length
  Eigen::VectorXd u_s;     // coarse correction, full-length
  Eigen::VectorXd u_G;     // u_p + u_s
  Eigen::VectorXd alpha;   // coarse coefficients
};

inline GfemSolution coarse_solve(const FineProblem& prob, const CoarseSpace& cs,
                                 const Eigen::VectorXd& u_p) {
  GfemSolution sol;
  sol.u_p = u_p;  // carries the Dirichlet data on the domain boundary
  // Residual functional of the particular function, tested on interior dofs.
  Eigen::VectorXd r = prob.load - prob.K * u_p;
  Eigen::VectorXd r0 = prob.restrict_interior(r);
  sol.alpha = cs.K_S_fact.solve(cs.basis0.transpose() * r0);
  Eigen::VectorXd us0 = cs.basis0 * sol.alpha;
  sol.u_s = Eigen::VectorXd::Zero(prob.mesh.node_count());
  for (Index i = 0; i < prob.dofs.n_interior(); ++i)
    sol.u_s[prob.dofs.interior[i]] = us0[i];
  sol.u_G = sol.u_p + sol.u_s;
  return sol;
}

}  // namespace msgfem
