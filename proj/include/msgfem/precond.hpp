#pragma once

#include <limits>

#include "gfem.hpp"

namespace msgfem {

/// Two-level restricted additive Schwarz preconditioner with multiplicative
/// (hybrid) coarse correction:
///   B r = z1 + Phi K_S^{-1} Phi^T (r - K0 z1),
///   z1  = sum_i R_i^T X_i K_i^{-1} R_i r,
/// where R_i restricts to the interior dofs strictly inside omega_star_i,
/// K_i is the corresponding diagonal block of K0 (zero Dirichlet on the
/// oversampling boundary) and X_i weighs with the partition of unity.
class TwoLevelPreconditioner {
 public:
  TwoLevelPreconditioner(const FineProblem& prob, const Decomposition& d,
                         const PartitionOfUnity& pu, const CoarseSpace& cs)
      : prob_(&prob), cs_(&cs) {
    for (int i = 0; i < d.size(); ++i) {
      const Subdomain& s = d.subdomains[i];
      Patch p = make_patch(prob.mesh, prob.coeff, s.omega_star_cells);
      std::vector<int> dofs;
      Eigen::VectorXd chi;
      std::vector<double> cvals;
      for (int j = 0; j < p.n(); ++j) {
        if (p.cls[j] != NodeClass::kInterior) continue;
        Index dof = prob.dofs.dof_of[p.nodes[j]];
        if (dof < 0)
          throw std::logic_error("preconditioner: interior patch node fixed");
        dofs.push_back((int)dof);
        cvals.push_back(pu.chi[i][p.nodes[j]]);
      }
      SpMat Ki = submatrix(prob.K0, dofs, dofs);
      local_.push_back(std::make_unique<SpdFactorization>(Ki));
      dofs_.push_back(std::move(dofs));
      chi_.push_back(
          Eigen::Map<Eigen::VectorXd>(cvals.data(), (int)cvals.size()));
    }
  }

  Eigen::VectorXd level_one(const Eigen::VectorXd& r) const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(r.size());
    for (int i = 0; i < (int)dofs_.size(); ++i) {
      Eigen::VectorXd ri((int)dofs_[i].size());
      for (int j = 0; j < (int)dofs_[i].size(); ++j) ri[j] = r[dofs_[i][j]];
      Eigen::VectorXd zi = local_[i]->solve(ri);
      for (int j = 0; j < (int)dofs_[i].size(); ++j)
        z[dofs_[i][j]] += chi_[i][j] * zi[j];
    }
    return z;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd z1 = level_one(r);
    Eigen::VectorXd rc =
        cs_->basis0.transpose() * (r - prob_->K0 * z1).eval();
    return z1 + cs_->basis0 * cs_->K_S_fact.solve(rc);
  }

 private:
  const FineProblem* prob_;
  const CoarseSpace* cs_;
  std::vector<std::vector<int>> dofs_;
  std::vector<Eigen::VectorXd> chi_;
  std::vector<std::unique_ptr<SpdFactorization>> local_;
};

constexpr int kIterInfinity = std::numeric_limits<int>::max();

struct SolveReport {
  std::string method;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;  // kIterInfinity when not converged
  std::vector<double> residuals;  // preconditioned residual 2-norms, [0]=start
  std::vector<double> energy_errors;       // vs reference, if provided
  std::vector<double> contraction_factors; // energy error ratios
  Eigen::VectorXd solution;  // interior dofs
};

/// Preconditioned Richardson iteration u <- u + B(f0 - K0 u) on the interior
/// system. Stops when the preconditioned residual drops below tol relative to
/// its initial value; flags divergence when it exceeds 10x the initial value.
inline SolveReport richardson(const FineProblem& prob,
                              const TwoLevelPreconditioner& B,
                              double tol = 1e-8, int max_iterations = 1000,
                              const Eigen::VectorXd* u0 = nullptr,
                              const Eigen::VectorXd* u_ref0 = nullptr) {
  SolveReport rep;
  rep.method = "richardson";
  Eigen::VectorXd u = u0 ? *u0
                         : Eigen::VectorXd::Zero(prob.dofs.n_interior());
  Eigen::VectorXd r = prob.f0 - prob.K0 * u;
  Eigen::VectorXd z = B.apply(r);
  double res0 = z.norm();
  rep.residuals.push_back(res0);
  auto track_error = [&](const Eigen::VectorXd& ui) {
    if (!u_ref0) return;
    Eigen::VectorXd e = *u_ref0 - ui;
    rep.energy_errors.push_back(energy_norm(prob.K0, e));
    size_t m = rep.energy_errors.size();
    if (m > 1 && rep.energy_errors[m - 2] > 0.0)
      rep.contraction_factors.push_back(rep.energy_errors[m - 1] /
                                        rep.energy_errors[m - 2]);
  };
  track_error(u);
  if (res0 == 0.0) {
    rep.converged = true;
    rep.iterations = 0;
    rep.solution = u;
    return rep;
  }
  for (int it = 1; it <= max_iterations; ++it) {
    u += z;
    r = prob.f0 - prob.K0 * u;
    z = B.apply(r);
    double res = z.norm();
    rep.residuals.push_back(res);
    track_error(u);
    if (res <= tol * res0) {
      rep.converged = true;
      rep.iterations = it;
      rep.solution = u;
      return rep;
    }
    if (res > 10.0 * res0 || !std::isfinite(res)) {
      rep.diverged = true;
      break;
    }
  }
  rep.iterations = kIterInfinity;
  rep.solution = u;
  return rep;
}

/// Left-preconditioned GMRES (no restart) on the interior system, minimizing
/// the Euclidean norm of the preconditioned residual. Arnoldi with modified
/// Gram-Schmidt; the residual history comes from the Givens recurrence.
inline SolveReport gmres(const FineProblem& prob,
                         const TwoLevelPreconditioner& B, double tol = 1e-8,
                         int max_iterations = 1000,
                         const Eigen::VectorXd* u0 = nullptr) {
  SolveReport rep;
  rep.method = "gmres";
  Index n = prob.dofs.n_interior();
  Eigen::VectorXd u = u0 ? *u0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r0 = B.apply(prob.f0 - prob.K0 * u);
  double beta = r0.norm();
  rep.residuals.push_back(beta);
  if (beta == 0.0) {
    rep.converged = true;
    rep.solution = u;
    return rep;
  }
  int m = max_iterations;
  std::vector<Eigen::VectorXd> V;
  V.push_back(r0 / beta);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  std::vector<double> cs, sn;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
  g[0] = beta;
  int k = 0;
  for (; k < m; ++k) {
    Eigen::VectorXd w = B.apply(prob.K0 * V[k]);
    for (int j = 0; j <= k; ++j) {
      H(j, k) = w.dot(V[j]);
      w -= H(j, k) * V[j];
    }
    H(k + 1, k) = w.norm();
    bool breakdown = H(k + 1, k) <= 1e-300;
    if (!breakdown) V.push_back(w / H(k + 1, k));
    // Apply previous Givens rotations, then a new one.
    for (int j = 0; j < k; ++j) {
      double t = cs[j] * H(j, k) + sn[j] * H(j + 1, k);
      H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
      H(j, k) = t;
    }
    double denom = std::hypot(H(k, k), H(k + 1, k));
    cs.push_back(denom == 0.0 ? 1.0 : H(k, k) / denom);
    sn.push_back(denom == 0.0 ? 0.0 : H(k + 1, k) / denom);
    H(k, k) = denom;
    H(k + 1, k) = 0.0;
    g[k + 1] = -sn[k] * g[k];
    g[k] *= cs[k];
    double res = std::abs(g[k + 1]);
    rep.residuals.push_back(res);
    if (res <= tol * beta || breakdown) {
      ++k;
      rep.converged = true;
      break;
    }
  }
  int kk = std::min(k, m);
  // Solve the triangular system and form the update.
  Eigen::VectorXd y =
      H.topLeftCorner(kk, kk).triangularView<Eigen::Upper>().solve(
          g.head(kk));
  for (int j = 0; j < kk; ++j) u += y[j] * V[j];
  rep.iterations = rep.converged ? kk : kIterInfinity;
  rep.solution = u;
  return rep;
}

/// Measured Richardson contraction versus the one-shot multiscale error.
struct ContractionReport {
  double theta_measured = 0.0;  // max energy-error ratio over the first steps
  double theta_bound = 0.0;     // one-shot relative multiscale error
  bool within_bound = false;
};

inline ContractionReport contraction_check(const FineProblem& prob,
                                           const TwoLevelPreconditioner& B,
                                           const Eigen::VectorXd& u_G_full,
                                           int steps = 20,
                                           std::uint64_t seed = 777) {
  Eigen::VectorXd u_ref_full = solve_fine(prob);
  Eigen::VectorXd u_ref0 = prob.restrict_interior(u_ref_full);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u0(prob.dofs.n_interior());
  double scale = u_ref0.cwiseAbs().maxCoeff();
  for (Index i = 0; i < u0.size(); ++i) u0[i] = scale * gauss(rng);
  SolveReport rep =
      richardson(prob, B, 0.0, steps, &u0, &u_ref0);
  ContractionReport out;
  // Ratios are meaningful only while the error sits well above the roundoff
  // floor of the fine reference solve; past that they are noise around one.
  double floor = 1e-12 * rep.energy_errors.front();
  for (size_t j = 0; j + 1 < rep.energy_errors.size(); ++j) {
    if (rep.energy_errors[j] <= floor || rep.energy_errors[j + 1] <= floor)
      break;
    out.theta_measured =
        std::max(out.theta_measured, rep.contraction_factors[j]);
  }
  out.theta_bound = relative_energy_error(prob, u_ref_full, u_G_full);
  out.within_bound = out.theta_measured <= out.theta_bound + 0.05;
  return out;
}

}  // namespace msgfem
