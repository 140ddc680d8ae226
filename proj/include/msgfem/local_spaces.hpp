#pragma once

#include <chrono>
#include <memory>
#include <random>

#include "partition_of_unity.hpp"
#include "patch.hpp"
#include "problem.hpp"

namespace msgfem {

enum class Variant { kFull, kRing };

inline std::string variant_name(Variant v) {
  return v == Variant::kFull ? "full" : "ring";
}

enum class EigBackend { kSaddleShiftInvert, kDenseSchur };

struct EigOptions {
  int nev = 10;
  double tol = 1e-10;
  int max_iterations = 500;
  std::uint64_t seed = 12345;
  double shift_scale = 1e-8;  // shift = -shift_scale * mean stiffness diagonal
  EigBackend backend = EigBackend::kSaddleShiftInvert;
};

/// Result of one local eigenproblem over discrete operator-harmonic functions
/// on a domain D (oversampling domain for the full variant, the oversampled
/// ring for the ring variant):
///   a_D(u, v) = lambda * a_D(I_h(w u), I_h(w v))  with cut-off w.
/// Eigenvalues ascend; for subdomains away from the domain boundary the first
/// one is zero (constants). Vectors are M-orthonormal where possible.
struct LocalSpectrum {
  int subdomain = -1;
  Variant variant = Variant::kFull;
  bool boundary = false;            // zero trace imposed on the domain boundary
  Eigen::VectorXd lambda;
  std::vector<Index> domain_nodes;  // global node ids of the eigen domain
  Eigen::MatrixXd vectors;          // |domain_nodes| x nev
  std::vector<Index> star_nodes;    // global node ids of omega_star
  Eigen::MatrixXd vectors_ext;      // |star_nodes| x nev (ring: extended)
  bool degenerate_fallback = false;
  int iterations = 0;
  double max_residual = 0.0;
  FactorStats factor_stats;         // saddle-point factorization fill-in
  double solve_seconds = 0.0;
};

namespace detail {

struct EvpCore {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd U;  // patch-length columns (zeros at physical nodes)
  int iterations = 0;
  double max_residual = 0.0;
  FactorStats stats;
};

inline void canonical_signs(Eigen::MatrixXd& U) {
  for (int j = 0; j < U.cols(); ++j) {
    double mx = U.col(j).cwiseAbs().maxCoeff();
    for (int i = 0; i < U.rows(); ++i) {
      if (std::abs(U(i, j)) > 1e-8 * mx) {
        if (U(i, j) < 0) U.col(j) = -U.col(j);
        break;
      }
    }
  }
}

/// Rayleigh-Ritz on the pencil (A, M) restricted to the columns of Y, done
/// through the auxiliary pencil M c = mu (A + M) c whose right matrix is
/// positive definite on harmonic functions: lambda = (1 - mu) / mu.
inline void rayleigh_ritz(const Eigen::MatrixXd& GA, const Eigen::MatrixXd& GM,
                          Eigen::VectorXd& lambda, Eigen::MatrixXd& C) {
  Eigen::MatrixXd R = GA + GM;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(GM, R);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("local eigensolver: dense Rayleigh-Ritz failed");
  int p = (int)GA.rows();
  lambda.resize(p);
  C.resize(p, p);
  // mu ascending = lambda descending; reverse to ascending lambda.
  for (int j = 0; j < p; ++j) {
    double mu = es.eigenvalues()[p - 1 - j];
    double mu_safe = std::max(mu, 1e-300);
    lambda[j] = std::max(0.0, (1.0 - mu) / mu_safe);
    C.col(j) = es.eigenvectors().col(p - 1 - j);
    // Normalize in M: c' GM c = mu for (A+M)-normalized vectors.
    if (mu > 1e-12) C.col(j) /= std::sqrt(mu);
  }
}

/// Shift-inverted subspace iteration over the discrete harmonic subspace,
/// enforced through a saddle-point system with the interior stiffness rows as
/// constraints.
inline EvpCore solve_harmonic_evp_saddle(const Patch& p,
                                         const Eigen::VectorXd& weight,
                                         const EigOptions& opt) {
  // Free dofs: everything but the domain boundary. Within them, interior
  // nodes carry the harmonicity constraint and interface nodes the trace.
  std::vector<int> F;
  for (int i = 0; i < p.n(); ++i)
    if (p.cls[i] != NodeClass::kPhysical) F.push_back(i);
  std::vector<int> Ipos, Gpos;  // positions within F
  for (int i = 0; i < (int)F.size(); ++i)
    (p.cls[F[i]] == NodeClass::kInterior ? Ipos : Gpos).push_back(i);
  int nF = (int)F.size(), nI = (int)Ipos.size(), nG = (int)Gpos.size();
  if (nG == 0)
    throw std::runtime_error(
        "local eigensolver: no interface dofs (harmonic space is trivial)");

  SpMat A = submatrix(p.A, F, F);
  Eigen::VectorXd w(nF);
  for (int i = 0; i < nF; ++i) w[i] = weight[F[i]];
  SpMat M = A;
  for (int j = 0; j < M.outerSize(); ++j)
    for (SpMat::InnerIterator it(M, j); it; ++it)
      it.valueRef() *= w[it.row()] * w[j];

  double diag_scale = A.diagonal().mean();
  double sigma = -opt.shift_scale * diag_scale;

  // Saddle system [[A - sigma M, C^T], [C, 0]], C = interior rows of A.
  std::vector<int> row_of_I(nF, -1);
  for (int i = 0; i < nI; ++i) row_of_I[Ipos[i]] = i;
  std::vector<Triplet> trips;
  SpMat As = A - sigma * M;
  for (int j = 0; j < As.outerSize(); ++j)
    for (SpMat::InnerIterator it(As, j); it; ++it)
      trips.emplace_back((int)it.row(), j, it.value());
  for (int j = 0; j < A.outerSize(); ++j)
    for (SpMat::InnerIterator it(A, j); it; ++it) {
      int ic = row_of_I[it.row()];
      if (ic >= 0) {
        trips.emplace_back(nF + ic, j, it.value());
        trips.emplace_back(j, nF + ic, it.value());
      }
    }
  SpMat S(nF + nI, nF + nI);
  S.setFromTriplets(trips.begin(), trips.end());
  SparseFactorization saddle(S);

  SpMat A_II = submatrix(A, Ipos, Ipos);
  SpMat A_IG = submatrix(A, Ipos, Gpos);
  std::unique_ptr<SpdFactorization> cholII;
  if (nI > 0) cholII = std::make_unique<SpdFactorization>(A_II);

  auto gather = [](const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out((int)idx.size());
    for (int i = 0; i < (int)idx.size(); ++i) out[i] = v[idx[i]];
    return out;
  };

  int nev = std::min(opt.nev, nG);
  int pdim = std::min(nG, nev + std::max(5, nev));

  // Random interface data extended harmonically.
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_harmonic_block = [&](int cols) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(nF, cols);
    for (int j = 0; j < cols; ++j)
      for (int i : Gpos) X(i, j) = gauss(rng);
    if (nI > 0) {
      Eigen::MatrixXd XG(nG, cols);
      for (int i = 0; i < nG; ++i) XG.row(i) = X.row(Gpos[i]);
      Eigen::MatrixXd XI = cholII->solve(Eigen::MatrixXd(-(A_IG * XG)));
      for (int i = 0; i < nI; ++i) X.row(Ipos[i]) = XI.row(i);
    }
    return X;
  };
  Eigen::MatrixXd X = random_harmonic_block(pdim);

  EvpCore out;
  out.stats = saddle.stats();
  Eigen::VectorXd lambda;
  Eigen::MatrixXd U;
  double abs_floor = opt.tol * diag_scale;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    // One shift-inverted block step within the constrained space.
    Eigen::MatrixXd Y(nF, pdim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nF + nI);
    for (int j = 0; j < pdim; ++j) {
      rhs.head(nF) = M * X.col(j);
      Eigen::VectorXd sol = saddle.solve(rhs);
      Y.col(j) = sol.head(nF);
    }
    // Orthonormal basis of the iterate, then Rayleigh-Ritz. The QR must be
    // rank-revealing: when the spectrum spans many orders of magnitude, one
    // shift-inverted step nearly collapses the block, and a plain QR would
    // complete the basis with directions outside the constrained space.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Y);
    qr.setThreshold(1e-8);
    int rank = std::min<int>((int)qr.rank(), pdim);
    Eigen::MatrixXd Q =
        qr.householderQ() * Eigen::MatrixXd::Identity(nF, pdim);
    if (rank < pdim) {
      // Keep the range of the iterate and top the block up with fresh random
      // discrete-harmonic directions, so every basis vector satisfies the
      // interior constraint.
      Eigen::MatrixXd B(nF, pdim);
      B.leftCols(rank) = Q.leftCols(rank);
      B.rightCols(pdim - rank) = random_harmonic_block(pdim - rank);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr2(B);
      Q = qr2.householderQ() * Eigen::MatrixXd::Identity(nF, pdim);
    }
    Eigen::MatrixXd AQ = A * Q, MQ = M * Q;
    Eigen::MatrixXd GA = Q.transpose() * AQ, GM = Q.transpose() * MQ;
    GA = 0.5 * (GA + GA.transpose());
    GM = 0.5 * (GM + GM.transpose());
    Eigen::MatrixXd C;
    rayleigh_ritz(GA, GM, lambda, C);
    U = Q * C;

    // Residuals of the leading pairs, projected onto the harmonic space
    // (the saddle solve already enforces the interior constraint on U).
    out.max_residual = 0.0;
    bool done = true;
    for (int k = 0; k < nev; ++k) {
      Eigen::VectorXd Au = A * U.col(k), Mu = M * U.col(k);
      Eigen::VectorXd eAu = gather(Au, Gpos);
      Eigen::VectorXd eMu = gather(Mu, Gpos);
      if (nI > 0) {
        eAu -= A_IG.transpose() * cholII->solve(gather(Au, Ipos));
        eMu -= A_IG.transpose() * cholII->solve(gather(Mu, Ipos));
      }
      double num = (eAu - lambda[k] * eMu).norm();
      double den = eAu.norm() + lambda[k] * eMu.norm();
      double res = num / std::max(den, 1e-300);
      // Below the absolute floor the relative measure is 0/0 noise (e.g.
      // the constant mode, where both terms vanish): count it as converged.
      if (num > abs_floor * U.col(k).norm()) {
        if (res > opt.tol) done = false;
        out.max_residual = std::max(out.max_residual, std::min(res, 1.0));
      }
    }
    if (done) break;
    X = U;
  }

  canonical_signs(U);
  out.lambda = lambda.head(nev);
  out.U = Eigen::MatrixXd::Zero(p.n(), nev);
  for (int k = 0; k < nev; ++k)
    for (int i = 0; i < nF; ++i) out.U(F[i], k) = U(i, k);
  return out;
}

/// Dense reference backend: explicit harmonic basis through a Schur
/// complement, then a dense generalized eigensolve. Intended for modest patch
/// sizes and as an independent check of the sparse path.
inline EvpCore solve_harmonic_evp_dense(const Patch& p,
                                        const Eigen::VectorXd& weight,
                                        const EigOptions& opt) {
  std::vector<int> F;
  for (int i = 0; i < p.n(); ++i)
    if (p.cls[i] != NodeClass::kPhysical) F.push_back(i);
  std::vector<int> Ipos, Gpos;
  for (int i = 0; i < (int)F.size(); ++i)
    (p.cls[F[i]] == NodeClass::kInterior ? Ipos : Gpos).push_back(i);
  int nF = (int)F.size(), nI = (int)Ipos.size(), nG = (int)Gpos.size();
  if (nG == 0)
    throw std::runtime_error(
        "local eigensolver: no interface dofs (harmonic space is trivial)");
  if (nF > 6000)
    throw std::runtime_error("dense eigensolver backend: patch too large");

  Eigen::MatrixXd A = Eigen::MatrixXd(submatrix(p.A, F, F));
  Eigen::VectorXd w(nF);
  for (int i = 0; i < nF; ++i) w[i] = weight[F[i]];
  Eigen::MatrixXd M = w.asDiagonal() * A * w.asDiagonal();

  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(nF, nG);
  for (int i = 0; i < nG; ++i) E(Gpos[i], i) = 1.0;
  if (nI > 0) {
    Eigen::MatrixXd A_II(nI, nI), A_IG(nI, nG);
    for (int i = 0; i < nI; ++i)
      for (int j = 0; j < nI; ++j) A_II(i, j) = A(Ipos[i], Ipos[j]);
    for (int i = 0; i < nI; ++i)
      for (int j = 0; j < nG; ++j) A_IG(i, j) = A(Ipos[i], Gpos[j]);
    Eigen::MatrixXd W = A_II.ldlt().solve(A_IG);
    for (int i = 0; i < nI; ++i) E.row(Ipos[i]) = -W.row(i);
  }
  Eigen::MatrixXd GA = E.transpose() * A * E;
  Eigen::MatrixXd GM = E.transpose() * M * E;
  GA = 0.5 * (GA + GA.transpose());
  GM = 0.5 * (GM + GM.transpose());
  Eigen::VectorXd lambda;
  Eigen::MatrixXd C;
  rayleigh_ritz(GA, GM, lambda, C);

  int nev = std::min(opt.nev, nG);
  Eigen::MatrixXd U = E * C.leftCols(nev);
  canonical_signs(U);
  EvpCore out;
  out.lambda = lambda.head(nev);
  out.iterations = 1;
  out.U = Eigen::MatrixXd::Zero(p.n(), nev);
  for (int k = 0; k < nev; ++k)
    for (int i = 0; i < nF; ++i) out.U(F[i], k) = U(i, k);
  return out;
}

inline EvpCore solve_harmonic_evp(const Patch& p, const Eigen::VectorXd& weight,
                                  const EigOptions& opt) {
  return opt.backend == EigBackend::kSaddleShiftInvert
             ? solve_harmonic_evp_saddle(p, weight, opt)
             : solve_harmonic_evp_dense(p, weight, opt);
}

}  // namespace detail

inline LocalSpectrum eigensolve_full(const Mesh& mesh,
                                     const CoefficientField& coeff,
                                     const Decomposition& d,
                                     const PartitionOfUnity& pu, int i,
                                     const EigOptions& opt) {
  const Subdomain& s = d.subdomains[i];
  auto t0 = std::chrono::steady_clock::now();
  Patch p = make_patch(mesh, coeff, s.omega_star_cells);
  Eigen::VectorXd w(p.n());
  for (int k = 0; k < p.n(); ++k) w[k] = pu.chi[i][p.nodes[k]];
  detail::EvpCore core = detail::solve_harmonic_evp(p, w, opt);

  LocalSpectrum out;
  out.subdomain = i;
  out.variant = Variant::kFull;
  out.boundary = s.boundary;
  out.lambda = core.lambda;
  out.domain_nodes = p.nodes;
  out.vectors = core.U;
  out.star_nodes = p.nodes;
  out.vectors_ext = core.U;
  out.iterations = core.iterations;
  out.max_residual = core.max_residual;
  out.factor_stats = core.stats;
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

inline LocalSpectrum eigensolve_ring(const Mesh& mesh,
                                     const CoefficientField& coeff,
                                     const Decomposition& d,
                                     const PartitionOfUnity& pu, int i,
                                     const EigOptions& opt) {
  const Subdomain& s = d.subdomains[i];
  if (s.ring_degenerate) {
    // The ring fills the whole oversampling domain; the ring variant
    // coincides with the full one.
    LocalSpectrum out = eigensolve_full(mesh, coeff, d, pu, i, opt);
    out.variant = Variant::kRing;
    out.degenerate_fallback = true;
    return out;
  }
  auto t0 = std::chrono::steady_clock::now();
  Patch p = make_patch(mesh, coeff, s.ring_star_cells);
  Eigen::VectorXd w(p.n());
  for (int k = 0; k < p.n(); ++k) w[k] = pu.chi_ring[i][p.nodes[k]];
  detail::EvpCore core = detail::solve_harmonic_evp(p, w, opt);

  LocalSpectrum out;
  out.subdomain = i;
  out.variant = Variant::kRing;
  out.boundary = s.boundary;
  out.lambda = core.lambda;
  out.domain_nodes = p.nodes;
  out.vectors = core.U;
  out.iterations = core.iterations;
  out.max_residual = core.max_residual;
  out.factor_stats = core.stats;

  // Operator-harmonic extension of every eigenfunction from the ring into
  // the remaining part of the oversampling domain (omega_tilde), with the
  // eigenfunction's values as Dirichlet data on the inner interface and zero
  // on the domain boundary.
  Patch pt = make_patch(mesh, coeff, s.omega_tilde_cells);
  int nev = (int)core.lambda.size();
  out.star_nodes = nodes_of_cells(mesh, s.omega_star_cells);
  out.vectors_ext = Eigen::MatrixXd::Zero((int)out.star_nodes.size(), nev);
  Eigen::VectorXd trace = Eigen::VectorXd::Zero(pt.n());
  for (int k = 0; k < nev; ++k) {
    for (int j = 0; j < pt.n(); ++j) {
      if (pt.cls[j] == NodeClass::kInterior) continue;
      Index g = pt.nodes[j];
      int lr = p.local(g);
      if (lr >= 0)
        trace[j] = core.U(lr, k);
      else if (mesh.is_boundary_node(g))
        trace[j] = 0.0;
      else
        throw std::logic_error(
            "eigensolve_ring: interface node outside the ring");
    }
    Eigen::VectorXd ext = harmonic_extend_patch(pt, trace);
    for (int r = 0; r < (int)out.star_nodes.size(); ++r) {
      Index g = out.star_nodes[r];
      int lt = pt.local(g);
      if (lt >= 0) {
        out.vectors_ext(r, k) = ext[lt];
      } else {
        int lr = p.local(g);
        if (lr < 0)
          throw std::logic_error("eigensolve_ring: node not covered");
        out.vectors_ext(r, k) = core.U(lr, k);
      }
    }
  }
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

inline LocalSpectrum eigensolve(const Mesh& mesh, const CoefficientField& coeff,
                                const Decomposition& d,
                                const PartitionOfUnity& pu, int i,
                                Variant variant, const EigOptions& opt) {
  return variant == Variant::kFull ? eigensolve_full(mesh, coeff, d, pu, i, opt)
                                   : eigensolve_ring(mesh, coeff, d, pu, i, opt);
}

/// Local function given by values on an explicit node set.
struct LocalFunction {
  std::vector<Index> nodes;
  Eigen::VectorXd values;
};

/// Local particular functions psi_i on the oversampling domains (zero
/// Dirichlet trace, local source), plus the boundary-data part for subdomains
/// whose oversampling domain touches the domain boundary, and the glued
/// global particular function u_p = sum_i I_h(chi_i psi_i).
struct ParticularSolution {
  std::vector<LocalFunction> psi;
  Eigen::VectorXd u_p;  // full node-length
};

inline LocalFunction particular_function(const FineProblem& prob,
                                         const Decomposition& d, int i) {
  const Subdomain& s = d.subdomains[i];
  Patch p = make_patch(prob.mesh, prob.coeff, s.omega_star_cells);
  Eigen::VectorXd load =
      assemble_load(prob.mesh, prob.f_cells, &s.omega_star_cells);
  Eigen::VectorXd rhs(p.n());
  for (int j = 0; j < p.n(); ++j) rhs[j] = load[p.nodes[j]];
  Eigen::VectorXd u = solve_patch_dirichlet0(p, rhs);
  if (s.boundary) {
    // Boundary-data part: Dirichlet values on the domain boundary, natural
    // conditions on the rest of the patch boundary, zero source.
    Eigen::VectorXd g(p.n());
    for (int j = 0; j < p.n(); ++j) g[j] = prob.lift[p.nodes[j]];
    u += solve_patch_boundary_data(p, Eigen::VectorXd::Zero(p.n()), g);
  }
  return {p.nodes, u};
}

inline ParticularSolution build_particular(const FineProblem& prob,
                                           const Decomposition& d,
                                           const PartitionOfUnity& pu) {
  ParticularSolution out;
  out.u_p = Eigen::VectorXd::Zero(prob.mesh.node_count());
  for (int i = 0; i < d.size(); ++i) {
    out.psi.push_back(particular_function(prob, d, i));
    const LocalFunction& f = out.psi.back();
    for (int j = 0; j < (int)f.nodes.size(); ++j)
      out.u_p[f.nodes[j]] += pu.chi[i][f.nodes[j]] * f.values[j];
  }
  return out;
}

/// The quasi-interpolation weight functional
///   M_i(v) = a_omega(I_h(w v), w) / a_omega(w, w)
/// with w the subdomain's cut-off (chi or chi - eta). Reproduces constants:
/// M_i(c) = c.
struct MeanFunctional {
  std::vector<Index> nodes;
  Eigen::VectorXd weights;

  double operator()(const Eigen::VectorXd& v_global) const {
    double s = 0.0;
    for (int j = 0; j < (int)nodes.size(); ++j)
      s += weights[j] * v_global[nodes[j]];
    return s;
  }
  /// v given on an explicit node list covering this functional's support.
  double apply_on(const std::vector<Index>& vnodes,
                  const Eigen::VectorXd& v) const {
    std::unordered_map<Index, int> loc;
    loc.reserve(vnodes.size() * 2);
    for (int j = 0; j < (int)vnodes.size(); ++j) loc[vnodes[j]] = j;
    double s = 0.0;
    for (int j = 0; j < (int)nodes.size(); ++j) {
      auto it = loc.find(nodes[j]);
      if (it != loc.end()) s += weights[j] * v[it->second];
    }
    return s;
  }
};

inline MeanFunctional build_mean_functional(const Mesh& mesh,
                                            const CoefficientField& coeff,
                                            const Decomposition& d,
                                            const PartitionOfUnity& pu, int i,
                                            Variant variant) {
  const Subdomain& s = d.subdomains[i];
  Patch p = make_patch(mesh, coeff, s.omega_cells);
  const Eigen::VectorXd& w_glob =
      variant == Variant::kFull ? pu.chi[i] : pu.chi_ring[i];
  Eigen::VectorXd w(p.n());
  for (int j = 0; j < p.n(); ++j) w[j] = w_glob[p.nodes[j]];
  Eigen::VectorXd q = p.A * w;
  double denom = w.dot(q);
  if (!(denom > 0.0))
    throw std::runtime_error("mean functional: cut-off has zero energy");
  MeanFunctional m;
  m.nodes = p.nodes;
  m.weights = (w.array() * q.array() / denom).matrix();
  return m;
}

}  // namespace msgfem
