// Independent reference implementations used to cross-check the library.
// These deliberately avoid the library's assembly and eigensolver code paths:
// quadrature with a different rule, dense factorizations, and an explicitly
// constructed harmonic basis.
#pragma once

#include <Eigen/Dense>

#include <msgfem/patch.hpp>
#include <msgfem/problem.hpp>

namespace oracles {

using msgfem::Index;
using msgfem::Mesh;

/// Dense stiffness matrix via 3-point Gauss quadrature per axis (the library
/// uses 2 points), basis functions evaluated from first principles.
inline Eigen::MatrixXd dense_stiffness(const Mesh& mesh,
                                       const msgfem::CoefficientField& coeff) {
  int d = mesh.dim;
  int m = mesh.corners_per_cell();
  Index nn = mesh.node_count();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nn, nn);
  // 3-point Gauss on [0,1]
  const double q[3] = {0.5 * (1.0 - std::sqrt(3.0 / 5.0)), 0.5,
                       0.5 * (1.0 + std::sqrt(3.0 / 5.0))};
  const double wq[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  int nq = 1;
  for (int k = 0; k < d; ++k) nq *= 3;
  double vol = 1.0;
  for (int k = 0; k < d; ++k) vol *= mesh.h[k];

  for (Index c = 0; c < mesh.cell_count(); ++c) {
    auto cn = mesh.cell_nodes(c);
    Eigen::MatrixXd Ke = Eigen::MatrixXd::Zero(m, m);
    for (int iq = 0; iq < nq; ++iq) {
      std::array<int, 3> qi{0, 0, 0};
      int t = iq;
      for (int k = 0; k < d; ++k) {
        qi[k] = t % 3;
        t /= 3;
      }
      double w = vol;
      for (int k = 0; k < d; ++k) w *= wq[qi[k]];
      Eigen::MatrixXd grad(m, d);
      for (int v = 0; v < m; ++v)
        for (int k = 0; k < d; ++k) {
          double g = 1.0;
          for (int j = 0; j < d; ++j) {
            double x = q[qi[j]];
            bool up = v & (1 << j);
            if (j == k)
              g *= (up ? 1.0 : -1.0) / mesh.h[j];
            else
              g *= up ? x : 1.0 - x;
          }
          grad(v, k) = g;
        }
      Ke += w * grad * grad.transpose();
    }
    Ke *= coeff.values[c];
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) K(cn[a], cn[b]) += Ke(a, b);
  }
  return K;
}

/// Dense Dirichlet solve with full-pivot LU.
inline Eigen::VectorXd dense_solve(const msgfem::FineProblem& p) {
  Eigen::MatrixXd K0 = Eigen::MatrixXd(p.K0);
  Eigen::VectorXd u0 = Eigen::FullPivLU<Eigen::MatrixXd>(K0).solve(p.f0);
  return p.embed_interior(u0);
}

struct DenseEvp {
  Eigen::VectorXd lambda;    // ascending
  Eigen::MatrixXd vectors;   // patch-length columns
};

/// Reference harmonic eigensolve: the discrete harmonic basis is built one
/// interface dof at a time (unit trace, dense interior solve), then the
/// generalized problem is solved on that explicit basis.
inline DenseEvp harmonic_evp(const msgfem::Patch& p,
                             const Eigen::VectorXd& weight) {
  using msgfem::NodeClass;
  std::vector<int> F, Ipos, Gpos;
  for (int i = 0; i < p.n(); ++i)
    if (p.cls[i] != NodeClass::kPhysical) F.push_back(i);
  for (int i = 0; i < (int)F.size(); ++i)
    (p.cls[F[i]] == NodeClass::kInterior ? Ipos : Gpos).push_back(i);
  int nF = (int)F.size(), nI = (int)Ipos.size(), nG = (int)Gpos.size();

  Eigen::MatrixXd A = Eigen::MatrixXd(msgfem::submatrix(p.A, F, F));
  Eigen::VectorXd w(nF);
  for (int i = 0; i < nF; ++i) w[i] = weight[F[i]];
  Eigen::MatrixXd M = w.asDiagonal() * A * w.asDiagonal();

  Eigen::MatrixXd AII(nI, nI);
  for (int a = 0; a < nI; ++a)
    for (int b = 0; b < nI; ++b) AII(a, b) = A(Ipos[a], Ipos[b]);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(AII);

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nF, nG);
  for (int g = 0; g < nG; ++g) {
    H(Gpos[g], g) = 1.0;
    if (nI > 0) {
      Eigen::VectorXd rhs(nI);
      for (int a = 0; a < nI; ++a) rhs[a] = -A(Ipos[a], Gpos[g]);
      Eigen::VectorXd ui = lu.solve(rhs);
      for (int a = 0; a < nI; ++a) H(Ipos[a], g) = ui[a];
    }
  }

  Eigen::MatrixXd S = H.transpose() * A * H;
  Eigen::MatrixXd Mh = H.transpose() * M * H;
  S = 0.5 * (S + S.transpose());
  Mh = 0.5 * (Mh + Mh.transpose());
  // Pencil M c = mu (S + M) c, right side positive definite; lambda=(1-mu)/mu.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Mh, S + Mh);
  DenseEvp out;
  out.lambda.resize(nG);
  Eigen::MatrixXd U(nF, nG);
  for (int j = 0; j < nG; ++j) {
    double mu = es.eigenvalues()[nG - 1 - j];
    out.lambda[j] = std::max(0.0, (1.0 - mu) / std::max(mu, 1e-300));
    U.col(j) = H * es.eigenvectors().col(nG - 1 - j);
  }
  out.vectors = Eigen::MatrixXd::Zero(p.n(), nG);
  for (int j = 0; j < nG; ++j)
    for (int i = 0; i < nF; ++i) out.vectors(F[i], j) = U(i, j);
  return out;
}

}  // namespace oracles
