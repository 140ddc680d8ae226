#pragma once

#include <fstream>
#include <iomanip>

#include "assembly.hpp"

namespace msgfem {

/// MatrixMarket coordinate export, 1-based indices.
inline void save_matrix_market(const SpMat& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_matrix_market: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  out << std::setprecision(17);
  for (Index col = 0; col < A.outerSize(); ++col)
    for (SpMat::InnerIterator it(A, col); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

/// One value per line, 17 significant digits.
inline void save_vector_csv(const Eigen::VectorXd& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_vector_csv: cannot open " + path);
  out << std::setprecision(17);
  for (Index i = 0; i < v.size(); ++i) out << v[i] << "\n";
}

inline Eigen::VectorXd load_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_vector_csv: cannot open " + path);
  std::vector<double> vals;
  double x;
  while (in >> x) vals.push_back(x);
  return Eigen::Map<Eigen::VectorXd>(vals.data(), (Index)vals.size());
}

}  // namespace msgfem
