#pragma once

// Finite-dimensional realization of the ambient Hilbert space: dense real
// vectors and square linear maps backed by Eigen.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace hfp {

using Vector = Eigen::VectorXd;
using LinearMap = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(const char* where, Eigen::Index a, Eigen::Index b)
      : Error(std::string(where) + ": dimension mismatch (" +
              std::to_string(a) + " vs " + std::to_string(b) + ")") {}
};

inline bool all_finite(const Vector& x) { return x.allFinite(); }

inline void require_same_dim(const char* where, const Vector& x,
                             const Vector& y) {
  if (x.size() != y.size()) throw DimensionError(where, x.size(), y.size());
}

inline double inner(const Vector& x, const Vector& y) {
  require_same_dim("inner", x, y);
  return x.dot(y);
}

inline double norm(const Vector& x) { return x.norm(); }

inline double distance(const Vector& x, const Vector& y) {
  require_same_dim("distance", x, y);
  return (x - y).norm();
}

inline Vector apply_linear(const LinearMap& m, const Vector& x) {
  if (m.rows() != m.cols()) throw DimensionError("apply_linear", m.rows(), m.cols());
  if (m.cols() != x.size()) throw DimensionError("apply_linear", m.cols(), x.size());
  return m * x;
}

inline Vector make_vector(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline bool is_symmetric(const LinearMap& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Eigenvalues of a symmetric matrix in ascending order.
inline Vector symmetric_eigenvalues(const LinearMap& m) {
  Eigen::SelfAdjointEigenSolver<LinearMap> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace hfp
