#pragma once

// Seeded sampling used by certification, problem generators and tests.
// std::mt19937_64 has a fully specified output sequence; the conversion to
// doubles below is done by hand because std::uniform_real_distribution is
// implementation-defined.

#include "hfp/core.hpp"

#include <cstdint>
#include <random>

namespace hfp {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  Vector uniform_in_box(const Vector& lo, const Vector& hi) {
    require_same_dim("Rng::uniform_in_box", lo, hi);
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = uniform(lo[i], hi[i]);
    return x;
  }

  Vector normal_vector(Eigen::Index dim) {
    Vector x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = normal();
    return x;
  }

  LinearMap normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    LinearMap m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hfp
