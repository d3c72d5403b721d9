#pragma once

// Closed convex sets with an exact (or Dykstra-enforced) metric projection.

#include "hfp/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hfp {

class EmptySetError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  using Error::Error;
};

struct ProjectionOptions {
  double tol = 1e-10;
  int max_cycles = 10000;
};

/// Axis-aligned box used for sampling; not necessarily a member set.
struct BoundingBox {
  Vector lo;
  Vector hi;

  BoundingBox inflated(double factor) const {
    Vector c = 0.5 * (lo + hi);
    Vector half = 0.5 * (hi - lo) * factor;
    for (Eigen::Index i = 0; i < half.size(); ++i)
      if (half[i] <= 0.0) half[i] = 0.5 * factor;
    return {c - half, c + half};
  }
};

namespace set_kind {

struct WholeSpace {
  Eigen::Index dim;
};

struct Box {
  Vector lo;
  Vector hi;
};

struct Ball {
  Vector center;
  double radius;
};

// {x : <normal, x> <= offset}
struct Halfspace {
  Vector normal;
  double offset;
};

// {x : <normal, x> = offset}
struct Hyperplane {
  Vector normal;
  double offset;
};

// {x : x >= 0, sum(x) = scale}
struct Simplex {
  Eigen::Index dim;
  double scale;
};

using Primitive = std::variant<WholeSpace, Box, Ball, Halfspace, Hyperplane, Simplex>;

struct Intersection {
  std::vector<Primitive> members;
};

}  // namespace set_kind

namespace detail {

inline Vector project_simplex(const Vector& x, double scale) {
  // Sort-and-threshold: find tau with sum(max(x - tau, 0)) = scale.
  std::vector<double> u(x.data(), x.data() + x.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - scale) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  return (x.array() - tau).max(0.0).matrix();
}

inline Eigen::Index primitive_dim(const set_kind::Primitive& p) {
  return std::visit(
      [](const auto& s) -> Eigen::Index {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, set_kind::WholeSpace> ||
                      std::is_same_v<S, set_kind::Simplex>)
          return s.dim;
        else if constexpr (std::is_same_v<S, set_kind::Box>)
          return s.lo.size();
        else if constexpr (std::is_same_v<S, set_kind::Ball>)
          return s.center.size();
        else
          return s.normal.size();
      },
      p);
}

inline Vector project_primitive(const set_kind::Primitive& p, const Vector& x) {
  return std::visit(
      [&](const auto& s) -> Vector {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, set_kind::WholeSpace>) {
          return x;
        } else if constexpr (std::is_same_v<S, set_kind::Box>) {
          return x.cwiseMax(s.lo).cwiseMin(s.hi);
        } else if constexpr (std::is_same_v<S, set_kind::Ball>) {
          const Vector d = x - s.center;
          const double r = d.norm();
          if (r <= s.radius) return x;
          return s.center + (s.radius / r) * d;
        } else if constexpr (std::is_same_v<S, set_kind::Halfspace>) {
          const double excess = s.normal.dot(x) - s.offset;
          if (excess <= 0.0) return x;
          return x - (excess / s.normal.squaredNorm()) * s.normal;
        } else if constexpr (std::is_same_v<S, set_kind::Hyperplane>) {
          const double excess = s.normal.dot(x) - s.offset;
          return x - (excess / s.normal.squaredNorm()) * s.normal;
        } else {
          return project_simplex(x, s.scale);
        }
      },
      p);
}

inline bool primitive_contains(const set_kind::Primitive& p, const Vector& x, double tol) {
  return std::visit(
      [&](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, set_kind::WholeSpace>) {
          return true;
        } else if constexpr (std::is_same_v<S, set_kind::Box>) {
          return ((x - s.lo).array() >= -tol).all() && ((s.hi - x).array() >= -tol).all();
        } else if constexpr (std::is_same_v<S, set_kind::Ball>) {
          return (x - s.center).norm() <= s.radius + tol;
        } else if constexpr (std::is_same_v<S, set_kind::Halfspace>) {
          return s.normal.dot(x) - s.offset <= tol;
        } else if constexpr (std::is_same_v<S, set_kind::Hyperplane>) {
          return std::abs(s.normal.dot(x) - s.offset) <= tol;
        } else {
          return (x.array() >= -tol).all() && std::abs(x.sum() - s.scale) <= tol;
        }
      },
      p);
}

inline std::optional<BoundingBox> primitive_bounds(const set_kind::Primitive& p) {
  return std::visit(
      [](const auto& s) -> std::optional<BoundingBox> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, set_kind::Box>) {
          return BoundingBox{s.lo, s.hi};
        } else if constexpr (std::is_same_v<S, set_kind::Ball>) {
          const Vector r = Vector::Constant(s.center.size(), s.radius);
          return BoundingBox{s.center - r, s.center + r};
        } else if constexpr (std::is_same_v<S, set_kind::Simplex>) {
          return BoundingBox{Vector::Zero(s.dim), Vector::Constant(s.dim, s.scale)};
        } else {
          return std::nullopt;
        }
      },
      p);
}

}  // namespace detail

/// Descriptor of a nonempty closed convex set C together with P_C.
class ConvexSet {
 public:
  using Storage = std::variant<set_kind::Primitive, set_kind::Intersection>;

  static ConvexSet whole_space(Eigen::Index dim) {
    if (dim < 1) throw Error("whole_space: dimension must be >= 1");
    return ConvexSet(set_kind::Primitive{set_kind::WholeSpace{dim}});
  }

  static ConvexSet box(Vector lo, Vector hi) {
    require_same_dim("box", lo, hi);
    if (lo.size() < 1) throw Error("box: dimension must be >= 1");
    if (!lo.allFinite() || !hi.allFinite()) throw Error("box: bounds must be finite");
    if ((lo.array() > hi.array()).any()) throw Error("box: lo must be <= hi componentwise");
    return ConvexSet(set_kind::Primitive{set_kind::Box{std::move(lo), std::move(hi)}});
  }

  static ConvexSet box(Eigen::Index dim, double lo, double hi) {
    return box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
  }

  static ConvexSet ball(Vector center, double radius) {
    if (center.size() < 1) throw Error("ball: dimension must be >= 1");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw Error("ball: radius must be positive");
    return ConvexSet(set_kind::Primitive{set_kind::Ball{std::move(center), radius}});
  }

  static ConvexSet halfspace(Vector normal, double offset) {
    check_normal("halfspace", normal);
    return ConvexSet(set_kind::Primitive{set_kind::Halfspace{std::move(normal), offset}});
  }

  static ConvexSet hyperplane(Vector normal, double offset) {
    check_normal("hyperplane", normal);
    return ConvexSet(set_kind::Primitive{set_kind::Hyperplane{std::move(normal), offset}});
  }

  static ConvexSet simplex(Eigen::Index dim, double scale = 1.0) {
    if (dim < 1) throw Error("simplex: dimension must be >= 1");
    if (!(scale > 0.0)) throw Error("simplex: scale must be positive");
    return ConvexSet(set_kind::Primitive{set_kind::Simplex{dim, scale}});
  }

  /// Members must be primitives of equal dimension. Nonemptiness is checked
  /// by a Dykstra feasibility probe started at the origin.
  static ConvexSet intersection(std::vector<ConvexSet> members,
                                ProjectionOptions opts = {}) {
    if (members.empty()) throw Error("intersection: no members");
    set_kind::Intersection in;
    for (auto& m : members) {
      auto* p = std::get_if<set_kind::Primitive>(&m.storage_);
      if (p == nullptr) throw Error("intersection: members must be primitive sets");
      in.members.push_back(std::move(*p));
    }
    const Eigen::Index d = detail::primitive_dim(in.members.front());
    for (const auto& p : in.members)
      if (detail::primitive_dim(p) != d) throw DimensionError("intersection", d, detail::primitive_dim(p));
    ConvexSet out(std::move(in));
    out.opts_ = opts;
    out.probe_nonempty();
    return out;
  }

  Eigen::Index dim() const {
    if (auto* p = std::get_if<set_kind::Primitive>(&storage_)) return detail::primitive_dim(*p);
    return detail::primitive_dim(std::get<set_kind::Intersection>(storage_).members.front());
  }

  const Storage& storage() const { return storage_; }
  bool is_intersection() const { return std::holds_alternative<set_kind::Intersection>(storage_); }
  const ProjectionOptions& projection_options() const { return opts_; }

  Vector project(const Vector& x) const {
    if (x.size() != dim()) throw DimensionError("project", dim(), x.size());
    if (auto* p = std::get_if<set_kind::Primitive>(&storage_)) return detail::project_primitive(*p, x);
    auto r = dykstra(x);
    if (!r) throw ProjectionError("project: Dykstra exceeded " + std::to_string(opts_.max_cycles) + " cycles");
    return *r;
  }

  bool contains(const Vector& x, double tol) const {
    if (x.size() != dim()) throw DimensionError("contains", dim(), x.size());
    if (auto* p = std::get_if<set_kind::Primitive>(&storage_)) return detail::primitive_contains(*p, x, tol);
    const auto& in = std::get<set_kind::Intersection>(storage_);
    return std::all_of(in.members.begin(), in.members.end(),
                       [&](const auto& m) { return detail::primitive_contains(m, x, tol); });
  }

  /// Tightest axis-aligned box known to contain the set, if the set is bounded.
  std::optional<BoundingBox> bounds() const {
    if (auto* p = std::get_if<set_kind::Primitive>(&storage_)) return detail::primitive_bounds(*p);
    std::optional<BoundingBox> out;
    for (const auto& m : std::get<set_kind::Intersection>(storage_).members) {
      auto b = detail::primitive_bounds(m);
      if (!b) continue;
      if (!out) {
        out = b;
      } else {
        out->lo = out->lo.cwiseMax(b->lo);
        out->hi = out->hi.cwiseMin(b->hi);
      }
    }
    return out;
  }

  bool is_bounded() const { return bounds().has_value(); }

 private:
  explicit ConvexSet(Storage s) : storage_(std::move(s)) {}

  static void check_normal(const char* where, const Vector& normal) {
    if (normal.size() < 1) throw Error(std::string(where) + ": dimension must be >= 1");
    if (!normal.allFinite() || normal.squaredNorm() == 0.0)
      throw Error(std::string(where) + ": normal must be nonzero and finite");
  }

  // Dykstra's alternating projection; nullopt when the cycle cap is hit.
  std::optional<Vector> dykstra(const Vector& x0) const {
    const auto& members = std::get<set_kind::Intersection>(storage_).members;
    if (contains(x0, 0.0)) return x0;
    Vector x = x0;
    std::vector<Vector> incr(members.size(), Vector::Zero(x0.size()));
    for (int cycle = 0; cycle < opts_.max_cycles; ++cycle) {
      const Vector start = x;
      double incr_change = 0.0;
      for (std::size_t i = 0; i < members.size(); ++i) {
        const Vector shifted = x + incr[i];
        x = detail::project_primitive(members[i], shifted);
        const Vector next = shifted - x;
        incr_change += (next - incr[i]).squaredNorm();
        incr[i] = next;
      }
      // The iterate can stall for a cycle while the corrections still move.
      if ((x - start).norm() <= opts_.tol && std::sqrt(incr_change) <= opts_.tol && contains(x, opts_.tol)) return x;
    }
    return std::nullopt;
  }

  void probe_nonempty() const {
    const Vector origin = Vector::Zero(dim());
    auto r = dykstra(origin);
    if (!r) throw EmptySetError("intersection: feasibility probe failed (set appears empty)");
  }

  Storage storage_;
  ProjectionOptions opts_{};
};

}  // namespace hfp
