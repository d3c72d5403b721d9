#include "hfp/eq.hpp"
#include "hfp/random.hpp"

#include <gtest/gtest.h>

using namespace hfp;

namespace {

std::vector<Vector> grid_1d(double lo, double hi, double step) {
  std::vector<Vector> ys;
  const int n = static_cast<int>(std::round((hi - lo) / step));
  for (int i = 0; i <= n; ++i) ys.push_back(make_vector({lo + i * step}));
  return ys;
}

// Grid oracle: worst negative part of G(z,y) + phi(y) - phi(z) + (1/r)(y-z)(z-x)
// for 1-D instances written out by hand.
template <class G, class Phi>
double grid_violation(G g, Phi phi, double r, double x, double z, const std::vector<Vector>& ys) {
  double worst = 0;
  for (const auto& yv : ys) {
    const double y = yv[0];
    worst = std::max(worst, -(g(z, y) + phi(y) - phi(z) + (y - z) * (z - x) / r));
  }
  return worst;
}

ResolventSpec linear_1d() {
  ResolventSpec s;
  s.G = Bifunction::linear(CertifiedOperator::identity(1));
  s.C = ConvexSet::box(1, 0, 10);
  s.r = 1;
  return s;
}

std::vector<ResolventSpec> builtin_specs() {
  Rng rng(12);
  std::vector<ResolventSpec> out;
  ResolventSpec a;
  a.C = ConvexSet::box(3, -1, 1);
  out.push_back(a);  // projection

  ResolventSpec b;
  const LinearMap r = rng.normal_matrix(3, 3);
  LinearMap m = r * r.transpose();
  m *= 0.6 / symmetric_eigenvalues(m)(2);
  b.G = Bifunction::linear(CertifiedOperator::affine(m, rng.normal_vector(3)));
  b.C = ConvexSet::ball(Vector::Zero(3), 1.5);
  b.r = 1.2;
  out.push_back(b);  // frozen argument

  ResolventSpec c = b;
  c.phi = ConvexFn::quadratic(LinearMap::Identity(3, 3) * 0.5, make_vector({0.1, -0.2, 0.3}));
  c.C = ConvexSet::box(3, -1, 1);
  out.push_back(c);  // frozen argument with projected-gradient subproblem

  ResolventSpec d = linear_1d();
  d.G = Bifunction::linear(CertifiedOperator::affine(m * 3.0, Vector::Zero(3)));
  d.C = ConvexSet::box(3, -1, 1);
  d.r = 1.0;
  out.push_back(d);  // r*Lip(g) = 1.8: projected forward
  return out;
}

}  // namespace

TEST(Resolvent, ZeroBifunctionIsProjection) {
  ResolventSpec s;
  s.C = ConvexSet::box(1, 0, 1);
  EXPECT_EQ(resolvent(s, make_vector({2}))[0], 1.0);
}

TEST(Resolvent, LinearOneDimensional) {
  const ResolventSpec s = linear_1d();
  const Vector z = resolvent(s, make_vector({4}));
  EXPECT_NEAR(z[0], 2.0, 1e-10);  // x / (1 + r)
  const auto ys = grid_1d(0, 10, 0.1);
  const double v = grid_violation([](double zz, double y) { return zz * (y - zz); }, [](double) { return 0.0; }, 1, 4,
                                  z[0], ys);
  EXPECT_LE(v, 1e-9);
  EXPECT_LE(resolvent_violation(s, make_vector({4}), z, ys), s.inner.tol * 100);
}

TEST(Resolvent, QuadraticPhiIsProx) {
  ResolventSpec s;
  s.phi = ConvexFn::quadratic(LinearMap::Identity(1, 1), Vector::Zero(1));
  s.C = ConvexSet::box(1, -100, 100);
  s.r = 1;
  const Vector z = resolvent(s, make_vector({3}));
  EXPECT_NEAR(z[0], 1.5, 1e-10);
  const auto ys = grid_1d(-100, 100, 0.1);
  EXPECT_LE(grid_violation([](double, double) { return 0.0; }, [](double y) { return 0.5 * y * y; }, 1, 3, z[0], ys),
            1e-9);
}

TEST(Resolvent, QuadraticPhiOnWholeSpaceSolvesLinearSystem) {
  ResolventSpec s;
  LinearMap q(2, 2);
  q << 2, 1, 1, 2;
  s.phi = ConvexFn::quadratic(q, make_vector({1, -1}));
  s.C = ConvexSet::whole_space(2);
  s.r = 0.5;
  const Vector x = make_vector({1, 2});
  const Vector z = resolvent(s, x);
  // Optimality: Qz + q + (z - x)/r = 0.
  EXPECT_LE((q * z + make_vector({1, -1}) + (z - x) / 0.5).norm(), 1e-12);
}

TEST(ResolventViolation, Examples) {
  ResolventSpec p;
  p.C = ConvexSet::box(2, 0, 1);
  Rng rng(2);
  std::vector<Vector> probes;
  for (int i = 0; i < 200; ++i) probes.push_back(rng.uniform_in_box(Vector::Zero(2), Vector::Ones(2)));
  const Vector x = make_vector({1.7, -0.4});
  EXPECT_LE(resolvent_violation(p, x, p.C.project(x), probes), 1e-12);

  const ResolventSpec s = linear_1d();
  const auto ys = grid_1d(0, 10, 0.1);
  const Vector z = resolvent(s, make_vector({4}));
  const Vector moved = z + make_vector({0.1});
  const double oracle = grid_violation([](double zz, double y) { return zz * (y - zz); }, [](double) { return 0.0; },
                                       1, 4, moved[0], ys);
  const double v = resolvent_violation(s, make_vector({4}), moved, ys);
  EXPECT_GT(v, 0.1);
  EXPECT_NEAR(v, oracle, 1e-9);

  EXPECT_THROW(resolvent_violation(s, make_vector({4}), z, {make_vector({11})}), Error);
}

TEST(GmepResidual, Examples) {
  const auto zero = CertifiedOperator::zero(2);
  EXPECT_NEAR(gmep_residual(Bifunction::zero(), ConvexFn::zero(), zero, ConvexSet::box(2, 0, 1), 1.0,
                            make_vector({2, 0})),
              1.0, 1e-15);
  const ResolventSpec s = linear_1d();
  EXPECT_NEAR(gmep_residual(s.G, s.phi, CertifiedOperator::zero(1), s.C, 1.0, make_vector({4})), 2.0, 1e-10);
  // r_probe outside (0, 2*ism(B))
  EXPECT_THROW(gmep_residual(s.G, s.phi, CertifiedOperator::identity(1), s.C, 2.0, make_vector({4})), Error);
}

TEST(Resolvent, FirmlyNonexpansiveOnBuiltins) {
  Rng rng(31);
  for (const auto& spec : builtin_specs()) {
    for (int i = 0; i < 500; ++i) {
      const Vector x = rng.normal_vector(spec.C.dim()) * 2.0;
      const Vector y = rng.normal_vector(spec.C.dim()) * 2.0;
      const Vector tx = resolvent(spec, x);
      const Vector ty = resolvent(spec, y);
      EXPECT_LE((tx - ty).squaredNorm(), (tx - ty).dot(x - y) + 1e-7);
    }
  }
}

TEST(Resolvent, SingleValuedAndDeterministic) {
  for (const auto& spec : builtin_specs()) {
    const Vector x = Vector::Constant(spec.C.dim(), 0.7);
    const Vector a = resolvent(spec, x);
    const Vector b = resolvent(spec, x);
    EXPECT_EQ(a, b);
  }
}

TEST(Resolvent, DefiningInequalityOnProbes) {
  Rng rng(77);
  for (const auto& spec : builtin_specs()) {
    std::vector<Vector> probes;
    const auto box = *spec.C.bounds();
    for (int i = 0; i < 300; ++i) probes.push_back(spec.C.project(rng.uniform_in_box(box.lo, box.hi)));
    const Vector x = rng.normal_vector(spec.C.dim());
    EXPECT_LE(resolvent_violation(spec, x, resolvent(spec, x), probes), 1e-8);
  }
}

TEST(Resolvent, FixedPointIsEquilibrium) {
  // G(z,y) = <M(z - p), y - z> has MEP solution p for p inside C.
  const Vector p = make_vector({0.2, -0.3});
  LinearMap m(2, 2);
  m << 0.5, 0.1, 0.1, 0.3;
  ResolventSpec s;
  s.G = Bifunction::linear(CertifiedOperator::affine(m, -m * p));
  s.C = ConvexSet::box(2, -1, 1);
  s.r = 1.5;
  EXPECT_LE((resolvent(s, p) - p).norm(), 10 * s.inner.tol);
}

TEST(Resolvent, FrozenArgumentRejectsLargeFactor) {
  ResolventSpec s = linear_1d();
  s.inner.method = InnerMethod::FrozenArgument;
  EXPECT_THROW(resolvent(s, make_vector({4})), ResolventError);
  s.inner.method = InnerMethod::Auto;
  EXPECT_NEAR(resolvent(s, make_vector({4}))[0], 2.0, 1e-10);
}

TEST(Resolvent, InnerCapReported) {
  ResolventSpec s = linear_1d();
  s.r = 0.85;
  s.inner.max_iters = 3;
  try {
    resolvent(s, make_vector({4}));
    FAIL() << "expected ResolventError";
  } catch (const ResolventError& e) {
    EXPECT_NE(std::string(e.what()).find("r*Lip(g)"), std::string::npos);
  }
}

TEST(Resolvent, CustomBifunction) {
  CustomBifunction c;
  c.value = [](const Vector& z, const Vector& y) { return z.dot(y - z); };
  c.grad_y = [](const Vector& z, const Vector&) { return z; };
  c.grad_lipschitz = 0.0;
  c.coupling_lipschitz = 1.0;
  c.probe_grid = grid_1d(0, 10, 0.5);

  ResolventSpec s = linear_1d();
  s.G = Bifunction::custom(c);
  EXPECT_THROW(resolvent(s, make_vector({4})), ResolventError);  // (A1)-(A4) not declared

  c.declared_a1_a4 = true;
  s.G = Bifunction::custom(c);
  s.r = 0.5;
  const Vector z = resolvent(s, make_vector({4}));
  EXPECT_NEAR(z[0], 4.0 / 1.5, 1e-9);
  EXPECT_LE(s.G.sampled_a1_a2_violation(c.probe_grid), 0.0);
}

TEST(ForwardStep, IMinusRBNonexpansive) {
  Rng rng(9);
  const LinearMap r = rng.normal_matrix(2, 2);
  const LinearMap m = r * r.transpose();
  const auto b = CertifiedOperator::affine(m, Vector::Zero(2));
  const double theta = derive_ism_from_psd(m);
  for (int i = 0; i < 1000; ++i) {
    const double step = rng.uniform(1e-6, 2 * theta * (1 - 1e-9));
    const Vector x = rng.normal_vector(2), y = rng.normal_vector(2);
    const Vector fx = x - step * b(x), fy = y - step * b(y);
    EXPECT_LE((fx - fy).norm(), (x - y).norm() + 1e-9);
  }
}
