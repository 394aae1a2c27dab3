#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dhc/fem.hpp"
#include "dhc/geometry.hpp"

using namespace dhc;

namespace {

// Independent oracle for the first zero of J0 (power-series bisection).
double oracle_j01() {
  auto j0 = [](double x) {
    long double s = 0.0L, t = 1.0L;
    const long double q = (long double)x * x / 4.0L;
    for (int m = 0; m < 60; ++m) {
      s += t;
      t *= -q / ((long double)(m + 1) * (m + 1));
    }
    return (double)s;
  };
  double lo = 2.0, hi = 3.0;
  for (int i = 0; i < 100; ++i) (j0(lo) * j0(0.5 * (lo + hi)) <= 0 ? hi : lo) = 0.5 * (lo + hi);
  return 0.5 * (lo + hi);
}

Mesh cell_mesh(double h) { return build_cell_mesh(CellGeometry::disk(0.25), h); }

} // namespace

TEST_CASE("assembly: constants in the stiffness kernel, unit total mass") {
  const Mesh mesh = cell_mesh(0.05);
  const auto f = assemble(mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  const Vec ones = Vec::Ones(mesh.n_vertices());
  CHECK((f.K_full * ones).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(ones.dot(f.M_full * ones) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((Eigen::MatrixXd(f.K_full) - Eigen::MatrixXd(f.K_full).transpose()).norm() < 1e-12);
}

TEST_CASE("assembly: entries scale linearly in the coefficients") {
  const Mesh mesh = cell_mesh(0.1);
  const auto a = assemble(mesh, {0.25, 1.0}, {4.0, 1.0});
  const auto b = assemble(mesh, {0.5, 2.0}, {8.0, 2.0});
  CHECK((Eigen::MatrixXd(b.K_full) - 2.0 * Eigen::MatrixXd(a.K_full)).norm() < 1e-12);
  CHECK((Eigen::MatrixXd(b.M_full) - 2.0 * Eigen::MatrixXd(a.M_full)).norm() < 1e-12);
  CHECK_THROWS_AS(assemble(mesh, {0.0, 1.0}, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("constraints: dirichlet, merged gamma, periodic") {
  const Mesh mesh = cell_mesh(0.05);
  const auto f = assemble(mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));

  const auto gb = gamma_boundary(mesh);
  const auto dg = apply_constraints(f, ConstraintKind::DirichletGamma, mesh);
  CHECK(dg.n_free == mesh.n_vertices() - (Index)gb.vertices.size());

  const auto cg = apply_constraints(f, ConstraintKind::ConstantOnGamma, mesh);
  CHECK(cg.n_free == mesh.n_vertices() - (Index)gb.vertices.size() + 1);

  const auto pc = apply_constraints(f, ConstraintKind::PeriodicCell, mesh);
  CHECK(pc.n_free < mesh.n_vertices());
  const Vec ones = Vec::Ones(pc.n_free);
  CHECK((pc.K * ones).lpNorm<Eigen::Infinity>() < 1e-11);

  const Mesh dom = build_domain_mesh(CellGeometry::disk(0.25), 0.5, 0.5 / 8.0);
  const auto fd = assemble(dom, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  CHECK_THROWS_AS(apply_constraints(fd, ConstraintKind::PeriodicCell, dom),
                  std::invalid_argument);
  const auto od = apply_constraints(fd, ConstraintKind::DirichletOuter, dom);
  for (Index v = 0; v < dom.n_vertices(); ++v) {
    const bool outer = dom.vx[v] == 0.0 || dom.vx[v] == 1.0 || dom.vy[v] == 0.0 || dom.vy[v] == 1.0;
    CHECK((od.dof_map[v] < 0) == outer);
  }
}

TEST_CASE("manufactured solution u = x recovered on a Dirichlet problem") {
  const Mesh mesh = cell_mesh(0.05);
  const auto f0 = assemble(mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  std::vector<Index> bnd;
  for (Index v = 0; v < mesh.n_vertices(); ++v)
    if (mesh.vx[v] == 0.0 || mesh.vx[v] == 1.0 || mesh.vy[v] == 0.0 || mesh.vy[v] == 1.0)
      bnd.push_back(v);
  Vec g(mesh.n_vertices());
  for (Index v = 0; v < mesh.n_vertices(); ++v) g[v] = mesh.vx[v];
  const auto res = helmholtz_dirichlet(mesh, f0, 0.0, bnd, g);
  for (Index v = 0; v < mesh.n_vertices(); ++v)
    CHECK(res.u[v] == doctest::Approx(mesh.vx[v]).epsilon(1e-8));
}

TEST_CASE("singular Neumann solve: compatibility and zero mean") {
  const Mesh mesh = cell_mesh(0.08);
  const SubMesh q1 = extract_region(mesh, Region::Q1);
  const auto f = assemble(q1.mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  const auto pc = apply_constraints(f, ConstraintKind::PeriodicCell, q1.mesh);

  const auto gb = gamma_boundary(q1.mesh);
  Vec ones = Vec::Ones(q1.mesh.n_vertices());
  const Vec load = gamma_normal_load(q1.mesh, gb, 0, ones);
  CHECK(std::fabs(load.sum()) < 1e-13); // closed-polygon identity

  LinearSolveInfo info;
  const Vec u = solve_linear(pc, pc.reduce(load), &info);
  CHECK(info.zero_mean_applied);
  CHECK(std::fabs(info.compatibility_defect) < 1e-12);
  const Vec uf = pc.prolong(u);
  CHECK(std::fabs(integrate(q1.mesh, uf, Region::Q1)) < 1e-10);

  Vec bad = load;
  bad[0] += 0.37;
  CHECK_THROWS_WITH_AS(solve_linear(pc, pc.reduce(bad), nullptr),
                       doctest::Contains("defect"), SolveError);
}

TEST_CASE("unit square Dirichlet Laplacian converges to 2 pi^2") {
  double lam_h = 0, lam_h2 = 0;
  for (int lvl = 0; lvl < 2; ++lvl) {
    const double h = lvl == 0 ? 1.0 / 16 : 1.0 / 32;
    const Mesh dom = build_domain_mesh(CellGeometry::disk(0.25), 0.5, h);
    const auto f = assemble(dom, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
    const auto d = apply_constraints(f, ConstraintKind::DirichletOuter, dom);
    const auto s = solve_eigen(d, 1);
    (lvl == 0 ? lam_h : lam_h2) = s.values[0];
  }
  const double exact = 2.0 * M_PI * M_PI;
  CHECK(lam_h > exact);  // conforming upper bound
  CHECK(lam_h2 > exact);
  CHECK(lam_h2 < lam_h); // monotone under refinement
  CHECK(richardson2(lam_h, lam_h2) == doctest::Approx(exact).epsilon(2e-4));
}

TEST_CASE("disk Dirichlet ground state matches (j01/a)^2 (Bessel oracle)") {
  const double exact = std::pow(oracle_j01() / 0.25, 2); // 92.53...
  double lam_h = 0, lam_h2 = 0;
  for (int lvl = 0; lvl < 2; ++lvl) {
    const Mesh mesh = cell_mesh(lvl == 0 ? 0.04 : 0.02);
    const SubMesh q0 = extract_region(mesh, Region::Q0);
    const auto f = assemble(q0.mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
    const auto d = apply_constraints(f, ConstraintKind::DirichletGamma, q0.mesh);
    (lvl == 0 ? lam_h : lam_h2) = solve_eigen(d, 1).values[0];
  }
  CHECK(richardson2(lam_h, lam_h2) == doctest::Approx(exact).epsilon(5e-4));
}

TEST_CASE("shift skips eigenvalues below it") {
  const Mesh dom = build_domain_mesh(CellGeometry::disk(0.25), 0.5, 1.0 / 16);
  const auto f = assemble(dom, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  const auto d = apply_constraints(f, ConstraintKind::DirichletOuter, dom);
  const auto all = solve_eigen(d, 6);
  const auto tail = solve_eigen(d, 3, all.values[2] * (1.0 + 1e-9));
  for (int i = 0; i < 3; ++i)
    CHECK(tail.values[i] == doctest::Approx(all.values[i + 3]).epsilon(1e-9));
}

TEST_CASE("dense and shift-invert backends agree to 1e-7 relative") {
  const Mesh dom = build_domain_mesh(CellGeometry::disk(0.25), 0.5, 1.0 / 20);
  const auto f = assemble(dom, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  const auto d = apply_constraints(f, ConstraintKind::DirichletOuter, dom);
  REQUIRE(d.n_free <= 4000);
  const auto dense = solve_eigen(d, 5);
  const auto sparse = solve_eigen(d, 5, -1e300, {}, /*dense_limit=*/1);
  CHECK(dense.backend == "dense");
  CHECK(sparse.backend == "shift-invert");
  for (int i = 0; i < 5; ++i)
    CHECK(std::fabs(dense.values[i] - sparse.values[i]) <= 1e-7 * std::fabs(dense.values[i]));
}

TEST_CASE("spectrum invariants: M-orthonormality, Rayleigh quotient, inertia") {
  const Mesh mesh = cell_mesh(0.06);
  const SubMesh q0 = extract_region(mesh, Region::Q0);
  const auto f = assemble(q0.mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  const auto d = apply_constraints(f, ConstraintKind::DirichletGamma, q0.mesh);
  const auto s = solve_eigen(d, 6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double mij = s.vectors.col(i).dot(d.M * s.vectors.col(j));
      CHECK(std::fabs(mij - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
    const Vec x = s.vectors.col(i);
    const double rq = x.dot(d.K * x) / x.dot(d.M * x);
    CHECK(std::fabs(rq - s.values[i]) <= 1e-9 * std::fabs(s.values[i]));
    CHECK(s.residuals[i] <= 1e-8 * std::max(1.0, s.values[i]));
  }
  for (double frac : {0.5, 1.5, 2.5, 3.5}) {
    const double sigma = s.values[0] * frac + 1.0;
    Index expect = 0;
    for (double v : s.values)
      if (v < sigma) ++expect;
    if (expect < 6) CHECK(count_eigenvalues_below(d, sigma) == expect);
  }
}

TEST_CASE("eigenvalue clustering groups the degenerate disk pair") {
  const Mesh mesh = cell_mesh(0.04);
  const SubMesh q0 = extract_region(mesh, Region::Q0);
  const auto f = assemble(q0.mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  const auto d = apply_constraints(f, ConstraintKind::DirichletGamma, q0.mesh);
  const auto s = solve_eigen(d, 3);
  const auto cl = s.clusters(1e-5);
  REQUIRE(cl.size() == 2); // ground state + (j11/a)^2 pair
  CHECK(cl[0] == std::pair<int, int>{0, 1});
  CHECK(cl[1] == std::pair<int, int>{1, 3});
}

TEST_CASE("fine-scale coefficient assembly at eps=1/4") {
  const Mesh dom = build_domain_mesh(CellGeometry::disk(0.25), 0.25, 0.25 / 8.0);
  const double eps = 0.25;
  const auto f = assemble(dom, {eps, 1.0}, {1.0 / eps, 1.0});
  const Vec ones = Vec::Ones(dom.n_vertices());
  const double mass = ones.dot(f.M_full * ones);
  const double a0 = dom.region_area(Region::Q0);
  CHECK(mass == doctest::Approx((1.0 - a0) + a0 / eps).epsilon(1e-10));
}

TEST_CASE("Dirichlet eigenvalues decrease monotonically over three refinements") {
  double prev = 1e300;
  for (int n : {10, 20, 40}) {
    const Mesh sq = build_square_mesh(n);
    const auto f = assemble(sq, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
    const auto d = apply_constraints(f, ConstraintKind::DirichletOuter, sq);
    const double lam = solve_eigen(d, 1).values[0];
    CHECK(lam < prev);
    CHECK(lam > 2.0 * M_PI * M_PI); // conforming upper bound
    prev = lam;
  }
}
