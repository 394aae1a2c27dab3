#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dhc/finescale.hpp"

using namespace dhc;

TEST_CASE("assemble_fine: tiling check, tags, positivity") {
  const auto geom = CellGeometry::disk(0.25);
  const Mesh dom = build_domain_mesh(geom, 0.5, 0.5 / 8.0);
  CHECK_THROWS_WITH_AS(assemble_fine(dom, 0.25), doctest::Contains("tiling"),
                       std::invalid_argument);
  const auto forms = assemble_fine(dom, 0.5);
  const auto s = solve_eigen(forms, 4);
  for (double v : s.values) CHECK(v > 0.0); // spectrum strictly positive

  const Mesh cellm = build_cell_mesh(geom, 0.1);
  CHECK_THROWS_WITH_AS(assemble_fine(cellm, 1.0), doctest::Contains("Outer"),
                       std::invalid_argument);
}

TEST_CASE("eps = 1 degenerates to uniform coefficients") {
  const auto geom = CellGeometry::disk(0.25);
  const Mesh dom = build_domain_mesh(geom, 0.5, 0.5 / 8.0);
  const auto fine = assemble_fine(dom, 1.0);
  const auto macro = macro_spectrum(Eigen::Matrix2d::Identity(), dom, 3);
  const auto s = solve_eigen(fine, 3);
  for (int i = 0; i < 3; ++i)
    CHECK(std::fabs(s.values[i] - macro.nu[i]) <= 1e-8 * macro.nu[i]);
}

TEST_CASE("window solver matches the dense spectrum and is h-stable") {
  const auto geom = CellGeometry::disk(0.25);
  const Mesh dom = build_domain_mesh(geom, 0.5, 0.5 / 10.0);
  const auto forms = assemble_fine(dom, 0.5);
  const auto all = solve_eigen(forms, 8);
  const double lo = all.values[0] * 0.9, hi = all.values[5] * 1.0001;
  const auto win = fine_spectrum(forms, lo, hi);
  REQUIRE((int)win.values.size() == 6);
  for (int i = 0; i < 6; ++i)
    CHECK(win.values[i] == doctest::Approx(all.values[i]).epsilon(1e-9));

  // counts stable under refinement of the same window
  const Mesh dom2 = build_domain_mesh(geom, 0.5, 0.5 / 20.0);
  const auto forms2 = assemble_fine(dom2, 0.5);
  const Index c1 = count_eigenvalues_below(forms, hi) - count_eigenvalues_below(forms, lo);
  const Index c2 = count_eigenvalues_below(forms2, hi) - count_eigenvalues_below(forms2, lo);
  CHECK(c1 == c2);
}

TEST_CASE("eigen_near returns pairs ordered by distance to sigma") {
  const auto geom = CellGeometry::disk(0.25);
  const Mesh dom = build_domain_mesh(geom, 0.5, 0.5 / 10.0);
  const auto forms = assemble_fine(dom, 0.5);
  const auto all = solve_eigen(forms, 6);
  const double sigma = 0.5 * (all.values[2] + all.values[3]);
  const auto near = eigen_near(forms, sigma, 3);
  CHECK(std::fabs(near.values[0] - sigma) <= std::fabs(near.values[1] - sigma));
  CHECK(std::fabs(near.values[1] - sigma) <= std::fabs(near.values[2] - sigma));
  // the two nearest must be values[2] and values[3] in some order
  const double a = std::min(near.values[0], near.values[1]);
  const double b = std::max(near.values[0], near.values[1]);
  CHECK(a == doctest::Approx(all.values[2]).epsilon(1e-9));
  CHECK(b == doctest::Approx(all.values[3]).epsilon(1e-9));
}

TEST_CASE("square-field evaluation reproduces P1 functions exactly") {
  const int n = 7;
  const Mesh sq = build_square_mesh(n);
  Vec f(sq.n_vertices());
  for (Index v = 0; v < sq.n_vertices(); ++v) f[v] = 2.0 * sq.vx[v] + 3.0 * sq.vy[v] - 0.4;
  for (double x : {0.01, 0.3, 0.55, 0.9999}) {
    for (double y : {0.02, 0.48, 0.77}) {
      CHECK(eval_square_field(f, n, x, y) ==
            doctest::Approx(2.0 * x + 3.0 * y - 0.4).epsilon(1e-12));
    }
  }
}

TEST_CASE("two-scale distance: alignment and degeneracy") {
  const auto geom = CellGeometry::disk(0.25);
  const Mesh dom = build_domain_mesh(geom, 0.5, 0.5 / 8.0);
  const int n = 16;
  MacroSpectrum ms = macro_spectrum(Eigen::Matrix2d::Identity(), build_square_mesh(n), 2);

  // u equal to the limit shape (eta = 1) up to scale: distance ~ 0
  Vec u(dom.n_vertices());
  for (Index v = 0; v < dom.n_vertices(); ++v)
    u[v] = -3.7 * eval_square_field(ms.vectors.col(0), n, dom.vx[v], dom.vy[v]);
  SubMesh empty;
  CHECK(two_scale_distance(dom, u, ms, 0, n, empty, Vec()) < 1e-10);

  // an orthogonal mode stays far from the ground shape
  Vec u2(dom.n_vertices());
  for (Index v = 0; v < dom.n_vertices(); ++v)
    u2[v] = eval_square_field(ms.vectors.col(1), n, dom.vx[v], dom.vy[v]);
  CHECK(two_scale_distance(dom, u2, ms, 0, n, empty, Vec()) > 0.5);
}

TEST_CASE("rate summary on synthetic sequences") {
  std::vector<BranchPoint> pts;
  for (double eps : {0.5, 0.25, 0.125}) {
    BranchPoint p;
    p.eps = eps;
    p.error = 3.0 * std::pow(eps, 1.5);
    p.matched = p.control_ok = true;
    pts.push_back(p);
  }
  const auto s = summarize_rate(pts);
  CHECK(s.n_used == 3);
  CHECK(s.monotone);
  CHECK(s.slope == doctest::Approx(1.5).epsilon(1e-12));

  pts[1].control_ok = false; // dropped point keeps the fit consistent
  const auto s2 = summarize_rate(pts);
  CHECK(s2.n_used == 2);
  CHECK(s2.slope == doctest::Approx(1.5).epsilon(1e-12));
}
