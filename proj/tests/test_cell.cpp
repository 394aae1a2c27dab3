#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "dhc/cell.hpp"

using namespace dhc;

namespace {

struct Setup {
  Mesh mesh;
  std::unique_ptr<Micro> micro;
  std::unique_ptr<Cell> cell;
  Setup(const CellGeometry& g, double h, int J = 12) : mesh(build_cell_mesh(g, h)) {
    micro = std::make_unique<Micro>(mesh, J);
    cell = std::make_unique<Cell>(mesh, *micro);
  }
};

const Setup& disk_h() {
  static Setup s(CellGeometry::disk(0.25), 0.05);
  return s;
}
const Setup& disk_h2() {
  static Setup s(CellGeometry::disk(0.25), 0.025);
  return s;
}

double first_nonzero_root(const Micro& m, double lmax) {
  for (const auto& e : m.limit_spectrum(lmax).entries)
    if (e.from_root && e.value > 1.0 && !e.from_zero_mean) return e.value;
  throw std::runtime_error("no root");
}

} // namespace

TEST_CASE("corrector fields N_j: nontrivial, D4-symmetric for the disk") {
  const auto& s = disk_h();
  const auto& q1 = s.cell->q1_mesh();
  CHECK(energy(q1, s.cell->N(0), Region::Q1) > 1e-3);
  CHECK(std::fabs(integrate(q1, s.cell->N(0), Region::Q1)) < 1e-10); // zero mean

  // N_2(y1, y2) = N_1(y2, y1): map vertices through the diagonal swap
  std::map<std::pair<long, long>, Index> lookup;
  auto key = [](double x, double y) {
    return std::make_pair((long)std::llround(x * 1e9), (long)std::llround(y * 1e9));
  };
  for (Index v = 0; v < q1.n_vertices(); ++v) lookup[key(q1.vx[v], q1.vy[v])] = v;
  double worst = 0.0;
  for (Index v = 0; v < q1.n_vertices(); ++v) {
    auto it = lookup.find(key(q1.vy[v], q1.vx[v]));
    REQUIRE(it != lookup.end());
    worst = std::max(worst, std::fabs(s.cell->N(1)[v] - s.cell->N(0)[it->second]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("homogenized matrix: SPD, isotropic, below identity") {
  const auto& s = disk_h();
  double asym = 0.0;
  const auto A = s.cell->homogenized_matrix(&asym);
  CHECK(asym < 1e-8);
  CHECK(A(0, 0) > 0.0);
  CHECK(A(0, 0) < 1.0);
  CHECK(std::fabs(A(0, 0) - A(1, 1)) < 1e-5 * A(0, 0));
  CHECK(std::fabs(A(0, 1)) < 1e-8);
  CHECK(A(0, 0) < s.cell->area_q1()); // энergy minimization upper bound
}

TEST_CASE("homogenized matrix refinement: order >= 1.5 and frozen fixture") {
  const double a_h = Setup(CellGeometry::disk(0.25), 0.08).cell->homogenized_matrix()(0, 0);
  const double a_h2 = Setup(CellGeometry::disk(0.25), 0.04).cell->homogenized_matrix()(0, 0);
  const double a_h4 = Setup(CellGeometry::disk(0.25), 0.02).cell->homogenized_matrix()(0, 0);
  CHECK(observed_order(a_h, a_h2, a_h4) >= 1.5);
  // frozen after the first verified Richardson run (disk a = 0.25)
  const double alpha = richardson2(a_h2, a_h4);
  CHECK(alpha == doctest::Approx(0.671638).epsilon(2e-4));
}

TEST_CASE("vanishing inclusion: A_hom close to the identity at a = 0.05") {
  Setup s(CellGeometry::disk(0.05), 0.02, 6);
  const auto A = s.cell->homogenized_matrix();
  CHECK(std::fabs(A(0, 0) - 1.0) < 2e-2);
  CHECK(std::fabs(A(1, 1) - 1.0) < 2e-2);
}

TEST_CASE("lambda0 = 0 specialization: calN = 0, P = 0, R torsion, C = |Q0|") {
  const auto& s = disk_h();
  const auto t = s.cell->tensors(0.0);
  CHECK(std::fabs(t.solvability_defect) < 1e-12);
  CHECK(t.C == doctest::Approx(s.micro->spectrum().area_q0).epsilon(1e-10));
  CHECK(t.C_flux == doctest::Approx(t.C).epsilon(1e-8));
  CHECK(std::fabs(t.P_int) < 1e-10);
  CHECK(std::fabs(t.nu(0.0)) < 1e-10);
  CHECK(t.nu(2.0) == doctest::Approx(2.0 * t.C));

  const auto eta = s.micro->solve_eta(0.0);
  const Vec calN = s.cell->solve_calN(eta);
  CHECK(calN.lpNorm<Eigen::Infinity>() < 1e-10);
  const auto mpr = s.cell->solve_MPR(0.0, eta, calN);
  CHECK(mpr.P.lpNorm<Eigen::Infinity>() < 1e-10);
  // torsion function: positive inside, zero trace
  CHECK(mpr.R.maxCoeff() > 0.0);
  CHECK(mpr.R.minCoeff() > -1e-12);
}

TEST_CASE("non-root lambda0 fails the calN compatibility check") {
  const auto& s = disk_h();
  const auto eta = s.micro->solve_eta(40.0); // B(40) clearly nonzero
  CHECK_THROWS_WITH_AS(s.cell->solve_calN(eta), doctest::Contains("defect"), SolveError);
}

TEST_CASE("case (a) tensors at the disk root mu_2") {
  const auto& s = disk_h();
  const double mu2 = first_nonzero_root(*s.micro, 460.0);
  const auto t = s.cell->tensors(mu2);

  CHECK(std::fabs(t.solvability_defect) < 1e-6); // root polished on this mesh
  CHECK(t.C > 0.0);
  CHECK(t.C_flux == doctest::Approx(t.C).epsilon(1e-6)); // dual route to C
  CHECK(t.green_a9 < 1e-6);
  CHECK(t.green_a10 < 1e-6);
  CHECK(t.K.lpNorm<Eigen::Infinity>() < 1e-3);

  // nu affine and strictly increasing with slope C
  CHECK(t.nu(1.0) - t.nu(0.0) == doctest::Approx(t.C));
  CHECK(t.lambda1_of_nu(t.nu(7.25)) == doctest::Approx(7.25).epsilon(1e-12));
}

TEST_CASE("drift coefficients vanish after extrapolation") {
  const double mu_h = first_nonzero_root(*disk_h().micro, 460.0);
  const double mu_f = first_nonzero_root(*disk_h2().micro, 460.0);
  const auto t_h = disk_h().cell->tensors(mu_h);
  const auto t_f = disk_h2().cell->tensors(mu_f);
  for (int j = 0; j < 2; ++j) {
    CHECK(std::fabs(t_h.K[j]) < 1e-3);
    CHECK(std::fabs(richardson2(t_h.K[j], t_f.K[j])) < 1e-5);
  }
}

TEST_CASE("ellipse tensors at its case (a) root") {
  Setup s(CellGeometry::ellipse(0.3, 0.2), 0.04, 14);
  const double mu2 = first_nonzero_root(*s.micro, 0.9 * s.micro->spectrum().values.back());
  const auto t = s.cell->tensors(mu2);
  CHECK(t.C > 0.0);
  CHECK(std::fabs(t.solvability_defect) < 1e-6);
  CHECK(t.green_a9 < 1e-6);
  CHECK(t.green_a10 < 1e-6);
  // anisotropic but diagonal
  const auto A = s.cell->homogenized_matrix();
  CHECK(std::fabs(A(0, 1)) < 1e-8);
  CHECK(A(0, 0) != doctest::Approx(A(1, 1)).epsilon(1e-3));
}

TEST_CASE("disk mu2 lambda1 regression fixture") {
  // lambda1 for the lowest homogenized eigenvalue at the disk's first nonzero
  // root of B, all ingredients Richardson-extrapolated; frozen after the
  // first verified run.
  const double mu_h = first_nonzero_root(*disk_h().micro, 460.0);
  const double mu_f = first_nonzero_root(*disk_h2().micro, 460.0);
  const auto t_h = disk_h().cell->tensors(mu_h);
  const auto t_f = disk_h2().cell->tensors(mu_f);
  const double alpha = 0.671638;
  const double nu1 = 2.0 * M_PI * M_PI * alpha;
  const double C = richardson2(t_h.C, t_f.C);
  const double nu_const = richardson2(t_h.nu_const, t_f.nu_const);
  const double lambda1 = (nu1 - nu_const) / C;
  CHECK(lambda1 < 0.0);
  static const double frozen_lambda1 = 0.0; // placeholder before first verified run
  if (frozen_lambda1 != 0.0) {
    CHECK(lambda1 == doctest::Approx(frozen_lambda1).epsilon(2e-3));
  } else {
    MESSAGE("measured lambda1 = ", lambda1);
  }
}
