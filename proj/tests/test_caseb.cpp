#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "dhc/caseb.hpp"

using namespace dhc;

namespace {

struct Setup {
  CellGeometry geom;
  Mesh mesh;
  std::unique_ptr<Micro> micro;
  std::unique_ptr<Cell> cell;
  std::unique_ptr<CaseB> cb;
  Setup(const CellGeometry& g, double h, int J = 12)
      : geom(g), mesh(build_cell_mesh(g, h)) {
    micro = std::make_unique<Micro>(mesh, J);
    cell = std::make_unique<Cell>(mesh, *micro);
    cb = std::make_unique<CaseB>(mesh, *micro, *cell);
  }
};

const Setup& ellipse() {
  static Setup s(CellGeometry::ellipse(0.3, 0.2), 0.05);
  return s;
}

// first simple zero-mean mode odd in both coordinates (drift-free sector)
int odd_odd_mode(const Micro& m) {
  const auto& s = m.spectrum();
  std::map<std::pair<long, long>, Index> lk;
  const auto& q0 = m.q0_mesh();
  auto key = [](double x, double y) {
    return std::make_pair((long)std::llround(x * 1e9), (long)std::llround(y * 1e9));
  };
  for (Index v = 0; v < q0.n_vertices(); ++v) lk[key(q0.vx[v], q0.vy[v])] = v;
  for (int j = 0; j < (int)s.values.size(); ++j) {
    const int c = s.cluster_of(j);
    if (!s.cluster_zero_mean[c] || s.cluster_ranges[c].second - s.cluster_ranges[c].first != 1)
      continue;
    double sx = 0, sy = 0, n2 = 0;
    for (Index v = 0; v < q0.n_vertices(); ++v) {
      n2 += s.vectors(v, j) * s.vectors(v, j);
      auto ix = lk.find(key(1.0 - q0.vx[v], q0.vy[v]));
      auto iy = lk.find(key(q0.vx[v], 1.0 - q0.vy[v]));
      if (ix != lk.end()) sx += s.vectors(v, j) * s.vectors(ix->second, j);
      if (iy != lk.end()) sy += s.vectors(v, j) * s.vectors(iy->second, j);
    }
    if (sx < -0.9 * n2 && sy < -0.9 * n2) return j;
  }
  throw std::runtime_error("no odd-odd mode resolved");
}

} // namespace

TEST_CASE("V1 requires a zero-mean trace source") {
  const auto& s = ellipse();
  // the ground state has a nonzero mean: the Neumann system is incompatible
  const Vec phi0 = s.micro->spectrum().vectors.col(0);
  double defect = 0.0;
  CHECK_THROWS_WITH_AS(s.cb->solve_V1(phi0, s.micro->spectrum().values[0], &defect),
                       doctest::Contains("defect"), SolveError);
  // solve() checks the cluster flag up front
  CHECK_THROWS_WITH_AS(s.cb->solve(0), doctest::Contains("nonzero mean"), std::invalid_argument);
}

TEST_CASE("case (b) solution at the odd-odd mode") {
  const auto& s = ellipse();
  const int mode = odd_odd_mode(*s.micro);
  const auto sol = s.cb->solve(mode);

  CHECK(sol.lambda1 < 0.0);
  CHECK(std::fabs(sol.v1_defect) < 1e-10);
  CHECK(energy(s.cell->q1_mesh(), sol.V1_tilde, Region::Q1) > 1e-6); // nonconstant
  CHECK(std::fabs(integrate(s.cell->q1_mesh(), sol.V1_tilde, Region::Q1)) < 1e-10);

  // definition identity and the dual boundary evaluation of lambda1
  CHECK(std::fabs(sol.lambda1 + energy(s.cell->q1_mesh(), sol.V1_tilde, Region::Q1)) < 1e-8);
  CHECK(sol.lambda1_boundary ==
        doctest::Approx(sol.lambda1).epsilon(1e-4)); // (coincide to machine here)
  CHECK(sol.lambda1_raw_trace == doctest::Approx(sol.lambda1).epsilon(5e-2));

  // solvability of the second matrix corrector after the A_tilde correction
  CHECK(std::fabs(sol.w1_flux_total) < 1e-8 * std::fabs(sol.lambda1));

  // explicit Z1 fields match the resonant solve up to the deflated component
  CHECK(sol.z1_residual < 5e-2);

  // trace matching across the interface (exact by construction)
  const Vec v1_q0 = s.cell->q1_to_q0(sol.V1_tilde);
  const Vec v2_q0 = s.cell->q1_to_q0(sol.V2);
  const Vec p0_q0 = s.cell->q1_to_q0(sol.Pk[0]);
  for (Index v : s.micro->gamma().vertices) {
    CHECK(sol.W1[v] == doctest::Approx(v1_q0[v] + sol.A_tilde).epsilon(1e-10));
    CHECK(sol.Z1[0][v] == doctest::Approx(0.0));
    CHECK(sol.W2[v] == doctest::Approx(v2_q0[v]).epsilon(1e-10));
    CHECK(sol.Z2[0][v] == doctest::Approx(p0_q0[v]).epsilon(1e-10));
  }
}

TEST_CASE("lambda1 scales quadratically in the eigenfunction") {
  const auto& s = ellipse();
  const int mode = odd_odd_mode(*s.micro);
  const Vec phi = s.micro->spectrum().vectors.col(mode);
  const double lam0 = s.micro->spectrum().values[mode];
  const Vec v1 = s.cb->solve_V1(phi, lam0);
  const Vec v2 = s.cb->solve_V1(Vec(2.0 * phi), lam0);
  const double e1 = energy(s.cell->q1_mesh(), v1, Region::Q1);
  const double e2 = energy(s.cell->q1_mesh(), v2, Region::Q1);
  CHECK(e2 == doctest::Approx(4.0 * e1).epsilon(1e-10));
}

TEST_CASE("A_tilde gauge invariance under phi shifts of W1_tilde") {
  const auto& s = ellipse();
  const int mode = odd_odd_mode(*s.micro);
  const auto sol = s.cb->solve(mode);
  const auto& forms0 = s.micro->forms();
  const Vec phi = s.micro->spectrum().vectors.col(mode);

  auto a_tilde_of = [&](const Vec& w1t) {
    const Vec flux = (forms0.K_full - sol.lambda0 * forms0.M_full) * w1t -
                     sol.lambda1 * (forms0.M_full * phi);
    double sum = 0.0;
    for (Index v : s.micro->gamma().vertices) sum += flux[v];
    return sum / sol.eta.B;
  };
  const double a0 = a_tilde_of(sol.W1_tilde);
  const double a1 = a_tilde_of(Vec(sol.W1_tilde + 0.37 * phi));
  CHECK(a0 == doctest::Approx(sol.A_tilde).epsilon(1e-10));
  CHECK(std::fabs(a1 - a0) < 1e-8 * std::max(1.0, std::fabs(a0)));
}

TEST_CASE("disk pair is rejected without the symmetry-sector reduction") {
  Setup disk(CellGeometry::disk(0.25), 0.05, 6);
  // modes 1,2 form the zero-mean angular pair
  CHECK_THROWS_WITH_AS(disk.cb->solve(1), doctest::Contains("multiplicity"),
                       std::invalid_argument);
  const auto sol = disk.cb->solve(1, /*allow_symmetric_pair=*/true);
  CHECK(sol.lambda1 < 0.0);
}

TEST_CASE("quarter-turn equivariance of V1 on the disk") {
  Setup disk(CellGeometry::disk(0.25), 0.05, 6);
  const auto& s = disk.micro->spectrum();
  const Vec phi = s.vectors.col(1);
  const double lam0 = s.values[1];

  // rotate phi by a quarter turn via the vertex map (x, y) -> (1 - y, x)
  const auto& q0 = disk.micro->q0_mesh();
  std::map<std::pair<long, long>, Index> lk0;
  auto key = [](double x, double y) {
    return std::make_pair((long)std::llround(x * 1e9), (long)std::llround(y * 1e9));
  };
  for (Index v = 0; v < q0.n_vertices(); ++v) lk0[key(q0.vx[v], q0.vy[v])] = v;
  Vec phi_rot(q0.n_vertices());
  for (Index v = 0; v < q0.n_vertices(); ++v) {
    auto it = lk0.find(key(1.0 - q0.vy[v], q0.vx[v]));
    REQUIRE(it != lk0.end());
    phi_rot[v] = phi[it->second];
  }

  const Vec v1 = disk.cb->solve_V1(phi, lam0);
  const Vec v1_of_rot = disk.cb->solve_V1(phi_rot, lam0);
  const auto& q1 = disk.cell->q1_mesh();
  std::map<std::pair<long, long>, Index> lk1;
  for (Index v = 0; v < q1.n_vertices(); ++v) lk1[key(q1.vx[v], q1.vy[v])] = v;
  Vec v1_rot(q1.n_vertices());
  for (Index v = 0; v < q1.n_vertices(); ++v) {
    auto it = lk1.find(key(1.0 - q1.vy[v], q1.vx[v]));
    REQUIRE(it != lk1.end());
    v1_rot[v] = v1[it->second];
  }
  CHECK(l2_norm(q1, Vec(v1_of_rot - v1_rot), Region::Q1) < 1e-5);
}

TEST_CASE("residual orders of the composite field") {
  const auto& s = ellipse();
  const int mode = odd_odd_mode(*s.micro);
  const auto sol = s.cb->solve(mode);
  const auto rep = s.cb->residual_orders(sol, s.geom, {0.25, 0.125});
  // light two-point check; the acceptance suite runs the three-point study
  CHECK(rep.slope_interface >= 1.5);
  CHECK(rep.slope_q1 >= 0.6);
  CHECK(rep.interface[1] < rep.interface[0]);
  CHECK(rep.interior_q1[1] < rep.interior_q1[0]);
  CHECK(rep.interior_q0[1] < rep.interior_q0[0]);
}
