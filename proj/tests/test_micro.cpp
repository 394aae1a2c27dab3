#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "dhc/bessel.hpp"
#include "dhc/micro.hpp"

using namespace dhc;

namespace {

// one shared instance per resolution keeps the test binary fast
const Micro& micro_h() {
  static auto m = std::make_unique<Micro>(build_cell_mesh(CellGeometry::disk(0.25), 0.04), 14);
  return *m;
}
const Micro& micro_h2() {
  static auto m = std::make_unique<Micro>(build_cell_mesh(CellGeometry::disk(0.25), 0.02), 14);
  return *m;
}

double j01() { return bessel_j0_zero(1); }
double j11() { return bessel_j1_zero(1); }

} // namespace

TEST_CASE("dirichlet spectrum of the disk: values, means, clusters") {
  const auto& m = micro_h2();
  const auto& s = m.spectrum();
  const double a = 0.25;

  // ground state (j01/a)^2 with nonzero mean, extrapolated against micro_h
  const double lam1 = richardson2(micro_h().spectrum().values[0], s.values[0]);
  CHECK(lam1 == doctest::Approx(std::pow(j01() / a, 2)).epsilon(5e-4));
  CHECK(std::fabs(s.means[0]) > 0.1); // radial mode couples to constants

  // first angular pair (j11/a)^2, zero-mean
  const double lam2 = richardson2(micro_h().spectrum().values[1], s.values[1]);
  CHECK(lam2 == doctest::Approx(std::pow(j11() / a, 2)).epsilon(1e-3));
  REQUIRE(s.cluster_ranges.size() >= 2);
  CHECK(s.cluster_ranges[1].second - s.cluster_ranges[1].first == 2);
  CHECK(s.cluster_zero_mean[1]);
  CHECK_FALSE(s.cluster_zero_mean[0]);

  // Parseval: partial sums below |Q0|, increasing in J
  double partial = 0.0;
  for (int j = 0; j < (int)s.values.size(); ++j) {
    partial += s.means[j] * s.means[j];
    CHECK(partial <= s.area_q0 * (1.0 + 1e-8));
  }
  CHECK(partial > 0.9 * 4.0 * M_PI * a * a / std::pow(j01(), 2)); // first radial term dominates
}

TEST_CASE("eta field: identity at zero, pole rejection, series cross-check") {
  const auto& m = micro_h();

  const auto eta0 = m.solve_eta(0.0);
  for (Index v = 0; v < eta0.u.size(); ++v) CHECK(eta0.u[v] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(eta0.B == doctest::Approx(0.0));

  CHECK_THROWS_WITH_AS(m.solve_eta(m.spectrum().values[0]), doctest::Contains("pole"), SolveError);

  // lambda0 = 50 below the first pole: <eta> above |Q0|, matches the
  // truncated spectral series evaluated independently
  const auto eta50 = m.solve_eta(50.0);
  CHECK(eta50.mean > m.spectrum().area_q0);
  double series = m.spectrum().area_q0;
  for (std::size_t j = 0; j < m.spectrum().values.size(); ++j)
    series += 50.0 * std::pow(m.spectrum().means[j], 2) / (m.spectrum().values[j] - 50.0);
  CHECK(eta50.mean == doctest::Approx(series).epsilon(2e-3));

  // consistent-flux identity: sum of boundary flux rows equals -B exactly
  CHECK(eta50.flux_sum == doctest::Approx(-eta50.B).epsilon(1e-10));
}

TEST_CASE("beta backends agree away from poles (interval contains direct)") {
  const auto& m = micro_h2();
  const AnalyticBallBeta an{2, 0.25};
  const auto poles = an.poles(500.0);
  int checked = 0;
  for (double lam = 5.0; lam <= 420.0; lam += 8.3) {
    bool near_pole = false;
    for (double p : poles) near_pole |= std::fabs(lam - p) < 0.05 * p;
    if (near_pole) continue;
    ++checked;
    const auto bs = m.beta_series(lam);
    const auto bd = m.beta_direct(lam);
    const auto ba = an.eval(lam);
    const double scale = std::max(std::fabs(ba.beta), (1.0 - M_PI / 16.0) * lam);
    CHECK(std::fabs(bd.beta - ba.beta) < 2.5e-2 * scale); // single-mesh FEM error
    CHECK(bs.lo - 5e-3 * scale < bd.beta);
    CHECK(bs.hi + 5e-3 * scale > bd.beta);
  }
  CHECK(checked >= 40);
}

TEST_CASE("beta at zero and positivity below the first pole") {
  const auto& m = micro_h();
  CHECK(m.beta_direct(0.0).beta == doctest::Approx(0.0));
  CHECK(m.beta_direct(0.0).B == doctest::Approx(0.0));
  const double q1 = m.area_q1();
  for (double lam : {5.0, 20.0, 45.0, 70.0, 88.0})
    CHECK(m.beta_direct(lam).beta > q1 * lam); // beta > |Q1| lambda on (0, lam_1^D)
}

TEST_CASE("analytic ball backend n=3 closed form") {
  const AnalyticBallBeta ball{3, 0.3};
  const double lam = 2.0;
  const double x = std::sqrt(lam) * 0.3;
  const double expect_B = 4.0 * M_PI * 0.3 * (1.0 - x * std::cos(x) / std::sin(x));
  CHECK(ball.eval(lam).B == doctest::Approx(expect_B).epsilon(1e-12));
  CHECK(ball.eval(lam).beta ==
        doctest::Approx(lam * (1.0 - 4.0 * M_PI * 0.027 / 3.0) + expect_B).epsilon(1e-12));
  CHECK(std::fabs(ball.eval(0.0).B) < 1e-12);
  // poles at (k pi / a)^2
  const auto p = ball.poles(450.0);
  REQUIRE(p.size() >= 2);
  CHECK(p[0] == doctest::Approx(std::pow(M_PI / 0.3, 2)));
}

TEST_CASE("limit spectrum of the disk: zero root, bracketed root, zero-mean pair") {
  const auto& m = micro_h();
  const auto ls = m.limit_spectrum(460.0);
  REQUIRE(ls.entries.size() >= 3);
  CHECK(ls.entries[0].value == doctest::Approx(0.0));
  CHECK(ls.entries[0].from_root);

  // the first pole must bracket the next root below the second pole
  REQUIRE(ls.poles.size() >= 1);
  const double p1 = ls.poles[0];
  bool root_found = false;
  for (const auto& e : ls.entries)
    if (e.from_root && e.value > p1) {
      root_found = true;
      CHECK(e.bracket_lo >= p1);
      break;
    }
  CHECK(root_found);

  // zero-mean pair appears with multiplicity 2
  bool pair_found = false;
  for (const auto& e : ls.entries)
    if (e.from_zero_mean && e.multiplicity >= 2) pair_found = true;
  CHECK(pair_found);

  CHECK_THROWS_AS(m.limit_spectrum(1e6), std::invalid_argument);
}

TEST_CASE("analytic backend: disk roots of B coincide with J1 zeros") {
  // For the disk, B = 2 pi x J1(x)/J0(x): roots at x = j_{1,k}, i.e. at the
  // angular Dirichlet eigenvalues. The generic separation of case (a) roots
  // from sigma_D degenerates for disks.
  const AnalyticBallBeta an{2, 0.25};
  const auto& m = micro_h();
  const auto ls = m.limit_spectrum(460.0, an.B_function(), an.poles(470.0));
  bool found = false;
  const double expect = std::pow(j11() / 0.25, 2);
  for (const auto& e : ls.entries)
    if (e.from_root && std::fabs(e.value - expect) < 1e-6 * expect) found = true;
  CHECK(found);
}

TEST_CASE("theorem equivalence: zeta operator spectrum vs limit spectrum (small)") {
  const auto& mh = micro_h();
  const auto& mf = micro_h2();
  // first five entries with multiplicity: 0, root~234.9 triple-cluster region,
  // compared after Richardson extrapolation entrywise
  const auto lim_h = mh.limit_spectrum(300.0).flattened();
  const auto lim_f = mf.limit_spectrum(300.0).flattened();
  const auto zet_h = mh.zeta_operator_spectrum(4).values;
  const auto zet_f = mf.zeta_operator_spectrum(4).values;
  REQUIRE(lim_h.size() >= 4);
  REQUIRE(lim_f.size() >= 4);
  for (int i = 0; i < 4; ++i) {
    const double lim = richardson2(lim_h[i], lim_f[i]);
    const double zet = richardson2(zet_h[i], zet_f[i]);
    CHECK(std::fabs(lim - zet) <= 2e-3 * std::max(1.0, std::fabs(zet)));
  }
  // lowest zeta eigenvalue is 0 with constant eigenfunction
  CHECK(std::fabs(zet_f[0]) < 1e-8);
  const auto zs = mf.zeta_operator_spectrum(4);
  const Vec v0 = zs.vectors.col(0);
  const double spread = (v0.array() - v0.mean()).abs().maxCoeff();
  CHECK(spread < 1e-6 * std::fabs(v0.mean()));
}

TEST_CASE("zeta eigenfunctions for distinct eigenvalues are L2-orthogonal") {
  const auto& m = micro_h();
  const auto zs = m.zeta_operator_spectrum(5);
  const auto constrained = apply_constraints(m.forms(), ConstraintKind::ConstantOnGamma,
                                             m.q0_mesh());
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < i; ++j) {
      const double mij = zs.vectors.col(i).dot(constrained.M * zs.vectors.col(j));
      CHECK(std::fabs(mij) < 1e-8);
    }
}

TEST_CASE("case classification") {
  const auto& m = micro_h();
  const auto ls = m.limit_spectrum(460.0);
  // second nonzero root of B: strictly between poles at this resolution
  double mu2 = -1.0;
  for (const auto& e : ls.entries)
    if (e.from_root && e.value > 1.0 && !e.from_zero_mean) {
      mu2 = e.value;
      break;
    }
  REQUIRE(mu2 > 0.0);
  const auto tag_a = m.classify_case(mu2);
  CHECK(tag_a.kind == CaseKind::A);

  // nonzero-mean pole -> case (b-i)
  const auto tag_bi = m.classify_case(m.spectrum().values[0]);
  CHECK(tag_bi.kind == CaseKind::Bi);

  // zero-mean pair -> case (b-ii); discrete B there is small but nonzero
  const auto tag_bii = m.classify_case(m.spectrum().values[1]);
  CHECK(tag_bii.kind == CaseKind::Bii);
  CHECK(tag_bii.raw_means.size() == 2);
}

TEST_CASE("ellipse: mu_2 is a clean case (a) root separated from sigma_D") {
  Micro m(build_cell_mesh(CellGeometry::ellipse(0.3, 0.2), 0.035), 14);
  const auto ls = m.limit_spectrum(0.9 * m.spectrum().values.back());
  double mu2 = -1.0;
  for (const auto& e : ls.entries)
    if (e.from_root && e.value > 1.0 && !e.from_zero_mean) {
      mu2 = e.value;
      break;
    }
  REQUIRE(mu2 > 0.0);
  double dist = 1e300;
  for (double lam : m.spectrum().values) dist = std::min(dist, std::fabs(lam - mu2));
  CHECK(dist / mu2 > 5e-3); // genuinely off the Dirichlet spectrum
  CHECK(m.classify_case(mu2).kind == CaseKind::A);
  // its zero-mean modes are simple (split pair)
  int simple_zero_mean = 0;
  const auto& s = m.spectrum();
  for (std::size_t c = 0; c < s.cluster_ranges.size(); ++c)
    if (s.cluster_zero_mean[c] && s.cluster_ranges[c].second - s.cluster_ranges[c].first == 1)
      ++simple_zero_mean;
  CHECK(simple_zero_mean >= 2);
}
