#include "dhc/micro.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dhc/bessel.hpp"

namespace dhc {

int DirichletSpectrum::cluster_of(int j) const {
  for (int c = 0; c < (int)cluster_ranges.size(); ++c)
    if (j >= cluster_ranges[c].first && j < cluster_ranges[c].second) return c;
  return -1;
}

double DirichletSpectrum::sum_mean_sq() const {
  double s = 0.0;
  for (double m : means) s += m * m;
  return s;
}

std::vector<double> LimitSpectrum::flattened() const {
  std::vector<double> out;
  for (const auto& e : entries)
    for (int i = 0; i < e.multiplicity; ++i) out.push_back(e.value);
  return out;
}

Micro::Micro(const Mesh& cell_mesh, int mode_count, const Tolerances& tol)
    : q0_(extract_region(cell_mesh, Region::Q0)), gamma_(gamma_boundary(q0_.mesh)), tol_(tol) {
  if (mode_count < 1) throw std::invalid_argument("mode count must be >= 1");
  forms_ = assemble(q0_.mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  const auto constrained = apply_constraints(forms_, ConstraintKind::DirichletGamma, q0_.mesh);
  const auto s = solve_eigen(constrained, mode_count + 1, -1e300, tol_);

  spec_.area_q0 = q0_.mesh.region_area(Region::Q0);
  spec_.tail_pole = s.values[mode_count];
  spec_.values.assign(s.values.begin(), s.values.begin() + mode_count);
  spec_.vectors.resize(q0_.mesh.n_vertices(), mode_count);
  for (int j = 0; j < mode_count; ++j) {
    Vec full = constrained.prolong(s.vectors.col(j));
    // deterministic sign: largest-magnitude entry positive
    Index imax = 0;
    for (Index v = 1; v < full.size(); ++v)
      if (std::fabs(full[v]) > std::fabs(full[imax])) imax = v;
    if (full[imax] < 0.0) full = -full;
    spec_.vectors.col(j) = full;
    spec_.means.push_back(integrate(q0_.mesh, full, Region::Q0));
  }

  Spectrum tmp;
  tmp.values = spec_.values;
  spec_.cluster_ranges = tmp.clusters(tol_.cluster_gap);
  for (auto [b, e] : spec_.cluster_ranges) {
    double msq = 0.0;
    for (int j = b; j < e; ++j) msq += spec_.means[j] * spec_.means[j];
    spec_.cluster_mean_sq.push_back(msq);
    // zero-mean iff the constant function has no component in the cluster span
    spec_.cluster_zero_mean.push_back(std::sqrt(msq) <= tol_.mean_zero * std::sqrt(double(e - b)));
  }
}

EtaField Micro::solve_eta(double lambda0) const {
  std::vector<Vec> deflate;
  for (std::size_t c = 0; c < spec_.cluster_ranges.size(); ++c) {
    const double lc = spec_.values[spec_.cluster_ranges[c].first];
    if (std::fabs(lambda0 - lc) <= tol_.pole * std::max(1.0, std::fabs(lc))) {
      if (!spec_.cluster_zero_mean[c]) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "eta solve: lambda0 = %.6g lies on a nonzero-mean Dirichlet pole %.6g",
                      lambda0, lc);
        throw SolveError(buf);
      }
      for (int j = spec_.cluster_ranges[c].first; j < spec_.cluster_ranges[c].second; ++j)
        deflate.push_back(spec_.vectors.col(j));
    }
  }

  EtaField out;
  out.deflated = !deflate.empty();
  out.lambda0 = lambda0;
  Vec ones = Vec::Ones(q0_.mesh.n_vertices());
  const auto res =
      helmholtz_dirichlet(q0_.mesh, forms_, lambda0, gamma_.vertices, ones, Vec(), deflate, tol_);
  out.u = res.u;
  out.flux = res.flux;
  out.mean = integrate(q0_.mesh, out.u, Region::Q0);
  out.B = lambda0 * out.mean;
  out.flux_sum = res.flux.sum();
  return out;
}

BetaValue Micro::beta_series(double lambda) const {
  BetaValue v;
  double sum = 0.0;
  for (std::size_t c = 0; c < spec_.cluster_ranges.size(); ++c) {
    if (spec_.cluster_zero_mean[c]) continue;
    const double lc = spec_.values[spec_.cluster_ranges[c].first];
    if (std::fabs(lc - lambda) <= tol_.pole * std::max(1.0, lc))
      throw SolveError("beta series: lambda within pole tolerance");
    sum += spec_.cluster_mean_sq[c] / (lc - lambda);
  }
  const double trunc = lambda + lambda * lambda * sum;
  // Parseval bound on the truncated tail, valid below the (J+1)-th eigenvalue
  const double tail_mass = std::max(0.0, spec_.area_q0 - spec_.sum_mean_sq());
  double tail = 0.0;
  if (lambda < spec_.tail_pole) tail = lambda * lambda * tail_mass / (spec_.tail_pole - lambda);
  v.lo = trunc;
  v.hi = trunc + tail;
  v.beta = 0.5 * (v.lo + v.hi);
  v.B = v.beta - area_q1() * lambda;
  return v;
}

BetaValue Micro::beta_direct(double lambda) const {
  const EtaField eta = solve_eta(lambda);
  BetaValue v;
  v.B = eta.B;
  v.beta = v.B + area_q1() * lambda;
  v.lo = v.hi = v.beta;
  return v;
}

std::vector<double> Micro::poles(double lambda_max) const {
  std::vector<double> p;
  for (std::size_t c = 0; c < spec_.cluster_ranges.size(); ++c)
    if (!spec_.cluster_zero_mean[c]) {
      const double lc = spec_.values[spec_.cluster_ranges[c].first];
      if (lc <= lambda_max) p.push_back(lc);
    }
  return p;
}

LimitSpectrum Micro::limit_spectrum(double lambda_max) const {
  auto B = [this](double lam) { return beta_direct(lam).B; };
  return limit_spectrum(lambda_max, B, poles(lambda_max * 1.0001));
}

LimitSpectrum Micro::limit_spectrum(double lambda_max, const std::function<double(double)>& B,
                                    const std::vector<double>& pole_list) const {
  if (lambda_max >= spec_.tail_pole * 0.95)
    throw std::invalid_argument("lambda_max exceeds the resolved spectral range");

  LimitSpectrum out;
  out.poles = pole_list;

  std::vector<LimitEntry> cand;
  cand.push_back({0.0, 1, true, false, 0.0, 0.0}); // B(0) = 0 always

  // pole-separated brackets, kept clear of the poles by a relative margin
  const double off = std::max(2.0 * tol_.pole, 5e-3);
  std::vector<std::pair<double, double>> brackets;
  double lo = 1e-8;
  for (double p : pole_list) {
    if (p > lambda_max) break;
    brackets.emplace_back(lo, p * (1.0 - off));
    lo = p * (1.0 + off);
  }
  brackets.emplace_back(lo, lambda_max);

  for (auto [a, b] : brackets) {
    if (b <= a) continue;
    const int n_scan = 64;
    double prev_x = a, prev_f = B(a);
    for (int i = 1; i <= n_scan; ++i) {
      const double x = a + (b - a) * i / n_scan;
      const double f = B(x);
      if (prev_f == 0.0) {
        cand.push_back({prev_x, 1, true, false, prev_x, prev_x});
      } else if (prev_f * f < 0.0) {
        double x0 = prev_x, x1 = x, f0 = prev_f;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (x0 + x1);
          const double fm = B(mid);
          if (f0 * fm <= 0.0) {
            x1 = mid;
          } else {
            x0 = mid;
            f0 = fm;
          }
        }
        const double root = 0.5 * (x0 + x1);
        if (root > 1e-10) cand.push_back({root, 1, true, false, prev_x, x});
      }
      prev_x = x;
      prev_f = f;
    }
  }

  for (std::size_t c = 0; c < spec_.cluster_ranges.size(); ++c) {
    if (!spec_.cluster_zero_mean[c]) continue;
    const double lc = spec_.values[spec_.cluster_ranges[c].first];
    if (lc > lambda_max) continue;
    cand.push_back({lc, spec_.cluster_ranges[c].second - spec_.cluster_ranges[c].first, false,
                    true, 0.0, 0.0});
  }

  std::sort(cand.begin(), cand.end(),
            [](const LimitEntry& x, const LimitEntry& y) { return x.value < y.value; });
  for (const auto& e : cand) {
    if (!out.entries.empty() &&
        std::fabs(e.value - out.entries.back().value) <=
            tol_.cluster_gap * std::max(1.0, std::fabs(e.value))) {
      auto& last = out.entries.back();
      last.multiplicity += e.multiplicity;
      last.from_root |= e.from_root;
      last.from_zero_mean |= e.from_zero_mean;
    } else {
      out.entries.push_back(e);
    }
  }
  return out;
}

Spectrum Micro::zeta_operator_spectrum(int count) const {
  const auto constrained = apply_constraints(forms_, ConstraintKind::ConstantOnGamma, q0_.mesh);
  return solve_eigen(constrained, count, -1e300, tol_);
}

CaseTag Micro::classify_case(double lambda0) const {
  CaseTag tag;
  if (lambda0 > spec_.values.back())
    throw std::invalid_argument("classify_case: lambda0 beyond the resolved range");
  double best = 1e300;
  int best_cluster = -1;
  for (std::size_t c = 0; c < spec_.cluster_ranges.size(); ++c) {
    const double lc = spec_.values[spec_.cluster_ranges[c].first];
    const double d = std::fabs(lambda0 - lc) / std::max(1.0, std::fabs(lambda0));
    if (d < best) {
      best = d;
      best_cluster = (int)c;
    }
  }
  tag.dist_rel = best;

  if (best >= 0.5 * tol_.pole && best <= 2.0 * tol_.pole) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "classify_case: ambiguous, lambda0 at relative distance %.3e from a cluster "
                  "boundary (tol %.1e)",
                  best, tol_.pole);
    throw SolveError(buf);
  }

  if (best > tol_.pole) {
    tag.kind = CaseKind::A;
    tag.b_value = beta_direct(lambda0).B;
    return tag;
  }

  const auto [b, e] = spec_.cluster_ranges[best_cluster];
  for (int j = b; j < e; ++j) tag.raw_means.push_back(spec_.means[j]);
  if (!spec_.cluster_zero_mean[best_cluster]) {
    tag.kind = CaseKind::Bi;
    return tag;
  }
  tag.kind = CaseKind::Bii;
  tag.b_value = beta_direct(lambda0).B;
  tag.b_zero = std::fabs(tag.b_value) <= 1e-3 * std::max(1.0, area_q1() * lambda0);
  return tag;
}

BetaValue AnalyticBallBeta::eval(double lambda) const {
  BetaValue v;
  const double a = radius;
  if (dimension == 2) {
    const double x = std::sqrt(std::max(lambda, 0.0)) * a;
    double ratio; // J1(x)/(x J0(x)), analytic at x = 0
    if (x < 1e-4) {
      ratio = 0.5 + x * x / 16.0;
    } else {
      const double j0 = bessel_j0(x);
      if (std::fabs(j0) < 1e-14) throw SolveError("analytic beta: lambda at a pole");
      ratio = bessel_j1(x) / (x * j0);
    }
    v.B = 2.0 * M_PI * a * a * lambda * ratio;
    v.beta = lambda * (1.0 - M_PI * a * a) + v.B;
  } else if (dimension == 3) {
    const double x = std::sqrt(std::max(lambda, 0.0)) * a;
    double cot_term; // x cot x, analytic at 0
    if (x < 1e-4) {
      cot_term = 1.0 - x * x / 3.0;
    } else {
      const double s = std::sin(x);
      if (std::fabs(s) < 1e-14) throw SolveError("analytic beta: lambda at a pole");
      cot_term = x * std::cos(x) / s;
    }
    v.B = 4.0 * M_PI * a * (1.0 - cot_term);
    v.beta = lambda * (1.0 - 4.0 * M_PI * a * a * a / 3.0) + v.B;
  } else {
    throw std::invalid_argument("analytic ball backend supports n = 2 or 3");
  }
  v.lo = v.hi = v.beta;
  return v;
}

std::vector<double> AnalyticBallBeta::poles(double lambda_max) const {
  std::vector<double> p;
  for (int k = 1; k < 1000; ++k) {
    const double root = dimension == 2 ? bessel_j0_zero(k) : k * M_PI;
    const double lam = root * root / (radius * radius);
    if (lam > lambda_max) break;
    p.push_back(lam);
  }
  return p;
}

std::function<double(double)> AnalyticBallBeta::B_function() const {
  return [copy = *this](double lam) { return copy.eval(lam).B; };
}

} // namespace dhc
