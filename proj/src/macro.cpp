#include "dhc/macro.hpp"

#include <cmath>

namespace dhc {

MacroSpectrum macro_spectrum(const Eigen::Matrix2d& A, const Mesh& omega_mesh, int count,
                             const Tolerances& tol) {
  const auto forms = assemble_matrix_diffusion(omega_mesh, A, RegionCoeff::uniform(1.0));
  const auto constrained = apply_constraints(forms, ConstraintKind::DirichletOuter, omega_mesh);
  const auto s = solve_eigen(constrained, count, -1e300, tol);

  MacroSpectrum out;
  out.nu = s.values;
  if (out.nu.front() <= 0.0) throw SolveError("macro spectrum must be strictly positive");
  out.vectors.resize(omega_mesh.n_vertices(), count);
  for (int j = 0; j < count; ++j) out.vectors.col(j) = constrained.prolong(s.vectors.col(j));
  out.clusters = s.clusters(tol.cluster_gap);
  return out;
}

std::vector<Prediction> make_predictions(const std::vector<Branch>& branches,
                                         const MacroSpectrum& macro,
                                         const std::vector<double>& eps_list,
                                         const Tolerances& tol) {
  (void)tol;
  std::vector<Prediction> out;
  auto mult_of = [&](int idx) {
    for (auto [b, e] : macro.clusters)
      if (idx >= b && idx < e) return e - b;
    return 1;
  };
  for (const auto& br : branches) {
    if (br.kind == CaseKind::A) {
      if (!br.tensors) throw std::invalid_argument("case (a) branch needs cell tensors");
      for (int i = 0; i < (int)macro.nu.size(); ++i) {
        const double l1 = br.tensors->lambda1_of_nu(macro.nu[i]);
        for (double eps : eps_list) {
          Prediction p;
          p.lambda0 = br.lambda0;
          p.kind = br.kind;
          p.nu_index = i;
          p.nu = macro.nu[i];
          p.nu_multiplicity = mult_of(i);
          p.lambda1 = l1;
          p.eps = eps;
          p.Lambda = br.lambda0 + eps * l1;
          out.push_back(p);
        }
      }
    } else {
      if (!br.lambda1_fixed) {
        if (br.kind == CaseKind::Bi)
          throw std::invalid_argument(
              "case (b-i) carries no first-order construction; supply lambda1 explicitly");
        throw std::invalid_argument("case (b) branch needs a lambda1 value");
      }
      for (double eps : eps_list) {
        Prediction p;
        p.lambda0 = br.lambda0;
        p.kind = br.kind;
        p.lambda1 = *br.lambda1_fixed;
        p.eps = eps;
        p.Lambda = br.lambda0 + eps * p.lambda1;
        out.push_back(p);
      }
    }
  }
  return out;
}

std::vector<GapInterval> gap_intervals(const LimitSpectrum& ls,
                                       const std::function<double(double)>& B,
                                       double lambda_max) {
  std::vector<GapInterval> out;
  for (double p : ls.poles) {
    if (p >= lambda_max) break;
    // next root of B above the pole
    double root = -1.0;
    for (const auto& e : ls.entries)
      if (e.from_root && e.value > p) {
        root = e.value;
        break;
      }
    if (root < 0.0 || root > lambda_max) root = lambda_max;
    GapInterval g;
    g.lo = p;
    g.hi = root;
    // certify the sign just inside the interval
    const double da = 0.01 * (g.hi - g.lo);
    g.B_lo = B(g.lo + da);
    g.B_hi = B(g.hi - da);
    g.certified = g.B_lo < 0.0 && g.B_hi < 0.0;
    out.push_back(g);
  }
  return out;
}

} // namespace dhc
