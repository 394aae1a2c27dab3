#include "dhc/pipeline.hpp"

#include <cmath>

namespace dhc {

namespace {

double nth_nonzero_root(const LimitSpectrum& ls, int k) {
  int seen = 0;
  for (const auto& e : ls.entries)
    if (e.from_root && e.value > 1e-9 && ++seen == k) return e.value;
  throw SolveError("requested root of B not present in the resolved range");
}

} // namespace

MicroStudy::MicroStudy(const CellGeometry& geom, double h, int modes, double lambda_max,
                       int zeta_count, const Tolerances& tol)
    : mesh_h(build_cell_mesh(geom, h)), mesh_f(build_cell_mesh(geom, h / 2.0)) {
  micro_h = std::make_unique<Micro>(mesh_h, modes, tol);
  micro_f = std::make_unique<Micro>(mesh_f, modes, tol);
  limit_h = micro_h->limit_spectrum(lambda_max);
  limit_f = micro_f->limit_spectrum(lambda_max);

  const auto flat_h = limit_h.flattened();
  const auto flat_f = limit_f.flattened();
  const std::size_t n = std::min(flat_h.size(), flat_f.size());
  for (std::size_t i = 0; i < n; ++i) limit_extrap.push_back(richardson2(flat_h[i], flat_f[i]));

  const auto zh = micro_h->zeta_operator_spectrum(zeta_count).values;
  const auto zf = micro_f->zeta_operator_spectrum(zeta_count).values;
  for (int i = 0; i < zeta_count; ++i) zeta_extrap.push_back(richardson2(zh[i], zf[i]));

  mu2_h = nth_nonzero_root(limit_h, 1);
  mu2_f = nth_nonzero_root(limit_f, 1);
  mu2 = richardson2(mu2_h, mu2_f);
}

CellStudy::CellStudy(const CellGeometry& geom, double h, int nonzero_root_index, int modes,
                     const Tolerances& tol) {
  const Mesh mesh_h = build_cell_mesh(geom, h);
  const Mesh mesh_f = build_cell_mesh(geom, h / 2.0);
  Micro micro_h(mesh_h, modes, tol);
  Micro micro_f(mesh_f, modes, tol);
  Cell cell_h(mesh_h, micro_h, tol);
  Cell cell_f(mesh_f, micro_f, tol);

  if (nonzero_root_index > 0) {
    const double guess = nth_nonzero_root(
        micro_h.limit_spectrum(0.9 * micro_h.spectrum().tail_pole), nonzero_root_index);
    lambda0_h = guess;
    lambda0_f = nth_nonzero_root(micro_f.limit_spectrum(0.9 * micro_f.spectrum().tail_pole),
                                 nonzero_root_index);
  }
  t_h = cell_h.tensors(lambda0_h);
  t_f = cell_f.tensors(lambda0_f);

  lambda0 = richardson2(lambda0_h, lambda0_f);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) A_extrap(i, j) = richardson2(t_h.A_hom(i, j), t_f.A_hom(i, j));
  C_extrap = richardson2(t_h.C, t_f.C);
  P_int_extrap = richardson2(t_h.P_int, t_f.P_int);
  nu_const_extrap = richardson2(t_h.nu_const, t_f.nu_const);
}

MacroStudy::MacroStudy(const Eigen::Matrix2d& A, int n_, int count, const Tolerances& tol)
    : coarse(macro_spectrum(A, build_square_mesh(n_), count, tol)),
      fine(macro_spectrum(A, build_square_mesh(2 * n_), count, tol)), n(n_) {
  for (int i = 0; i < count; ++i) nu_extrap.push_back(richardson2(coarse.nu[i], fine.nu[i]));
}

} // namespace dhc
