#include "dhc/cell.hpp"

#include <cmath>

namespace dhc {

namespace {

// load vector b_i = int f phi_i with elementwise-constant f
Vec elementwise_load(const Mesh& mesh, const std::vector<double>& f_elem) {
  Vec b = Vec::Zero(mesh.n_vertices());
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const double w = f_elem[e] * mesh.elem_area(e) / 3.0;
    for (Index v : mesh.elems[e]) b[v] += w;
  }
  return b;
}

} // namespace

Cell::Cell(const Mesh& cell_mesh, const Micro& micro, const Tolerances& tol)
    : micro_(&micro), q1_(extract_region(cell_mesh, Region::Q1)), gb1_(gamma_boundary(q1_.mesh)),
      tol_(tol), parent_n_(cell_mesh.n_vertices()) {
  forms_q1_ = assemble(q1_.mesh, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
  periodic_ = apply_constraints(forms_q1_, ConstraintKind::PeriodicCell, q1_.mesh);
  area_q1_ = q1_.mesh.region_area(Region::Q1);

  const Vec ones = Vec::Ones(q1_.mesh.n_vertices());
  for (int j = 0; j < 2; ++j) {
    // Delta N_j = 0 in Q1, dN_j/dn = -n_j on Gamma (n outward from Q0):
    // the weak form carries +int_Gamma n_j v on the right-hand side
    const Vec b = gamma_normal_load(q1_.mesh, gb1_, j, ones);
    LinearSolveInfo info;
    const Vec nr = solve_linear(periodic_, periodic_.reduce(b), &info, tol_);
    N_[j] = periodic_.prolong(nr);
  }
}

Eigen::Matrix2d Cell::homogenized_matrix(double* asym) const {
  Eigen::Matrix2d A;
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k)
      A(j, k) = (j == k ? area_q1_ : 0.0) + integrate_gradient(q1_.mesh, N_[k], Region::Q1, j);
  const double a = std::fabs(A(0, 1) - A(1, 0));
  if (asym) *asym = a;
  if (a > 1e-8)
    throw SolveError("homogenized matrix antisymmetric residual " + std::to_string(a));
  return 0.5 * (A + A.transpose());
}

Vec Cell::q1_to_q0(const Vec& u) const {
  Vec up = Vec::Zero(parent_n_);
  for (Index v = 0; v < q1_.mesh.n_vertices(); ++v) up[q1_.parent_vertex[v]] = u[v];
  const auto& q0 = micro_->q0_submesh();
  Vec out = Vec::Zero(q0.mesh.n_vertices());
  for (Index v = 0; v < q0.mesh.n_vertices(); ++v) out[v] = up[q0.parent_vertex[v]];
  return out;
}

Vec Cell::q0_to_q1(const Vec& u) const {
  Vec up = Vec::Zero(parent_n_);
  const auto& q0 = micro_->q0_submesh();
  for (Index v = 0; v < q0.mesh.n_vertices(); ++v) up[q0.parent_vertex[v]] = u[v];
  Vec out = Vec::Zero(q1_.mesh.n_vertices());
  for (Index v = 0; v < q1_.mesh.n_vertices(); ++v) out[v] = up[q1_.parent_vertex[v]];
  return out;
}

Vec Cell::solve_q1_neumann(const Vec& load_parent, double defect_tol, double* defect) const {
  Vec b = Vec::Zero(q1_.mesh.n_vertices());
  for (Index v = 0; v < q1_.mesh.n_vertices(); ++v) b[v] = load_parent[q1_.parent_vertex[v]];
  LinearSolveInfo info;
  const Vec ur = solve_linear(periodic_, periodic_.reduce(b), &info, tol_, defect_tol);
  if (defect) *defect = info.compatibility_defect;
  return periodic_.prolong(ur);
}

Vec Cell::solve_calN(const EtaField& eta, double* B_defect) const {
  // weak form: int_Q1 grad calN . grad v = -int_Gamma v deta/dn
  const auto& q0 = micro_->q0_submesh();
  Vec load = Vec::Zero(parent_n_);
  for (Index v = 0; v < q0.mesh.n_vertices(); ++v) load[q0.parent_vertex[v]] = -eta.flux[v];
  double defect = 0.0;
  const Vec calN = solve_q1_neumann(load, tol_.solvability, &defect);
  if (B_defect) *B_defect = -defect; // defect = -B(lambda0) discretely
  return calN;
}

Cell::MPRFields Cell::solve_MPR(double lambda0, const EtaField& eta, const Vec& calN) const {
  const auto& q0 = micro_->q0_submesh();
  const auto& forms0 = micro_->forms();
  const auto& gamma0 = micro_->gamma();
  MPRFields out;

  for (int j = 0; j < 2; ++j) {
    std::vector<double> f(q0.mesh.n_elements());
    double g[2];
    for (Index e = 0; e < q0.mesh.n_elements(); ++e) {
      element_gradient(q0.mesh, eta.u, e, g);
      f[e] = 2.0 * g[j];
    }
    const Vec load = elementwise_load(q0.mesh, f);
    const Vec trace = q1_to_q0(N_[j]);
    const auto r =
        helmholtz_dirichlet(q0.mesh, forms0, lambda0, gamma0.vertices, trace, load, {}, tol_);
    out.M[j] = r.u;
    out.flux_M[j] = r.flux;
  }

  {
    const Vec trace = q1_to_q0(calN);
    const auto r =
        helmholtz_dirichlet(q0.mesh, forms0, lambda0, gamma0.vertices, trace, Vec(), {}, tol_);
    out.P = r.u;
  }

  {
    const Vec load = forms0.M_full * eta.u;
    const Vec zero = Vec::Zero(q0.mesh.n_vertices());
    const auto r =
        helmholtz_dirichlet(q0.mesh, forms0, lambda0, gamma0.vertices, zero, load, {}, tol_);
    out.R = r.u;
    out.flux_R = r.flux;
  }
  return out;
}

CellTensors Cell::tensors(double lambda0) const {
  CellTensors t;
  t.lambda0 = lambda0;
  t.A_hom = homogenized_matrix(&t.ahom_asym);

  const EtaField eta = micro_->solve_eta(lambda0);
  t.eta_mean = eta.mean;

  double bdef = 0.0;
  const Vec calN = solve_calN(eta, &bdef);
  t.solvability_defect = bdef;

  const auto mpr = solve_MPR(lambda0, eta, calN);

  const auto& q0 = micro_->q0_submesh();
  const auto& forms0 = micro_->forms();
  t.C = eta.u.dot(forms0.M_full * eta.u);
  t.C_flux = -mpr.flux_R.sum();
  t.P_int = integrate(q0.mesh, mpr.P, Region::Q0);
  t.nu_const = lambda0 * (area_q1_ + t.P_int);

  for (int j = 0; j < 2; ++j)
    t.K[j] = integrate_gradient(q1_.mesh, calN, Region::Q1, j) - mpr.flux_M[j].sum();

  // Green identities on Gamma through the prescribed conormal data:
  // int_G calN dN_j/dn = int_G N_j dcalN/dn and int_G M_j deta/dn likewise
  const Vec ones1 = Vec::Ones(q1_.mesh.n_vertices());
  double a9 = 0.0, a10 = 0.0;
  for (int j = 0; j < 2; ++j) {
    const Vec bN = gamma_normal_load(q1_.mesh, gb1_, j, ones1);
    const double lhs9 = -calN.dot(bN);            // dN_j/dn_y = -n_j
    const double rhs = q1_to_q0(N_[j]).dot(eta.flux); // dcalN/dn_y data = deta/dn_y
    a9 = std::max(a9, std::fabs(lhs9 - rhs));
    const double lhs10 = mpr.M[j].dot(eta.flux);
    a10 = std::max(a10, std::fabs(lhs10 - rhs));
  }
  t.green_a9 = a9;
  t.green_a10 = a10;
  return t;
}

} // namespace dhc
