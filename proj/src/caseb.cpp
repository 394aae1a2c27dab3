#include "dhc/caseb.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace dhc {

namespace {

Vec elementwise_load(const Mesh& mesh, const std::vector<double>& f_elem) {
  Vec b = Vec::Zero(mesh.n_vertices());
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const double w = f_elem[e] * mesh.elem_area(e) / 3.0;
    for (Index v : mesh.elems[e]) b[v] += w;
  }
  return b;
}

// load of 2 d(phi)/dy_k against P1 hats
Vec gradient_load(const Mesh& mesh, const Vec& phi, int k, double factor) {
  std::vector<double> f(mesh.n_elements());
  double g[2];
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    element_gradient(mesh, phi, e, g);
    f[e] = factor * g[k];
  }
  return elementwise_load(mesh, f);
}

} // namespace

CaseB::CaseB(const Mesh& cell_mesh, const Micro& micro, const Cell& cell, const Tolerances& tol)
    : micro_(&micro), cell_(&cell), cell_mesh_(&cell_mesh), tol_(tol) {}

Vec CaseB::solve_V1(const Vec& phi, double lambda0, double* defect) const {
  const auto& q0 = micro_->q0_submesh();
  const auto& forms0 = micro_->forms();
  // consistent flux of phi on Gamma rows; the weak form of the V1 problem
  // carries -int_Gamma v dphi/dn on the right-hand side
  Vec flux = (forms0.K_full - lambda0 * forms0.M_full) * phi;
  Vec load_parent = Vec::Zero(cell_mesh_->n_vertices());
  for (Index v : micro_->gamma().vertices)
    load_parent[q0.parent_vertex[v]] = -flux[v];
  double d = 0.0;
  // the compatibility defect equals lambda0 <phi>
  Vec v1;
  try {
    v1 = cell_->solve_q1_neumann(load_parent, tol_.solvability, &d);
  } catch (const SolveError& e) {
    if (defect) *defect = d;
    throw SolveError(std::string("V1 solve: ") + e.what() +
                     " (phi is not zero-mean: defect = lambda0 <phi>)");
  }
  if (defect) *defect = d;
  return v1;
}

CaseBSolution CaseB::solve(int mode, bool allow_symmetric_pair) const {
  const auto& s = micro_->spectrum();
  if (mode < 0 || mode >= (int)s.values.size())
    throw std::invalid_argument("case (b): mode index out of range");
  const int c = s.cluster_of(mode);
  if (!s.cluster_zero_mean[c])
    throw std::invalid_argument("case (b): the selected mode has a nonzero mean");
  const auto [cb, ce] = s.cluster_ranges[c];
  if (ce - cb != 1 && !allow_symmetric_pair) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "case (b) handles multiplicity-1 eigenvalues only; cluster [%d,%d) has "
                  "multiplicity %d (enable the symmetry-sector reduction explicitly)",
                  cb, ce, ce - cb);
    throw std::invalid_argument(buf);
  }

  CaseBSolution sol;
  sol.mode_index = mode;
  sol.lambda0 = s.values[mode];
  sol.phi = s.vectors.col(mode);
  sol.eta = micro_->solve_eta(sol.lambda0);
  const double B = sol.eta.B;
  if (std::fabs(B) < 1e-8)
    throw SolveError("case (b): lambda0 <eta> vanishes (lambda0 is a root of B)");

  const auto& q0 = micro_->q0_submesh();
  const auto& q1 = cell_->q1_submesh();
  const auto& forms0 = micro_->forms();

  // --- V1 ---
  sol.V1_tilde = solve_V1(sol.phi, sol.lambda0, &sol.v1_defect);

  // --- lambda1, three routes ---
  sol.lambda1 = -energy(q1.mesh, sol.V1_tilde, Region::Q1);
  Vec phi_flux = (forms0.K_full - sol.lambda0 * forms0.M_full) * sol.phi;
  {
    const Vec v1_q0 = cell_->q1_to_q0(sol.V1_tilde);
    double acc = 0.0;
    for (Index v : micro_->gamma().vertices) acc += v1_q0[v] * phi_flux[v];
    sol.lambda1_boundary = acc;
  }
  {
    // raw route: elementwise gradient of phi on the Q0 side, edge quadrature
    std::map<std::pair<Index, Index>, Index> edge_elem;
    for (Index e = 0; e < q0.mesh.n_elements(); ++e) {
      const auto& t = q0.mesh.elems[e];
      for (int i = 0; i < 3; ++i) {
        const Index a = std::min(t[i], t[(i + 1) % 3]);
        const Index b = std::max(t[i], t[(i + 1) % 3]);
        edge_elem[{a, b}] = e;
      }
    }
    const auto& gb0 = micro_->gamma();
    const Vec v1_q0 = cell_->q1_to_q0(sol.V1_tilde);
    double acc = 0.0, g[2];
    for (std::size_t e = 0; e < gb0.edges.size(); ++e) {
      const Index a = gb0.edges[e][0], b = gb0.edges[e][1];
      const auto it = edge_elem.find({std::min(a, b), std::max(a, b)});
      element_gradient(q0.mesh, sol.phi, it->second, g);
      const double dphidn = g[0] * gb0.normal[e][0] + g[1] * gb0.normal[e][1];
      acc += dphidn * gb0.length[e] * 0.5 * (v1_q0[a] + v1_q0[b]);
    }
    sol.lambda1_raw_trace = acc;
  }

  // --- Z1 fields: nodal interpolants of -y_k phi, checked against the
  // discrete solutions of the same resonant problem (phi deflated, so the
  // comparison is modulo the phi component) ---
  {
    std::vector<Vec> deflate;
    for (int j = cb; j < ce; ++j) deflate.push_back(s.vectors.col(j));
    double worst = 0.0;
    for (int k = 0; k < 2; ++k) {
      Vec z(q0.mesh.n_vertices());
      for (Index v = 0; v < q0.mesh.n_vertices(); ++v)
        z[v] = -(k == 0 ? q0.mesh.vx[v] : q0.mesh.vy[v]) * sol.phi[v];
      sol.Z1[k] = z;
      const Vec load = gradient_load(q0.mesh, sol.phi, k, 2.0);
      const Vec zero = Vec::Zero(q0.mesh.n_vertices());
      const auto r = helmholtz_dirichlet(q0.mesh, forms0, sol.lambda0, micro_->gamma().vertices,
                                         zero, load, deflate, tol_);
      Vec diff = z - r.u;
      for (const Vec& d : deflate) diff -= (d.dot(forms0.M_full * diff)) * d;
      worst = std::max(worst, l2_norm(q0.mesh, diff, Region::Q0) /
                                  l2_norm(q0.mesh, z, Region::Q0));
    }
    sol.z1_residual = worst;
  }

  // --- W1_tilde with phi deflated, then the A_tilde constant ---
  {
    const Vec load = sol.lambda1 * (forms0.M_full * sol.phi);
    const Vec trace = cell_->q1_to_q0(sol.V1_tilde);
    std::vector<Vec> deflate;
    for (int j = cb; j < ce; ++j) deflate.push_back(s.vectors.col(j));
    const auto r = helmholtz_dirichlet(q0.mesh, forms0, sol.lambda0, micro_->gamma().vertices,
                                       trace, load, deflate, tol_);
    sol.W1_tilde = r.u;
    sol.A_tilde = r.flux.sum() / B;
    sol.W1 = sol.W1_tilde + sol.A_tilde * sol.eta.u;
    sol.w1_flux_total = r.flux.sum() + sol.A_tilde * sol.eta.flux.sum();
  }

  // --- V2: Neumann data dW1/dn on Gamma ---
  {
    const Vec w1_flux =
        (forms0.K_full - sol.lambda0 * forms0.M_full) * sol.W1 -
        sol.lambda1 * (forms0.M_full * sol.phi);
    Vec load_parent = Vec::Zero(cell_mesh_->n_vertices());
    for (Index v : micro_->gamma().vertices)
      load_parent[q0.parent_vertex[v]] = -w1_flux[v];
    double d = 0.0;
    sol.V2 = cell_->solve_q1_neumann(load_parent, 1e-6, &d);
  }

  // --- P_k: volume load 2 dV1/dy_k, Neumann data dZ1/dn - n_k V1 ---
  {
    double dmax = 0.0;
    for (int k = 0; k < 2; ++k) {
      // dZ1/dn = -y_k dphi/dn on Gamma since phi vanishes there; the clean
      // eigenfunction flux rows carry dphi/dn (interior rows are zero)
      Vec load_parent = Vec::Zero(cell_mesh_->n_vertices());
      for (Index v : micro_->gamma().vertices) {
        const double yk = k == 0 ? q0.mesh.vx[v] : q0.mesh.vy[v];
        load_parent[q0.parent_vertex[v]] = -(-yk * phi_flux[v]);
      }
      // volume part and the -n_k V1 boundary term live on the Q1 submesh
      Vec load_q1 = gradient_load(q1.mesh, sol.V1_tilde, k, 2.0);
      const Vec nk_v1 = gamma_normal_load(q1.mesh,
                                          gamma_boundary(q1.mesh), k, sol.V1_tilde);
      load_q1 += nk_v1;
      for (Index v = 0; v < q1.mesh.n_vertices(); ++v)
        load_parent[q1.parent_vertex[v]] += load_q1[v];
      double d = 0.0;
      // the continuum problem is exactly solvable; the interpolated Z1 leaves
      // an O(h^2) defect which the zero-mean solve projects out
      Vec lp = load_parent;
      {
        // project the defect out before the solve to keep it well posed
        double total = 0.0;
        for (Index v = 0; v < q1.mesh.n_vertices(); ++v) total += lp[q1.parent_vertex[v]];
        dmax = std::max(dmax, std::fabs(total));
        Index nq1 = q1.mesh.n_vertices();
        for (Index v = 0; v < nq1; ++v) lp[q1.parent_vertex[v]] -= total / nq1;
      }
      sol.Pk[k] = cell_->solve_q1_neumann(lp, 1e-6, &d);
    }
    sol.pk_defect = dmax;
  }

  // --- W2, Z2: harmonic lifts matching the second-order traces ---
  {
    const auto rw = helmholtz_dirichlet(q0.mesh, forms0, 0.0, micro_->gamma().vertices,
                                        cell_->q1_to_q0(sol.V2), Vec(), {}, tol_);
    sol.W2 = rw.u;
    for (int k = 0; k < 2; ++k) {
      const auto rz = helmholtz_dirichlet(q0.mesh, forms0, 0.0, micro_->gamma().vertices,
                                          cell_->q1_to_q0(sol.Pk[k]), Vec(), {}, tol_);
      sol.Z2[k] = rz.u;
    }
  }
  return sol;
}

CaseB::ResidualReport CaseB::residual_orders(const CaseBSolution& sol, const CellGeometry& geom,
                                             const std::vector<double>& eps_list) const {
  ResidualReport rep;
  const auto& q0 = micro_->q0_submesh();
  const auto& q1 = cell_->q1_submesh();

  // inverse maps: template cell vertex -> submesh vertex
  std::vector<Index> inv_q0(cell_mesh_->n_vertices(), -1), inv_q1(cell_mesh_->n_vertices(), -1);
  for (Index v = 0; v < q0.mesh.n_vertices(); ++v) inv_q0[q0.parent_vertex[v]] = v;
  for (Index v = 0; v < q1.mesh.n_vertices(); ++v) inv_q1[q1.parent_vertex[v]] = v;

  for (double eps : eps_list) {
    // assembly only (no factorization): a larger vertex budget is safe here
    const Mesh dom = build_domain_mesh(geom, eps, eps * cell_mesh_->h_target, 800000);
    const double Lam = sol.lambda0 + eps * sol.lambda1;
    const auto forms = assemble(dom, {eps, 1.0}, {1.0 / eps, 1.0});

    // interface vertices and lumped weights
    std::vector<bool> on_gamma(dom.n_vertices(), false), on_outer(dom.n_vertices(), false);
    Vec gamma_len = Vec::Zero(dom.n_vertices());
    for (const auto& te : dom.edges) {
      if (te.tag == EdgeTag::Gamma) {
        on_gamma[te.a] = on_gamma[te.b] = true;
        const double L =
            std::hypot(dom.vx[te.a] - dom.vx[te.b], dom.vy[te.a] - dom.vy[te.b]);
        gamma_len[te.a] += 0.5 * L;
        gamma_len[te.b] += 0.5 * L;
      }
      if (te.tag == EdgeTag::Outer) on_outer[te.a] = on_outer[te.b] = true;
    }
    Vec lump = Vec::Zero(dom.n_vertices());
    std::vector<bool> touches_q0(dom.n_vertices(), false), touches_q1(dom.n_vertices(), false);
    for (Index e = 0; e < dom.n_elements(); ++e) {
      for (Index v : dom.elems[e]) {
        lump[v] += dom.elem_area(e) / 3.0;
        (dom.elem_region[e] == Region::Q0 ? touches_q0 : touches_q1)[v] = true;
      }
    }

    // composite field W*(x) from the template fields and the smooth envelope
    Vec W = Vec::Zero(dom.n_vertices());
    for (Index v = 0; v < dom.n_vertices(); ++v) {
      const double x = dom.vx[v], y = dom.vy[v];
      const double cx = std::sin(M_PI * x) * std::sin(M_PI * y);
      const double c1 = M_PI * std::cos(M_PI * x) * std::sin(M_PI * y);
      const double c2 = M_PI * std::sin(M_PI * x) * std::cos(M_PI * y);
      const Index tv = dom.cell_vertex[v];
      if (inv_q0[tv] >= 0) { // inclusion phase (Gamma traces agree with the matrix side)
        const Index s = inv_q0[tv];
        W[v] = cx * sol.phi[s] + eps * (cx * sol.W1[s] + c1 * sol.Z1[0][s] + c2 * sol.Z1[1][s]) +
               eps * eps * (cx * sol.W2[s] + c1 * sol.Z2[0][s] + c2 * sol.Z2[1][s]);
      } else {
        const Index s = inv_q1[tv];
        W[v] = eps * cx * (sol.V1_tilde[s] + sol.A_tilde) +
               eps * eps * (cx * sol.V2[s] + c1 * sol.Pk[0][s] + c2 * sol.Pk[1][s]);
      }
    }

    const Vec r = forms.K_full * W - Lam * (forms.M_full * W);
    double nq1 = 0.0, nq0 = 0.0, niface = 0.0;
    for (Index v = 0; v < dom.n_vertices(); ++v) {
      if (on_outer[v]) continue;
      if (on_gamma[v]) {
        niface = std::max(niface, std::fabs(r[v]) / gamma_len[v]);
      } else if (touches_q0[v]) {
        nq0 = std::max(nq0, std::fabs(r[v]) / lump[v]);
      } else if (touches_q1[v]) {
        nq1 = std::max(nq1, std::fabs(r[v]) / lump[v]);
      }
    }
    rep.eps.push_back(eps);
    rep.interior_q1.push_back(nq1);
    rep.interior_q0.push_back(nq0);
    rep.interface.push_back(niface);
  }

  auto slope = [&](const std::vector<double>& y) {
    // least squares on log-log
    const int n = (int)y.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      const double X = std::log(rep.eps[i]), Y = std::log(y[i]);
      sx += X; sy += Y; sxx += X * X; sxy += X * Y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  rep.slope_q1 = slope(rep.interior_q1);
  rep.slope_q0 = slope(rep.interior_q0);
  rep.slope_interface = slope(rep.interface);
  return rep;
}

} // namespace dhc
