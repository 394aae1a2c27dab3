#pragma once

#include "dhc/macro.hpp"

namespace dhc {

// Forms of the original eps-dependent problem: stiffness 1 / eps and density
// 1 / eps^{-1} across the phases, Dirichlet on the outer boundary.
AssembledForms assemble_fine(const Mesh& domain_mesh, double eps);

// All eigenvalues in [lo, hi]; completeness checked against LDLT inertia
// counts at the window ends.
Spectrum fine_spectrum(const AssembledForms& forms, double lo, double hi,
                       const Tolerances& tol = {}, int max_count = 80);

// One spectral branch of the sweep: Lambda(eps) = lambda0 + eps lambda1.
struct BranchSpec {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  std::string name;
  bool two_scale = false; // compare the matched eigenvector to its limit shape
  // other predicted Lambda values at the same lambda0 (guard radius)
  std::vector<double> sibling_lambda1;
};

struct GapSpec {
  double lo = 0.0, hi = 0.0;
  double margin = 0.15; // relative shrink applied to both ends
};

struct BranchPoint {
  double eps = 0.0;
  double Lambda = 0.0;
  double lam_coarse = 0.0, lam_fine = 0.0; // matched eigenvalue at h and h/2
  double error = 0.0;                      // |lam_fine - Lambda|
  bool matched = false;
  bool control_ok = false; // |lam(h) - lam(h/2)| <= 0.2 |lam(h/2) - Lambda|
  bool ambiguous = false;
  bool beyond_cap = false; // error above the 0.5 C_guess eps^{5/4} advisory cap
  double second_distance = 0.0;
  double two_scale_distance = -1.0;
};

struct RateSummary {
  double slope = 0.0;
  bool monotone = false;
  int n_used = 0; // control-passing matched points
};
RateSummary summarize_rate(const std::vector<BranchPoint>& points);

struct SweepOutput {
  std::vector<std::vector<BranchPoint>> branches; // [branch][eps]
  std::vector<std::vector<Index>> gap_counts;     // [gap][eps] eigenvalues inside
  std::vector<double> eps_list;
};

// Limit-shape data for the two-scale comparison of a case-(a) branch:
// u(x, y) = v0(x) in the matrix phase, v0(x) eta(y) in the inclusions.
struct TwoScaleSpec {
  const MacroSpectrum* macro = nullptr;
  int nu_index = 0;
  int macro_n = 0;       // square-mesh resolution of the macro field
  double lambda0 = 0.0;  // eta solved per template at this value
};

// Fine-scale sweep: for each eps builds the tiled meshes at cell parameters
// h_cell and h_cell / 2, matches each branch prediction to the nearest fine
// eigenvalue (guard radius from siblings and the eps^{5/4} cap), audits the
// gap intervals by inertia counts, and runs the two-scale comparison.
SweepOutput run_fine_sweep(const CellGeometry& geom, const std::vector<double>& eps_list,
                           double h_cell, const std::vector<BranchSpec>& branches,
                           const std::vector<GapSpec>& gaps = {},
                           const TwoScaleSpec* two_scale = nullptr, Index dof_cap = 300000,
                           const Tolerances& tol = {});

// Aligned relative L2(Omega) distance between a fine eigenvector and the
// composite limit shape; exposed for direct testing.
double two_scale_distance(const Mesh& domain_mesh, const Vec& u_full,
                          const MacroSpectrum& macro, int nu_index, int macro_n,
                          const SubMesh& q0_template, const Vec& eta_template);

// P1 evaluation on build_square_mesh(n) fields at an arbitrary point.
double eval_square_field(const Vec& field, int n, double x, double y);

} // namespace dhc
