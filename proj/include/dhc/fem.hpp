#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <vector>

#include "dhc/geometry.hpp"

namespace dhc {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Central numerical tolerances; one record shared by solvers and property tests.
struct Tolerances {
  double linear = 1e-10;       // relative residual of linear solves
  double eigen_residual = 1e-8; // ||K v - l M v|| <= eigen_residual * ||M v|| * max(1, l)
  double cluster_gap = 1e-5;   // relative gap joining eigenvalue clusters
  double mean_zero = 1e-6;     // |<phi>| <= mean_zero * ||phi||_L2 flags a zero-mean mode
  double pole = 1e-4;          // relative pole-distance floor for Helmholtz solves
  double solvability = 1e-6;   // absolute Neumann compatibility defect
};

struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ConstraintKind { None, DirichletGamma, DirichletOuter, ConstantOnGamma, PeriodicCell };

struct RegionCoeff {
  double q0 = 1.0, q1 = 1.0;
  double operator()(Region r) const { return r == Region::Q0 ? q0 : q1; }
  static RegionCoeff uniform(double c) { return {c, c}; }
};

struct AssembledForms {
  SpMat K_full, M_full;       // symmetric vertex-indexed forms
  ConstraintKind kind = ConstraintKind::None;
  std::vector<Index> dof_map; // vertex -> free dof, -1 eliminated
  Index n_free = 0;
  SpMat P;                    // n_vertices x n_free prolongation
  SpMat K, M;                 // reduced forms P^T (.) P

  Vec reduce(const Vec& full) const { return P.transpose() * full; }
  Vec prolong(const Vec& red) const { return P * red; }
};

AssembledForms assemble(const Mesh& mesh, RegionCoeff diffusion, RegionCoeff density);
// stiffness int (A grad u).grad v with a constant SPD matrix coefficient
AssembledForms assemble_matrix_diffusion(const Mesh& mesh, const Eigen::Matrix2d& A,
                                         RegionCoeff density);
AssembledForms apply_constraints(const AssembledForms& forms, ConstraintKind kind,
                                 const Mesh& mesh);

struct LinearSolveInfo {
  double residual = 0.0;            // relative
  double compatibility_defect = 0.0; // 1^T rhs for singular Neumann systems
  bool zero_mean_applied = false;
};

// Reduced-space solve. Singular pure-Neumann systems (constant kernel) are
// detected, the compatibility defect is checked against defect_tol, and the
// solution is returned with zero mass-weighted mean.
Vec solve_linear(const AssembledForms& forms, const Vec& rhs_reduced,
                 LinearSolveInfo* info = nullptr, const Tolerances& tol = {},
                 std::optional<double> defect_tol = std::nullopt);

struct Spectrum {
  std::vector<double> values;  // ascending
  Eigen::MatrixXd vectors;     // reduced space, M-orthonormal columns
  std::string backend;
  std::vector<double> residuals;

  // [first, last) index ranges of eigenvalue clusters at relative gap.
  std::vector<std::pair<int, int>> clusters(double rel_gap) const;
};

// Lowest `count` eigenvalues strictly above `shift` of K v = l M v.
// Dense backend for n_free <= dense_limit, otherwise shift-invert subspace
// iteration on a sparse factorization; both deterministic.
Spectrum solve_eigen(const AssembledForms& forms, int count, double shift = -1e300,
                     const Tolerances& tol = {}, int dense_limit = 4000);

// `count` eigenpairs nearest to sigma, ordered by |value - sigma|.
Spectrum eigen_near(const AssembledForms& forms, double sigma, int count,
                    const Tolerances& tol = {}, int dense_limit = 4000);

// Number of eigenvalues of the pencil strictly below sigma (LDLT inertia).
Index count_eigenvalues_below(const AssembledForms& forms, double sigma);

// --- P1 field helpers ---

// Elementwise constant gradient of a vertex field.
void element_gradient(const Mesh& mesh, const Vec& u, Index e, double grad[2]);
// integral of u over a region (exact P1 quadrature)
double integrate(const Mesh& mesh, const Vec& u, Region region);
// integral of du/dy_j over a region
double integrate_gradient(const Mesh& mesh, const Vec& u, Region region, int j);
// Dirichlet energy over a region
double energy(const Mesh& mesh, const Vec& u, Region region);
double l2_norm(const Mesh& mesh, const Vec& u, Region region);

// Gamma boundary machinery (polygonal interface, CCW with Q0 on the left).
struct GammaBoundary {
  std::vector<Index> vertices;           // unique Gamma vertices
  std::vector<std::array<Index, 2>> edges;
  std::vector<std::array<double, 2>> normal; // outward from Q0, unit, per edge
  std::vector<double> length;
  double total_length = 0.0;
};
GammaBoundary gamma_boundary(const Mesh& mesh);

// loads b_i = int_Gamma g n_j phi_i ds for P1 hat functions, g per-vertex
Vec gamma_normal_load(const Mesh& mesh, const GammaBoundary& gb, int j, const Vec& g);
// int_Gamma u v ds with nodal fields (trapezoid on edges, exact for P1)
double gamma_integral(const Mesh& mesh, const GammaBoundary& gb, const Vec& u, const Vec& v);

// Helmholtz solve with Dirichlet data on a vertex set:
// (K - lam M) u = M f + extra_load on free rows, u = g on `boundary`.
// Optional deflation basis (vanishing on `boundary`) makes resonant systems
// solvable on the complement; flux returns the variationally consistent
// boundary functional rows (K u - lam M u - rhs) on `boundary`.
struct HelmholtzResult {
  Vec u;          // full vertex field
  Vec flux;       // full-length, nonzero only on boundary rows
  double residual = 0.0;
};
HelmholtzResult helmholtz_dirichlet(const Mesh& mesh, const AssembledForms& forms, double lam,
                                    const std::vector<Index>& boundary, const Vec& g,
                                    const Vec& extra_load = Vec(),
                                    const std::vector<Vec>& deflate = {},
                                    const Tolerances& tol = {});

// coordinate text dump "i j value", 0-based, lower triangle included as stored
void write_matrix(std::ostream& os, const SpMat& m);

// Richardson extrapolation for second-order quantities.
inline double richardson2(double coarse, double fine) { return (4.0 * fine - coarse) / 3.0; }
// observed convergence order from three resolutions h, h/2, h/4
inline double observed_order(double xh, double xh2, double xh4) {
  return std::log2(std::fabs((xh - xh2) / (xh2 - xh4)));
}

} // namespace dhc
