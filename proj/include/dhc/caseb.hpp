#pragma once

#include "dhc/cell.hpp"

namespace dhc {

// First-order construction at a simple zero-mean Dirichlet eigenvalue:
// matrix-side corrector V1, the explicit Z1 fields, W1 with its constant
// part, and lambda1 = -int_Q1 |grad V1|^2 <= 0.
struct CaseBSolution {
  int mode_index = -1;
  double lambda0 = 0.0; // discrete eigenvalue of phi on this mesh
  Vec phi;              // Q0 submesh, L2-normalized, zero mean
  EtaField eta;

  Vec V1_tilde;         // Q1 submesh, zero mean over Q1
  double A_tilde = 0.0; // V1 = V1_tilde + A_tilde
  Vec W1_tilde, W1;     // Q0 submesh; W1 = W1_tilde + A_tilde eta
  Vec Z1[2];            // -y_k phi, nodal
  Vec V2, Pk[2];        // Q1 submesh second-order fields
  Vec W2, Z2[2];        // Q0 submesh lifts (harmonic, matching traces)

  double lambda1 = 0.0;          // energy route
  double lambda1_boundary = 0.0; // consistent boundary-flux route
  double lambda1_raw_trace = 0.0; // raw element-gradient trace route
  double v1_defect = 0.0;         // lambda0 <phi>, compatibility of the V1 solve
  double w1_flux_total = 0.0;     // int_Gamma dW1/dn after the A_tilde correction
  double z1_residual = 0.0;       // scaled PDE residual of the explicit Z1 fields
  double pk_defect = 0.0;         // compatibility defect of the P_k solves
};

class CaseB {
 public:
  // micro and cell must be built on the same cell mesh
  CaseB(const Mesh& cell_mesh, const Micro& micro, const Cell& cell,
        const Tolerances& tol = {});

  // Solve for the zero-mean mode with spectrum index `mode`. Multiplicity-1
  // clusters only; symmetric pairs are accepted only with
  // allow_symmetric_pair (symmetry-sector reduction, cross-solvability
  // residuals checked).
  CaseBSolution solve(int mode, bool allow_symmetric_pair = false) const;

  // matrix corrector for an arbitrary zero-mean Dirichlet field
  Vec solve_V1(const Vec& phi, double lambda0, double* defect = nullptr) const;

  // Residual orders of the composite two-scale field over an eps list:
  // W*(x) built from the discrete cell fields with the smooth envelope
  // c(x) = sin(pi x1) sin(pi x2).
  struct ResidualReport {
    std::vector<double> eps;
    std::vector<double> interior_q1; // scaled sup-norms
    std::vector<double> interior_q0;
    std::vector<double> interface;
    double slope_q1 = 0.0;
    double slope_q0 = 0.0;
    double slope_interface = 0.0;
  };
  ResidualReport residual_orders(const CaseBSolution& sol, const CellGeometry& geom,
                                 const std::vector<double>& eps_list) const;

 private:
  const Micro* micro_;
  const Cell* cell_;
  const Mesh* cell_mesh_;
  Tolerances tol_;
};

} // namespace dhc
