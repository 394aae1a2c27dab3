#pragma once

#include "dhc/micro.hpp"

namespace dhc {

struct CellTensors {
  Eigen::Matrix2d A_hom = Eigen::Matrix2d::Zero();
  double C = 0.0;       // int_Q0 eta^2
  double C_flux = 0.0;  // -int_Gamma dR/dn, independent route to C
  double P_int = 0.0;   // int_Q0 P
  Eigen::Vector2d K = Eigen::Vector2d::Zero(); // drift coefficients, zero in the limit
  double lambda0 = 0.0;
  double nu_const = 0.0; // lambda0 (|Q1| + P_int)

  // diagnostics
  double ahom_asym = 0.0;
  double green_a9 = 0.0;  // |int_G calN dN/dn - int_G N dcalN/dn|
  double green_a10 = 0.0; // |int_G M deta/dn - int_G N dcalN/dn|
  double solvability_defect = 0.0; // discrete B(lambda0) seen by the calN solve
  double eta_mean = 0.0;

  double nu(double lambda1) const { return C * lambda1 + nu_const; }
  double lambda1_of_nu(double nu_value) const { return (nu_value - nu_const) / C; }
};

// Cell correctors for one cell mesh; the Q0 side comes from a Micro built on
// the same mesh (kept alive by the caller).
class Cell {
 public:
  Cell(const Mesh& cell_mesh, const Micro& micro, const Tolerances& tol = {});

  const Mesh& q1_mesh() const { return q1_.mesh; }
  const SubMesh& q1_submesh() const { return q1_; }
  const Vec& N(int j) const { return N_[j]; } // Q1-submesh field
  double area_q1() const { return area_q1_; }

  Eigen::Matrix2d homogenized_matrix(double* asym = nullptr) const;

  // periodic Neumann solve on Q1 with a Gamma-supported load (parent indexing);
  // returns the zero-mean solution, reports the compatibility defect
  Vec solve_q1_neumann(const Vec& load_parent, double defect_tol, double* defect = nullptr) const;

  // calN: harmonic in Q1 with the conormal data of eta on Gamma; the
  // compatibility defect of the Neumann system equals the discrete B(lambda0)
  // up to sign. Throws when |B| exceeds the solvability tolerance.
  Vec solve_calN(const EtaField& eta, double* B_defect = nullptr) const;

  struct MPRFields {
    Vec M[2], P, R;          // Q0-submesh fields
    Vec flux_M[2], flux_R;   // consistent Gamma flux rows
  };
  MPRFields solve_MPR(double lambda0, const EtaField& eta, const Vec& calN) const;

  // Full case-(a) tensor assembly; lambda0 must be a root of the discrete B
  // to solvability tolerance (use a root from Micro::limit_spectrum on the
  // same mesh).
  CellTensors tensors(double lambda0) const;

  // transfer a Q1-submesh field to Q0-submesh vertices through the parent
  // mesh (nonzero only on shared Gamma vertices), and back
  Vec q1_to_q0(const Vec& u) const;
  Vec q0_to_q1(const Vec& u) const;

 private:
  const Micro* micro_;
  SubMesh q1_;
  GammaBoundary gb1_;
  AssembledForms forms_q1_;      // unconstrained
  AssembledForms periodic_;      // PeriodicCell-reduced
  Tolerances tol_;
  double area_q1_ = 0.0;
  Vec N_[2];
  Index parent_n_ = 0;
};

} // namespace dhc
