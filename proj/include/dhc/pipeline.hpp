#pragma once

#include <memory>

#include "dhc/caseb.hpp"
#include "dhc/finescale.hpp"

namespace dhc {

// Inclusion-side study on an h, h/2 mesh pair with entrywise extrapolation.
struct MicroStudy {
  Mesh mesh_h, mesh_f;
  std::unique_ptr<Micro> micro_h, micro_f;
  LimitSpectrum limit_h, limit_f;
  std::vector<double> limit_extrap; // flattened, entrywise Richardson
  std::vector<double> zeta_extrap;
  double mu2_h = 0.0, mu2_f = 0.0, mu2 = 0.0; // second root of B (first nonzero)

  MicroStudy(const CellGeometry& geom, double h, int modes, double lambda_max,
             int zeta_count, const Tolerances& tol = {});
};

// Cell-corrector study at lambda0 = 0 or at the k-th nonzero root of B,
// polished per mesh so the calN solvability holds at each resolution.
struct CellStudy {
  double lambda0_h = 0.0, lambda0_f = 0.0, lambda0 = 0.0;
  CellTensors t_h, t_f;
  Eigen::Matrix2d A_extrap = Eigen::Matrix2d::Zero();
  double C_extrap = 0.0, P_int_extrap = 0.0, nu_const_extrap = 0.0;

  // lambda1 from the extrapolated affine map at a given macro eigenvalue
  double lambda1_for(double nu) const { return (nu - nu_const_extrap) / C_extrap; }

  CellStudy(const CellGeometry& geom, double h, int nonzero_root_index, int modes,
            const Tolerances& tol = {});
};

// Homogenized spectrum on n and 2n square meshes with extrapolated values.
struct MacroStudy {
  MacroSpectrum coarse, fine;
  std::vector<double> nu_extrap;
  int n = 0;
  MacroStudy(const Eigen::Matrix2d& A, int n, int count, const Tolerances& tol = {});
};

} // namespace dhc
