#pragma once

#include <optional>

#include "dhc/cell.hpp"

namespace dhc {

// Homogenized Dirichlet eigenproblem -div(A grad v) = nu v on the unit square.
struct MacroSpectrum {
  std::vector<double> nu;  // ascending, strictly positive
  Eigen::MatrixXd vectors; // full-mesh fields, L2(Omega)-orthonormal
  std::vector<std::pair<int, int>> clusters;
};

MacroSpectrum macro_spectrum(const Eigen::Matrix2d& A, const Mesh& omega_mesh, int count,
                             const Tolerances& tol = {});

inline double lambda1_case_a(double nu, const CellTensors& t) { return t.lambda1_of_nu(nu); }

// One spectral branch of the two-term prediction.
struct Branch {
  double lambda0 = 0.0;
  CaseKind kind = CaseKind::A;
  bool b_zero = false;
  std::optional<CellTensors> tensors; // case (a)
  std::optional<double> lambda1_fixed; // case (b)
};

struct Prediction {
  double lambda0 = 0.0;
  CaseKind kind = CaseKind::A;
  int nu_index = -1; // -1 when the branch does not couple to nu
  double nu = 0.0;
  int nu_multiplicity = 1;
  double lambda1 = 0.0;
  double eps = 0.0;
  double Lambda = 0.0; // lambda0 + eps lambda1
};

// Cartesian assembly of predictions over branches, macro eigenvalues and eps.
// Case (a) couples to every nu; case (b) ignores nu (lambda1 fixed); case
// (b-i) without a supplied lambda1 is rejected (no first-order construction).
std::vector<Prediction> make_predictions(const std::vector<Branch>& branches,
                                         const MacroSpectrum& macro,
                                         const std::vector<double>& eps_list,
                                         const Tolerances& tol = {});

// Open intervals where beta(lambda) < |Q1| lambda: (pole, next root of B).
struct GapInterval {
  double lo = 0.0, hi = 0.0;
  bool certified = false; // B < 0 verified just inside both endpoints
  double B_lo = 0.0, B_hi = 0.0;
};

std::vector<GapInterval> gap_intervals(const LimitSpectrum& ls,
                                       const std::function<double(double)>& B,
                                       double lambda_max);

} // namespace dhc
