#pragma once

#include <functional>
#include <vector>

#include "dhc/fem.hpp"
#include "dhc/geometry.hpp"

namespace dhc {

// Dirichlet spectrum of the inclusion with eigenfunction means; clusters are
// groups of eigenvalues within the relative gap, flagged zero-mean when the
// projection of the constant function onto the cluster span is negligible.
struct DirichletSpectrum {
  std::vector<double> values;   // ascending
  Eigen::MatrixXd vectors;      // full Q0-submesh fields, L2(Q0)-orthonormal
  std::vector<double> means;    // <phi_j>
  std::vector<std::pair<int, int>> cluster_ranges;
  std::vector<bool> cluster_zero_mean;
  std::vector<double> cluster_mean_sq; // sum of squared means per cluster
  double area_q0 = 0.0;
  double tail_pole = 0.0; // (J+1)-th eigenvalue, bounds series truncation

  int cluster_of(int j) const;
  double sum_mean_sq() const;
};

struct BetaValue {
  double beta = 0.0; // midpoint estimate for the series backend
  double B = 0.0;    // beta - |Q1| lambda = lambda <eta>
  double lo = 0.0, hi = 0.0; // series tail interval for beta (lo = hi otherwise)
};

struct EtaField {
  Vec u;               // full Q0-submesh field, 1 on Gamma
  Vec flux;            // consistent flux rows int phi_i deta/dn on Gamma vertices
  double lambda0 = 0.0;
  double mean = 0.0;   // <eta>
  double B = 0.0;      // lambda0 <eta>
  double flux_sum = 0.0; // sum of flux rows = -B
  bool deflated = false;
};

enum class CaseKind { A, Bi, Bii };

struct CaseTag {
  CaseKind kind = CaseKind::A;
  bool b_zero = false;     // case (b-ii) sub-flag B(lambda0) = 0
  double dist_rel = 0.0;   // relative distance to the nearest Dirichlet cluster
  double b_value = 0.0;
  std::vector<double> raw_means; // means of the touched cluster, for audit
};

struct LimitEntry {
  double value = 0.0;
  int multiplicity = 1;
  bool from_root = false;      // root of B between poles
  bool from_zero_mean = false; // zero-mean Dirichlet eigenvalue
  double bracket_lo = 0.0, bracket_hi = 0.0; // bisection certificate for roots
};

struct LimitSpectrum {
  std::vector<LimitEntry> entries; // ascending, deduplicated
  std::vector<double> poles;       // nonzero-mean Dirichlet values in range
  std::vector<double> flattened() const; // values repeated by multiplicity
};

// Inclusion-side solver bundle built on the Q0 submesh of one cell mesh.
class Micro {
 public:
  Micro(const Mesh& cell_mesh, int mode_count, const Tolerances& tol = {});

  const DirichletSpectrum& spectrum() const { return spec_; }
  const Mesh& q0_mesh() const { return q0_.mesh; }
  const SubMesh& q0_submesh() const { return q0_; }
  const GammaBoundary& gamma() const { return gamma_; }
  const AssembledForms& forms() const { return forms_; }
  const Tolerances& tol() const { return tol_; }
  double area_q1() const { return 1.0 - spec_.area_q0; }

  // -Lap eta = lambda0 eta in Q0, eta = 1 on Gamma. Deflates zero-mean
  // clusters at lambda0; throws on nonzero-mean poles.
  EtaField solve_eta(double lambda0) const;

  BetaValue beta_series(double lambda) const;
  BetaValue beta_direct(double lambda) const;

  // nonzero-mean cluster values below lambda_max (poles of beta)
  std::vector<double> poles(double lambda_max) const;

  // Roots of B merged with zero-mean Dirichlet eigenvalues up to lambda_max.
  LimitSpectrum limit_spectrum(double lambda_max) const;
  // Same root finder against an arbitrary evaluator (analytic backends).
  LimitSpectrum limit_spectrum(double lambda_max, const std::function<double(double)>& B,
                               const std::vector<double>& poles) const;

  // Eigenvalues of the Dirichlet form on {h in H1(Q0): h|Gamma = const}.
  Spectrum zeta_operator_spectrum(int count) const;

  CaseTag classify_case(double lambda0) const;

 private:
  SubMesh q0_;
  GammaBoundary gamma_;
  AssembledForms forms_; // unconstrained on the Q0 submesh
  DirichletSpectrum spec_;
  Tolerances tol_;
};

// Closed-form beta for ball inclusions (n = 2 via J0/J1, n = 3 via cotangent).
struct AnalyticBallBeta {
  int dimension = 2;
  double radius = 0.25;
  BetaValue eval(double lambda) const;
  std::vector<double> poles(double lambda_max) const;
  std::function<double(double)> B_function() const;
};

} // namespace dhc
