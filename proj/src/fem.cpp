#include "dhc/fem.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>

namespace dhc {

namespace {

using Triplet = Eigen::Triplet<double>;

void element_geometry(const Mesh& mesh, Index e, double b[3], double c[3], double& area) {
  const auto& t = mesh.elems[e];
  const double x0 = mesh.vx[t[0]], y0 = mesh.vy[t[0]];
  const double x1 = mesh.vx[t[1]], y1 = mesh.vy[t[1]];
  const double x2 = mesh.vx[t[2]], y2 = mesh.vy[t[2]];
  area = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
  // grad of hat_i = (b_i, c_i) / (2 area)
  b[0] = y1 - y2; c[0] = x2 - x1;
  b[1] = y2 - y0; c[1] = x0 - x2;
  b[2] = y0 - y1; c[2] = x1 - x0;
}

std::vector<Index> union_find_classes(Index n, const std::vector<std::pair<Index, Index>>& pairs) {
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<Index(Index)> find = [&](Index v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (auto [a, b] : pairs) {
    const Index ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  for (Index v = 0; v < n; ++v) parent[v] = find(v);
  return parent;
}

// Deterministic start block for the subspace iteration.
double lcg_unit(std::uint64_t& state) {
  state = state * 6364136223846793005ULL + 1442695040888963407ULL;
  return (double)(state >> 11) / (double)(1ULL << 53) * 2.0 - 1.0;
}

} // namespace

AssembledForms assemble(const Mesh& mesh, RegionCoeff diffusion, RegionCoeff density) {
  if (diffusion.q0 <= 0.0 || diffusion.q1 <= 0.0 || density.q0 <= 0.0 || density.q1 <= 0.0)
    throw std::invalid_argument("coefficients must be strictly positive");
  const Index n = mesh.n_vertices();
  std::vector<Triplet> kt, mt;
  kt.reserve(9 * mesh.n_elements());
  mt.reserve(9 * mesh.n_elements());
  double b[3], c[3], area;
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    element_geometry(mesh, e, b, c, area);
    const auto& t = mesh.elems[e];
    const double ka = diffusion(mesh.elem_region[e]) / (4.0 * area);
    const double ma = density(mesh.elem_region[e]) * area / 12.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        kt.emplace_back(t[i], t[j], ka * (b[i] * b[j] + c[i] * c[j]));
        mt.emplace_back(t[i], t[j], ma * (i == j ? 2.0 : 1.0));
      }
    }
  }
  AssembledForms f;
  f.K_full.resize(n, n);
  f.M_full.resize(n, n);
  f.K_full.setFromTriplets(kt.begin(), kt.end());
  f.M_full.setFromTriplets(mt.begin(), mt.end());
  f.dof_map.resize(n);
  std::iota(f.dof_map.begin(), f.dof_map.end(), 0);
  f.n_free = n;
  f.P.resize(n, n);
  f.P.setIdentity();
  f.K = f.K_full;
  f.M = f.M_full;
  return f;
}

AssembledForms assemble_matrix_diffusion(const Mesh& mesh, const Eigen::Matrix2d& A,
                                         RegionCoeff density) {
  if (density.q0 <= 0.0 || density.q1 <= 0.0)
    throw std::invalid_argument("coefficients must be strictly positive");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("diffusion matrix must be SPD");
  const Index n = mesh.n_vertices();
  std::vector<Triplet> kt, mt;
  kt.reserve(9 * mesh.n_elements());
  mt.reserve(9 * mesh.n_elements());
  double b[3], c[3], area;
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    element_geometry(mesh, e, b, c, area);
    const auto& t = mesh.elems[e];
    const double ma = density(mesh.elem_region[e]) * area / 12.0;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector2d gi(b[i], c[i]);
      for (int j = 0; j < 3; ++j) {
        const Eigen::Vector2d gj(b[j], c[j]);
        kt.emplace_back(t[i], t[j], gi.dot(A * gj) / (4.0 * area));
        mt.emplace_back(t[i], t[j], ma * (i == j ? 2.0 : 1.0));
      }
    }
  }
  AssembledForms f;
  f.K_full.resize(n, n);
  f.M_full.resize(n, n);
  f.K_full.setFromTriplets(kt.begin(), kt.end());
  f.M_full.setFromTriplets(mt.begin(), mt.end());
  f.dof_map.resize(n);
  std::iota(f.dof_map.begin(), f.dof_map.end(), 0);
  f.n_free = n;
  f.P.resize(n, n);
  f.P.setIdentity();
  f.K = f.K_full;
  f.M = f.M_full;
  return f;
}

AssembledForms apply_constraints(const AssembledForms& forms, ConstraintKind kind,
                                 const Mesh& mesh) {
  const Index n = mesh.n_vertices();
  std::vector<Index> map(n, 0);

  auto tagged_vertices = [&](EdgeTag tag) {
    std::vector<bool> on(n, false);
    bool seen = false;
    for (const auto& te : mesh.edges)
      if (te.tag == tag) {
        on[te.a] = on[te.b] = true;
        seen = true;
      }
    if (!seen) throw std::invalid_argument("required boundary tag not present in mesh");
    return on;
  };

  AssembledForms out;
  out.K_full = forms.K_full;
  out.M_full = forms.M_full;
  out.kind = kind;

  switch (kind) {
    case ConstraintKind::None: return forms;
    case ConstraintKind::DirichletGamma:
    case ConstraintKind::DirichletOuter: {
      const auto on = tagged_vertices(kind == ConstraintKind::DirichletGamma ? EdgeTag::Gamma
                                                                             : EdgeTag::Outer);
      Index next = 0;
      for (Index v = 0; v < n; ++v) map[v] = on[v] ? -1 : next++;
      if (next == 0) throw std::invalid_argument("constraint eliminates every dof");
      out.n_free = next;
      break;
    }
    case ConstraintKind::ConstantOnGamma: {
      const auto on = tagged_vertices(EdgeTag::Gamma);
      Index next = 1; // dof 0 is the merged Gamma unknown
      for (Index v = 0; v < n; ++v) map[v] = on[v] ? 0 : next++;
      out.n_free = next;
      break;
    }
    case ConstraintKind::PeriodicCell: {
      bool tagged = false;
      for (const auto& te : mesh.edges) tagged |= te.tag == EdgeTag::PeriodicPair;
      if (!tagged) throw std::invalid_argument("required boundary tag not present in mesh");
      std::vector<std::pair<Index, Index>> pairs;
      for (int axis = 0; axis < 2; ++axis) {
        const auto part = periodic_partner(mesh, axis);
        for (Index v = 0; v < n; ++v)
          if (part[v] > v) pairs.emplace_back(v, part[v]);
      }
      if (pairs.empty()) throw std::invalid_argument("required boundary tag not present in mesh");
      const auto cls = union_find_classes(n, pairs);
      std::vector<Index> rep(n, -1);
      Index next = 0;
      for (Index v = 0; v < n; ++v) {
        if (rep[cls[v]] < 0) rep[cls[v]] = next++;
        map[v] = rep[cls[v]];
      }
      out.n_free = next;
      break;
    }
  }

  out.dof_map = map;
  std::vector<Triplet> pt;
  for (Index v = 0; v < n; ++v)
    if (map[v] >= 0) pt.emplace_back(v, map[v], 1.0);
  out.P.resize(n, out.n_free);
  out.P.setFromTriplets(pt.begin(), pt.end());
  out.K = out.P.transpose() * forms.K_full * out.P;
  out.M = out.P.transpose() * forms.M_full * out.P;
  out.K.makeCompressed();
  out.M.makeCompressed();
  return out;
}

Vec solve_linear(const AssembledForms& forms, const Vec& rhs_reduced, LinearSolveInfo* info,
                 const Tolerances& tol, std::optional<double> defect_tol) {
  LinearSolveInfo local;
  const double rhs_norm = rhs_reduced.norm();

  const bool maybe_singular =
      forms.kind == ConstraintKind::PeriodicCell || forms.kind == ConstraintKind::None;
  bool singular = false;
  if (maybe_singular) {
    // constant kernel iff K * 1 = 0
    const Vec k1 = forms.K * Vec::Ones(forms.n_free);
    singular =
        k1.lpNorm<Eigen::Infinity>() < 1e-8 * forms.K.coeffs().cwiseAbs().maxCoeff();
  }

  Vec u;
  if (!singular) {
    Eigen::SparseLU<SpMat> lu;
    lu.compute(forms.K);
    if (lu.info() != Eigen::Success) throw SolveError("linear solve: factorization failed");
    u = lu.solve(rhs_reduced);
  } else {
    local.compatibility_defect = rhs_reduced.sum();
    const double dtol = defect_tol.value_or(tol.solvability);
    if (std::fabs(local.compatibility_defect) > dtol) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "singular Neumann system with incompatible rhs: defect %.6e exceeds %.1e",
                    local.compatibility_defect, dtol);
      if (info) *info = local;
      throw SolveError(buf);
    }
    // project out the kernel component, then a bordered solve pinning the
    // mass-weighted mean at zero
    const Vec m = forms.M * Vec::Ones(forms.n_free);
    const double mass = m.sum();
    Vec b = rhs_reduced;
    b -= (b.sum() / forms.n_free) * Vec::Ones(forms.n_free);
    const Index nf = forms.n_free;
    std::vector<Triplet> at;
    at.reserve(forms.K.nonZeros() + 2 * nf);
    for (int k = 0; k < forms.K.outerSize(); ++k)
      for (SpMat::InnerIterator it(forms.K, k); it; ++it)
        at.emplace_back((Index)it.row(), (Index)it.col(), it.value());
    for (Index i = 0; i < nf; ++i) {
      at.emplace_back(i, nf, m[i]);
      at.emplace_back(nf, i, m[i]);
    }
    SpMat A(nf + 1, nf + 1);
    A.setFromTriplets(at.begin(), at.end());
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw SolveError("linear solve: factorization failed");
    Vec bb(nf + 1);
    bb.head(nf) = b;
    bb[nf] = 0.0;
    const Vec ub = lu.solve(bb);
    u = ub.head(nf);
    u -= (m.dot(u) / mass) * Vec::Ones(nf);
    local.zero_mean_applied = true;
  }

  Vec res = forms.K * u - rhs_reduced;
  if (singular) res -= Vec::Constant(forms.n_free, res.sum() / forms.n_free);
  local.residual = rhs_norm > 0 ? res.norm() / rhs_norm : res.norm();
  if (info) *info = local;
  if (local.residual > 10 * tol.linear)
    throw SolveError("linear solve: residual " + std::to_string(local.residual) +
                     " above tolerance");
  return u;
}

std::vector<std::pair<int, int>> Spectrum::clusters(double rel_gap) const {
  std::vector<std::pair<int, int>> out;
  int start = 0;
  for (int i = 1; i <= (int)values.size(); ++i) {
    const bool split =
        i == (int)values.size() ||
        std::fabs(values[i] - values[i - 1]) >
            rel_gap * std::max({1.0, std::fabs(values[i]), std::fabs(values[i - 1])});
    if (split) {
      out.emplace_back(start, i);
      start = i;
    }
  }
  return out;
}

namespace {

Spectrum dense_eigen(const AssembledForms& forms, int count, double shift) {
  const Eigen::MatrixXd K = Eigen::MatrixXd(forms.K);
  const Eigen::MatrixXd M = Eigen::MatrixXd(forms.M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
  if (es.info() != Eigen::Success) throw SolveError("dense eigensolver failed");
  Spectrum s;
  s.backend = "dense";
  for (int i = 0; i < es.eigenvalues().size() && (int)s.values.size() < count; ++i) {
    const double lam = es.eigenvalues()[i];
    if (lam > shift) {
      s.values.push_back(lam);
      s.vectors.conservativeResize(forms.n_free, (int)s.values.size());
      s.vectors.col((int)s.values.size() - 1) = es.eigenvectors().col(i);
    }
  }
  if ((int)s.values.size() < count)
    throw SolveError("eigen solve: fewer eigenvalues above shift than requested");
  for (int i = 0; i < count; ++i) {
    const Vec x = s.vectors.col(i);
    s.residuals.push_back((forms.K * x - s.values[i] * (forms.M * x)).norm() /
                          ((forms.M * x).norm() * std::max(1.0, std::fabs(s.values[i]))));
  }
  return s;
}

Spectrum shift_invert_eigen(const AssembledForms& forms, int count, double shift,
                            const Tolerances& tol) {
  const Index n = forms.n_free;
  const double scale = forms.K.diagonal().sum() / std::max(1e-300, forms.M.diagonal().sum());
  double sigma = shift > -1e299 ? shift : -1e-3 * std::max(1.0, scale);

  const int extra = std::max(8, count / 2);
  int p = std::min<Index>(n, count + extra);

  double last_residual = 1.0;
  for (int attempt = 0; attempt < 3; ++attempt) {
    SpMat A = forms.K - sigma * forms.M;
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
      sigma -= 1e-8 * std::max(1.0, std::fabs(sigma)) + 1e-8 * scale;
      continue;
    }

    Eigen::MatrixXd X(n, p);
    std::uint64_t st = 0x2545F4914F6CDD1DULL;
    for (Index i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) X(i, j) = lcg_unit(st);

    Eigen::VectorXd theta;
    Eigen::MatrixXd V;
    bool converged = false;
    for (int iter = 0; iter < 400 && !converged; ++iter) {
      Eigen::MatrixXd Y(n, p);
      for (int j = 0; j < p; ++j) Y.col(j) = lu.solve(forms.M * X.col(j));
      Eigen::MatrixXd G = Y.transpose() * (forms.M * Y);
      Eigen::LLT<Eigen::MatrixXd> llt(G);
      if (llt.info() != Eigen::Success) {
        for (int j = 0; j < p; ++j)
          for (Index i = 0; i < n; ++i) Y(i, j) += 1e-12 * lcg_unit(st);
        G = Y.transpose() * (forms.M * Y);
        llt.compute(G);
        if (llt.info() != Eigen::Success) throw SolveError("subspace iteration lost rank");
      }
      Y = llt.matrixU().solve<Eigen::OnTheRight>(Y); // Y <- Y L^{-T}, then Y^T M Y = I
      const Eigen::MatrixXd H = Y.transpose() * (forms.K * Y);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (H + H.transpose()));
      theta = small.eigenvalues();
      V = Y * small.eigenvectors();
      X = V;

      int ok = 0, found = 0;
      last_residual = 0.0;
      for (int j = 0; j < p && found < count; ++j) {
        if (theta[j] <= shift) continue;
        ++found;
        const Vec x = V.col(j);
        const double r = (forms.K * x - theta[j] * (forms.M * x)).norm() /
                         ((forms.M * x).norm() * std::max(1.0, std::fabs(theta[j])));
        last_residual = std::max(last_residual, r);
        if (r <= tol.eigen_residual) ++ok;
      }
      converged = found == count && ok == count;
    }
    if (!converged) {
      p = std::min<Index>(n, p + count + 8);
      continue;
    }

    Spectrum s;
    s.backend = "shift-invert";
    for (int j = 0; j < p && (int)s.values.size() < count; ++j) {
      if (theta[j] <= shift) continue;
      const Vec x = V.col(j);
      s.values.push_back(theta[j]);
      s.residuals.push_back((forms.K * x - theta[j] * (forms.M * x)).norm() /
                            ((forms.M * x).norm() * std::max(1.0, std::fabs(theta[j]))));
      s.vectors.conservativeResize(n, (int)s.values.size());
      s.vectors.col((int)s.values.size() - 1) = x;
    }
    return s;
  }
  char buf[120];
  std::snprintf(buf, sizeof buf,
                "eigen solve: subspace iteration not converged, achieved residual %.3e",
                last_residual);
  throw SolveError(buf);
}

} // namespace

Spectrum solve_eigen(const AssembledForms& forms, int count, double shift, const Tolerances& tol,
                     int dense_limit) {
  if (count < 1) throw std::invalid_argument("solve_eigen: count must be >= 1");
  if (count > forms.n_free) throw std::invalid_argument("solve_eigen: count above free dof count");
  Spectrum s = forms.n_free <= dense_limit ? dense_eigen(forms, count, shift)
                                           : shift_invert_eigen(forms, count, shift, tol);
  for (int i = 0; i < count; ++i) {
    if (s.residuals[i] > tol.eigen_residual * 50.0) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "eigen solve: pair %d residual %.3e above tolerance", i,
                    s.residuals[i]);
      throw SolveError(buf);
    }
  }
  return s;
}

Spectrum eigen_near(const AssembledForms& forms, double sigma, int count, const Tolerances& tol,
                    int dense_limit) {
  if (count < 1) throw std::invalid_argument("eigen_near: count must be >= 1");
  const Index n = forms.n_free;
  auto select_nearest = [&](const std::vector<double>& vals, const Eigen::MatrixXd& vecs) {
    std::vector<int> idx(vals.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return std::fabs(vals[a] - sigma) < std::fabs(vals[b] - sigma);
    });
    Spectrum s;
    for (int i = 0; i < count && i < (int)idx.size(); ++i) {
      const Vec x = vecs.col(idx[i]);
      s.values.push_back(vals[idx[i]]);
      s.residuals.push_back((forms.K * x - vals[idx[i]] * (forms.M * x)).norm() /
                            ((forms.M * x).norm() * std::max(1.0, std::fabs(vals[idx[i]]))));
      s.vectors.conservativeResize(n, (int)s.values.size());
      s.vectors.col((int)s.values.size() - 1) = x;
    }
    return s;
  };

  if (n <= dense_limit) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(forms.K),
                                                                 Eigen::MatrixXd(forms.M));
    if (es.info() != Eigen::Success) throw SolveError("dense eigensolver failed");
    std::vector<double> vals(es.eigenvalues().data(), es.eigenvalues().data() + n);
    Spectrum s = select_nearest(vals, es.eigenvectors());
    s.backend = "dense";
    return s;
  }

  double sig = sigma;
  int p = std::min<Index>(n, count + 10);
  for (int attempt = 0; attempt < 3; ++attempt) {
    SpMat A = forms.K - sig * forms.M;
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
      sig += 1e-7 * std::max(1.0, std::fabs(sig));
      continue;
    }
    Eigen::MatrixXd X(n, p);
    std::uint64_t st = 0x9E3779B97F4A7C15ULL;
    for (Index i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) X(i, j) = lcg_unit(st);
    Eigen::VectorXd theta;
    Eigen::MatrixXd V;
    for (int iter = 0; iter < 300; ++iter) {
      Eigen::MatrixXd Y(n, p);
      for (int j = 0; j < p; ++j) Y.col(j) = lu.solve(forms.M * X.col(j));
      Eigen::MatrixXd G = Y.transpose() * (forms.M * Y);
      Eigen::LLT<Eigen::MatrixXd> llt(G);
      if (llt.info() != Eigen::Success) {
        for (int j = 0; j < p; ++j)
          for (Index i = 0; i < n; ++i) Y(i, j) += 1e-12 * lcg_unit(st);
        llt.compute(Y.transpose() * (forms.M * Y));
        if (llt.info() != Eigen::Success) throw SolveError("subspace iteration lost rank");
      }
      Y = llt.matrixU().solve<Eigen::OnTheRight>(Y);
      const Eigen::MatrixXd H = Y.transpose() * (forms.K * Y);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (H + H.transpose()));
      theta = small.eigenvalues();
      V = Y * small.eigenvectors();
      X = V;

      std::vector<int> idx(p);
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::fabs(theta[a] - sig) < std::fabs(theta[b] - sig);
      });
      int ok = 0;
      for (int i = 0; i < count; ++i) {
        const Vec x = V.col(idx[i]);
        const double r = (forms.K * x - theta[idx[i]] * (forms.M * x)).norm() /
                         ((forms.M * x).norm() * std::max(1.0, std::fabs(theta[idx[i]])));
        if (r <= tol.eigen_residual) ++ok;
      }
      if (ok == count) {
        std::vector<double> vals(theta.data(), theta.data() + p);
        Spectrum s = select_nearest(vals, V);
        s.backend = "shift-invert";
        return s;
      }
    }
    p = std::min<Index>(n, p + count + 8);
  }
  throw SolveError("eigen_near: subspace iteration did not converge");
}

Index count_eigenvalues_below(const AssembledForms& forms, double sigma) {
  SpMat A = forms.K - sigma * forms.M;
  A.makeCompressed();
  Eigen::SimplicialLDLT<SpMat> ldlt;
  for (int attempt = 0; attempt < 4; ++attempt) {
    ldlt.compute(A);
    if (ldlt.info() == Eigen::Success) {
      const Vec d = ldlt.vectorD();
      Index below = 0;
      bool healthy = true;
      for (Index i = 0; i < d.size(); ++i) {
        if (d[i] < 0.0) ++below;
        if (d[i] == 0.0 || !std::isfinite(d[i])) healthy = false;
      }
      if (healthy) return below;
    }
    sigma *= 1.0 + 1e-9;
    sigma += 1e-12;
    A = forms.K - sigma * forms.M;
  }
  throw SolveError("inertia count failed near sigma");
}

void element_gradient(const Mesh& mesh, const Vec& u, Index e, double grad[2]) {
  double b[3], c[3], area;
  element_geometry(mesh, e, b, c, area);
  const auto& t = mesh.elems[e];
  grad[0] = (u[t[0]] * b[0] + u[t[1]] * b[1] + u[t[2]] * b[2]) / (2.0 * area);
  grad[1] = (u[t[0]] * c[0] + u[t[1]] * c[1] + u[t[2]] * c[2]) / (2.0 * area);
}

double integrate(const Mesh& mesh, const Vec& u, Region region) {
  double s = 0.0;
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    if (mesh.elem_region[e] != region) continue;
    const auto& t = mesh.elems[e];
    s += mesh.elem_area(e) / 3.0 * (u[t[0]] + u[t[1]] + u[t[2]]);
  }
  return s;
}

double integrate_gradient(const Mesh& mesh, const Vec& u, Region region, int j) {
  double s = 0.0, g[2];
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    if (mesh.elem_region[e] != region) continue;
    element_gradient(mesh, u, e, g);
    s += mesh.elem_area(e) * g[j];
  }
  return s;
}

double energy(const Mesh& mesh, const Vec& u, Region region) {
  double s = 0.0, g[2];
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    if (mesh.elem_region[e] != region) continue;
    element_gradient(mesh, u, e, g);
    s += mesh.elem_area(e) * (g[0] * g[0] + g[1] * g[1]);
  }
  return s;
}

double l2_norm(const Mesh& mesh, const Vec& u, Region region) {
  double s = 0.0;
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    if (mesh.elem_region[e] != region) continue;
    const auto& t = mesh.elems[e];
    const double a = mesh.elem_area(e) / 12.0;
    const double u0 = u[t[0]], u1 = u[t[1]], u2 = u[t[2]];
    s += a * (u0 * u0 + u1 * u1 + u2 * u2 + (u0 + u1 + u2) * (u0 + u1 + u2));
  }
  return std::sqrt(s);
}

GammaBoundary gamma_boundary(const Mesh& mesh) {
  GammaBoundary gb;
  std::vector<bool> seen(mesh.n_vertices(), false);
  for (const auto& te : mesh.edges) {
    if (te.tag != EdgeTag::Gamma) continue;
    const double dx = mesh.vx[te.b] - mesh.vx[te.a];
    const double dy = mesh.vy[te.b] - mesh.vy[te.a];
    const double len = std::hypot(dx, dy);
    gb.edges.push_back({te.a, te.b});
    gb.normal.push_back({dy / len, -dx / len});
    gb.length.push_back(len);
    gb.total_length += len;
    for (Index v : {te.a, te.b})
      if (!seen[v]) {
        seen[v] = true;
        gb.vertices.push_back(v);
      }
  }
  if (gb.edges.empty()) throw std::invalid_argument("mesh carries no Gamma edges");
  return gb;
}

Vec gamma_normal_load(const Mesh& mesh, const GammaBoundary& gb, int j, const Vec& g) {
  Vec b = Vec::Zero(mesh.n_vertices());
  for (std::size_t e = 0; e < gb.edges.size(); ++e) {
    const Index a = gb.edges[e][0], bb = gb.edges[e][1];
    const double n = gb.normal[e][j], L = gb.length[e];
    // int_e g n_j phi_i ds, exact for P1 g
    b[a] += n * L * (2.0 * g[a] + g[bb]) / 6.0;
    b[bb] += n * L * (g[a] + 2.0 * g[bb]) / 6.0;
  }
  return b;
}

double gamma_integral(const Mesh& mesh, const GammaBoundary& gb, const Vec& u, const Vec& v) {
  (void)mesh;
  double s = 0.0;
  for (std::size_t e = 0; e < gb.edges.size(); ++e) {
    const Index a = gb.edges[e][0], b = gb.edges[e][1];
    // exact for products of P1 traces
    s += gb.length[e] / 6.0 *
         (2.0 * u[a] * v[a] + 2.0 * u[b] * v[b] + u[a] * v[b] + u[b] * v[a]);
  }
  return s;
}

HelmholtzResult helmholtz_dirichlet(const Mesh& mesh, const AssembledForms& forms, double lam,
                                    const std::vector<Index>& boundary, const Vec& g,
                                    const Vec& extra_load, const std::vector<Vec>& deflate,
                                    const Tolerances& tol) {
  (void)tol;
  const Index n = mesh.n_vertices();
  std::vector<Index> map(n);
  std::vector<bool> on(n, false);
  for (Index v : boundary) on[v] = true;
  Index nf = 0;
  for (Index v = 0; v < n; ++v) map[v] = on[v] ? -1 : nf++;

  SpMat A = forms.K_full - lam * forms.M_full;
  Vec rhs = extra_load.size() ? extra_load : Vec(Vec::Zero(n));
  Vec gext = Vec::Zero(n);
  for (Index v : boundary) gext[v] = g[v];
  rhs -= A * gext;

  const Index nd = (Index)deflate.size();
  std::vector<Triplet> at;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      const Index r = map[(Index)it.row()], c = map[(Index)it.col()];
      if (r >= 0 && c >= 0) at.emplace_back(r, c, it.value());
    }
  std::vector<Vec> mphi;
  for (Index d = 0; d < nd; ++d) {
    mphi.push_back(forms.M_full * deflate[d]);
    for (Index v = 0; v < n; ++v) {
      if (map[v] < 0) continue;
      at.emplace_back(map[v], nf + d, mphi[d][v]);
      at.emplace_back(nf + d, map[v], mphi[d][v]);
    }
  }
  SpMat Ab(nf + nd, nf + nd);
  Ab.setFromTriplets(at.begin(), at.end());
  Eigen::SparseLU<SpMat> lu;
  lu.compute(Ab);
  if (lu.info() != Eigen::Success)
    throw SolveError("helmholtz solve: factorization failed (lambda near a pole?)");

  Vec bb = Vec::Zero(nf + nd);
  for (Index v = 0; v < n; ++v)
    if (map[v] >= 0) bb[map[v]] = rhs[v];
  const Vec sol = lu.solve(bb);

  HelmholtzResult res;
  res.u = gext;
  for (Index v = 0; v < n; ++v)
    if (map[v] >= 0) res.u[v] = sol[map[v]] + gext[v];
  // remove deflated components (the solution lives on the complement)
  for (Index d = 0; d < nd; ++d) {
    const double c = mphi[d].dot(res.u) / mphi[d].dot(deflate[d]);
    res.u -= c * deflate[d];
  }

  Vec full_res = A * res.u - (extra_load.size() ? extra_load : Vec(Vec::Zero(n)));
  for (Index d = 0; d < nd; ++d) full_res -= sol[nf + d] * mphi[d];
  double rnorm = 0.0;
  const double scale = std::max(1.0, res.u.norm());
  for (Index v = 0; v < n; ++v)
    if (map[v] >= 0) rnorm += full_res[v] * full_res[v];
  res.residual = std::sqrt(rnorm) / scale;
  if (res.residual > 1e-6)
    throw SolveError("helmholtz solve: residual " + std::to_string(res.residual));

  res.flux = Vec::Zero(n);
  for (Index v : boundary) res.flux[v] = full_res[v];
  return res;
}

void write_matrix(std::ostream& os, const SpMat& m) {
  char buf[96];
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", (long)it.row(), (long)it.col(),
                    it.value());
      os << buf;
    }
}

} // namespace dhc
