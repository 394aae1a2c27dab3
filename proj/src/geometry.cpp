#include "dhc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace dhc {

namespace {

constexpr double kMinAngleDeg = 15.0;

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Radius of the inclusion contour in direction t (center-relative).
double contour_radius(const CellGeometry& g, double t) {
  return g.ax * g.ay / std::hypot(g.ay * std::cos(t), g.ax * std::sin(t));
}

// Arc-length table of the contour over directions [t0, t0 + pi/4].
struct ArcTable {
  double t0;
  std::vector<double> cum; // cumulative length at t0 + i*dt
  double dt;
  double total() const { return cum.back(); }
  // direction whose arc distance from t0 equals s
  double invert(double s) const {
    auto it = std::lower_bound(cum.begin(), cum.end(), s);
    if (it == cum.begin()) return t0;
    if (it == cum.end()) return t0 + dt * (cum.size() - 1);
    const std::size_t i = it - cum.begin();
    const double f = (s - cum[i - 1]) / (cum[i] - cum[i - 1]);
    return t0 + dt * ((i - 1) + f);
  }
};

ArcTable make_arc_table(const CellGeometry& g, double t0) {
  constexpr int N = 2048;
  ArcTable tab;
  tab.t0 = t0;
  tab.dt = (M_PI / 4.0) / N;
  tab.cum.resize(N + 1);
  tab.cum[0] = 0.0;
  auto point = [&](double t) {
    const double r = contour_radius(g, t);
    return std::array<double, 2>{r * std::cos(t), r * std::sin(t)};
  };
  auto prev = point(t0);
  for (int i = 1; i <= N; ++i) {
    const auto cur = point(t0 + tab.dt * i);
    tab.cum[i] = tab.cum[i - 1] + std::hypot(cur[0] - prev[0], cur[1] - prev[1]);
    prev = cur;
  }
  return tab;
}

// Directions of an n-point ring, arc-length equidistributed per quadrant
// sector, corners of the square (directions -pi/4 + s*pi/2) always present.
// Offsets are antisymmetric within each sector by construction, so mirrored
// rays and the derived outer-face offsets match bit-exactly.
struct RingAngles {
  std::vector<double> dirs;        // size n, ascending from -pi/4
  std::array<int, 4> corner = {};  // indices of the four corner rays
  std::array<int, 4> csize = {};   // segments per sector
};

std::array<int, 4> sector_counts(const CellGeometry& g, int n) {
  const int q = n / 2;
  static thread_local std::map<std::pair<double, double>, std::array<double, 2>> cache;
  const auto key = std::make_pair(g.ax, g.ay);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const double L0 = make_arc_table(g, -M_PI / 4.0).total();
    const double L1 = make_arc_table(g, M_PI / 4.0).total();
    it = cache.emplace(key, std::array<double, 2>{L0, L1}).first;
  }
  const double L0 = it->second[0], L1 = it->second[1];
  const double f = L0 / (L0 + L1);
  int c0;
  if (std::fabs(f - 0.5) < 1e-12) {
    c0 = (q + 1) / 2; // disk: equal sectors whenever q is even
  } else if (q % 8 == 0 && q >= 24) {
    // counts divisible by 8 keep the full halving chain mirror-symmetric,
    // so no asymmetric stitching row is ever needed
    c0 = 8 * (int)std::lround(q * f / 8.0);
    c0 = std::clamp(c0, 8, q - 8);
  } else if (q % 4 == 0 && q >= 16) {
    c0 = 4 * (int)std::lround(q * f / 4.0);
    c0 = std::clamp(c0, 4, q - 4);
  } else if (q % 2 == 0) {
    c0 = 2 * (int)std::lround(q * f / 2.0);
  } else {
    c0 = (int)std::lround(q * f);
  }
  c0 = std::clamp(c0, 2, q - 2);
  return {c0, q - c0, c0, q - c0};
}

std::vector<double> sector_offsets(const CellGeometry& g, double mid, int c) {
  // c+1 nodes spanning [-pi/4, pi/4] around `mid`, equidistributed by arc
  // length, antisymmetric: off[c - j] = -off[j].
  const ArcTable tab = make_arc_table(g, mid);
  const double Lh = tab.total();
  std::vector<double> off(c + 1);
  off[0] = -M_PI / 4.0;
  off[c] = M_PI / 4.0;
  for (int j = 1; j <= c / 2; ++j) {
    const double s = Lh * (2.0 * j / c - 1.0); // signed arc coordinate at node j
    off[j] = (s < 0.0) ? -(tab.invert(-s) - mid) : (tab.invert(s) - mid);
    off[c - j] = -off[j];
  }
  if (c % 2 == 0) off[c / 2] = 0.0;
  return off;
}

RingAngles make_ring_angles(const CellGeometry& g, int n) {
  RingAngles ra;
  ra.csize = sector_counts(g, n);
  ra.dirs.reserve(n);
  for (int s = 0; s < 4; ++s) {
    ra.corner[s] = (int)ra.dirs.size();
    const double mid = s * (M_PI / 2.0);
    // sectors 2,3 reuse the antisymmetric tables of sectors 0,1
    const auto off = sector_offsets(g, (s % 2) * (M_PI / 2.0), ra.csize[s]);
    for (int j = 0; j < ra.csize[s]; ++j) ra.dirs.push_back(mid - M_PI / 4.0 + (off[j] + M_PI / 4.0));
  }
  return ra;
}

RingAngles subsample(const RingAngles& ra) {
  RingAngles out;
  for (int s = 0; s < 4; ++s) {
    out.csize[s] = ra.csize[s] / 2;
    out.corner[s] = ra.corner[s] / 2;
  }
  for (std::size_t k = 0; k < ra.dirs.size(); k += 2) out.dirs.push_back(ra.dirs[k]);
  return out;
}

bool halvable(const RingAngles& ra) {
  for (int s = 0; s < 4; ++s)
    if (ra.csize[s] % 2 != 0 || ra.csize[s] < 4) return false;
  return true;
}

// Offset tables for the outer square boundary; entries antisymmetric, end
// values exactly +-1/2 so corners and opposite faces match bit-exactly.
std::vector<double> face_offsets(const std::vector<double>& off) {
  const int c = (int)off.size() - 1;
  std::vector<double> t(c + 1);
  t[0] = -0.5;
  t[c] = 0.5;
  for (int j = 1; j <= c / 2; ++j) {
    t[j] = 0.5 * std::tan(off[j]);
    t[c - j] = -t[j];
  }
  if (c % 2 == 0) t[c / 2] = 0.0;
  return t;
}

struct Builder {
  Mesh mesh;
  Index add_vertex(double x, double y) {
    mesh.vx.push_back(x);
    mesh.vy.push_back(y);
    return (Index)mesh.vx.size() - 1;
  }
  void add_tri(Index a, Index b, Index c, Region r) {
    const double s = cross2(mesh.vx[b] - mesh.vx[a], mesh.vy[b] - mesh.vy[a],
                            mesh.vx[c] - mesh.vx[a], mesh.vy[c] - mesh.vy[a]);
    if (s < 0.0) std::swap(b, c);
    mesh.elems.push_back({a, b, c});
    mesh.elem_region.push_back(r);
  }
};

double corner_min_angle(const Mesh& m, Index a, Index b, Index c) {
  double best = M_PI;
  const Index v[3] = {a, b, c};
  for (int i = 0; i < 3; ++i) {
    const Index p = v[i], q = v[(i + 1) % 3], r = v[(i + 2) % 3];
    const double ux = m.vx[q] - m.vx[p], uy = m.vy[q] - m.vy[p];
    const double wx = m.vx[r] - m.vx[p], wy = m.vy[r] - m.vy[p];
    const double cosang = (ux * wx + uy * wy) / (std::hypot(ux, uy) * std::hypot(wx, wy));
    best = std::min(best, std::acos(std::clamp(cosang, -1.0, 1.0)));
  }
  return best;
}

// Quad row between two aligned rings of equal count. Diagonal maximizing the
// minimum angle; exact ties fall back to angular parity. Both rules commute
// with the ring symmetries, so mirrored meshes stay mirrored.
void emit_quad_row(Builder& bld, const std::vector<Index>& inner,
                   const std::vector<Index>& outer, Region reg) {
  const int n = (int)inner.size();
  for (int k = 0; k < n; ++k) {
    const int k1 = (k + 1) % n;
    const double qa = std::min(corner_min_angle(bld.mesh, inner[k], inner[k1], outer[k1]),
                               corner_min_angle(bld.mesh, inner[k], outer[k1], outer[k]));
    const double qb = std::min(corner_min_angle(bld.mesh, inner[k], inner[k1], outer[k]),
                               corner_min_angle(bld.mesh, inner[k1], outer[k1], outer[k]));
    const bool diag_a = std::fabs(qa - qb) > 1e-9 ? qa > qb : k % 2 == 0;
    if (diag_a) {
      bld.add_tri(inner[k], inner[k1], outer[k1], reg);
      bld.add_tri(inner[k], outer[k1], outer[k], reg);
    } else {
      bld.add_tri(inner[k], inner[k1], outer[k], reg);
      bld.add_tri(inner[k1], outer[k1], outer[k], reg);
    }
  }
}

// Centroid split (4 triangles per quad). No diagonal choice, so the
// triangulation inherits every symmetry of the ring point set exactly; used
// inside the inclusion where quads are near-isosceles trapezoids.
void emit_centroid_row(Builder& bld, const std::vector<Index>& inner,
                       const std::vector<Index>& outer, Region reg) {
  const int n = (int)inner.size();
  for (int k = 0; k < n; ++k) {
    const int k1 = (k + 1) % n;
    const Index q[4] = {inner[k], inner[k1], outer[k1], outer[k]};
    const double cx = 0.25 * (bld.mesh.vx[q[0]] + bld.mesh.vx[q[1]] + bld.mesh.vx[q[2]] +
                              bld.mesh.vx[q[3]]);
    const double cy = 0.25 * (bld.mesh.vy[q[0]] + bld.mesh.vy[q[1]] + bld.mesh.vy[q[2]] +
                              bld.mesh.vy[q[3]]);
    const Index c = bld.add_vertex(cx, cy);
    for (int i = 0; i < 4; ++i) bld.add_tri(q[i], q[(i + 1) % 4], c, reg);
  }
}

// 2:1 transition; fine ring outside, coarse ring inside, coarse[j] on the same
// ray as fine[2j]. Mirror-symmetric template.
void emit_template_row(Builder& bld, const std::vector<Index>& coarse,
                       const std::vector<Index>& fine, Region reg) {
  const int c = (int)coarse.size();
  for (int j = 0; j < c; ++j) {
    const Index a = fine[2 * j], b = fine[(2 * j + 1) % (2 * c)], d = fine[(2 * j + 2) % (2 * c)];
    const Index A = coarse[j], B = coarse[(j + 1) % c];
    bld.add_tri(a, b, A, reg);
    bld.add_tri(b, B, A, reg);
    bld.add_tri(b, d, B, reg);
  }
}

// General transition between rings with unrelated counts (angle merge walk).
void emit_zipper_row(Builder& bld, const std::vector<Index>& inner,
                     const std::vector<double>& inner_dirs,
                     const std::vector<Index>& outer,
                     const std::vector<double>& outer_dirs, Region reg) {
  const int p = (int)outer.size(), q = (int)inner.size();
  int i = 0, j = 0;
  while (i < p || j < q) {
    const double next_out = (i < p) ? (i + 1 < p ? outer_dirs[i + 1] : outer_dirs[0] + 2.0 * M_PI)
                                    : std::numeric_limits<double>::infinity();
    const double next_in = (j < q) ? (j + 1 < q ? inner_dirs[j + 1] : inner_dirs[0] + 2.0 * M_PI)
                                   : std::numeric_limits<double>::infinity();
    if (next_out <= next_in) {
      bld.add_tri(outer[i % p], outer[(i + 1) % p], inner[j % q], reg);
      ++i;
    } else {
      bld.add_tri(outer[i % p], inner[(j + 1) % q], inner[j % q], reg);
      ++j;
    }
  }
}

int default_m_gamma(const CellGeometry& g, double h) {
  // rays must resolve both the inclusion contour and the outer square
  const double per = 2.0 * M_PI * std::max(g.ax, g.ay);
  int m = (int)std::ceil(std::max(2.0 * per, 0.7 * 4.0) / h);
  m = std::max(16, m);
  return (m + 7) / 8 * 8;
}

Mesh build_cell_mesh_once(const CellGeometry& geom, double h, int m) {
  Builder bld;
  bld.mesh.h_target = h;
  const double cx = 0.5, cy = 0.5;
  const double abar = 0.5 * (geom.ax + geom.ay);

  const RingAngles gamma = make_ring_angles(geom, m);

  // Gamma ring vertices.
  std::vector<Index> gamma_ring(m);
  for (int k = 0; k < m; ++k) {
    const double t = gamma.dirs[k];
    const double r = contour_radius(geom, t);
    gamma_ring[k] = bld.add_vertex(cx + r * std::cos(t), cy + r * std::sin(t));
  }

  // --- Annulus between Gamma and the square boundary ---
  // Outer boundary points from shared antisymmetric face-offset tables.
  const auto off0 = sector_offsets(geom, 0.0, gamma.csize[0]);
  const auto off1 = sector_offsets(geom, M_PI / 2.0, gamma.csize[1]);
  const auto t0 = face_offsets(off0);
  const auto t1 = face_offsets(off1);
  std::vector<std::array<double, 2>> outer_pt(m);
  for (int s = 0; s < 4; ++s) {
    for (int j = 0; j < gamma.csize[s]; ++j) {
      const int k = gamma.corner[s] + j;
      switch (s) {
        case 0: outer_pt[k] = {1.0, 0.5 + t0[j]}; break;
        case 1: outer_pt[k] = {0.5 - t1[j], 1.0}; break;
        case 2: outer_pt[k] = {0.0, 0.5 - t0[j]}; break;
        default: outer_pt[k] = {0.5 + t1[j], 0.0}; break;
      }
    }
  }
  double maxlen = 0.0;
  for (int k = 0; k < m; ++k)
    maxlen = std::max(maxlen, std::hypot(outer_pt[k][0] - bld.mesh.vx[gamma_ring[k]],
                                         outer_pt[k][1] - bld.mesh.vy[gamma_ring[k]]));

  const double perim = 4.0 * (make_arc_table(geom, -M_PI / 4.0).total() +
                              make_arc_table(geom, M_PI / 4.0).total());

  // graded radial profile shared across rays: start near the tangential
  // spacing at Gamma, grow geometrically, cap at h
  std::vector<double> fr{0.0};
  {
    double step = std::clamp(0.8 * perim / m, 0.1 * h, h);
    double acc = 0.0;
    while (acc + 1.5 * step < maxlen) {
      acc += step;
      fr.push_back(acc);
      step = std::min(h, 1.3 * step);
    }
    if (fr.size() < 2) fr.push_back(0.5 * maxlen);
    fr.push_back(maxlen);
  }
  const int n_a = (int)fr.size() - 1;

  std::vector<Index> prev = gamma_ring;
  for (int i = 1; i <= n_a; ++i) {
    std::vector<Index> ring(m);
    for (int k = 0; k < m; ++k) {
      if (i == n_a) {
        ring[k] = bld.add_vertex(outer_pt[k][0], outer_pt[k][1]);
      } else {
        const double f = fr[i] / maxlen;
        const double px = bld.mesh.vx[gamma_ring[k]], py = bld.mesh.vy[gamma_ring[k]];
        ring[k] = bld.add_vertex(px + f * (outer_pt[k][0] - px), py + f * (outer_pt[k][1] - py));
      }
    }
    emit_quad_row(bld, prev, ring, Region::Q1);
    prev = ring;
  }
  const std::vector<Index> outer_ring = prev;

  // --- Inclusion interior: rings inward, coarsening, center fan ---
  RingAngles cur_angles = gamma;
  std::vector<Index> cur_ring = gamma_ring;
  double rho = 1.0;
  while (rho * abar > 1.45 * h) {
    // radial step coupled to the mean tangential spacing of the current ring
    const double tangential = perim * rho / (double)cur_ring.size();
    const double drho = std::clamp(1.6 * tangential, 0.15 * h, h) / abar;
    const double rho_next = rho - drho;
    const int n_cur = (int)cur_ring.size();
    const int n_desired = std::max(8, (int)std::ceil(perim * rho_next / (0.85 * h)));
    RingAngles next_angles = cur_angles;
    if (n_desired <= n_cur / 2 && n_cur / 2 >= 8) {
      if (halvable(cur_angles)) {
        next_angles = subsample(cur_angles);
      } else if (n_cur > 24) {
        // ratio-limited coarsening keeps the transition triangles fat
        int nz = std::max({8, n_desired, (n_cur + 1) / 2});
        nz += nz % 2;
        next_angles = make_ring_angles(geom, nz);
      } // counts <= 24 stay put until the fan closes the disk
    }
    std::vector<Index> ring(next_angles.dirs.size());
    for (std::size_t k = 0; k < next_angles.dirs.size(); ++k) {
      const double t = next_angles.dirs[k];
      const double r = rho_next * contour_radius(geom, t);
      ring[k] = bld.add_vertex(cx + r * std::cos(t), cy + r * std::sin(t));
    }
    if (ring.size() == cur_ring.size()) {
      emit_centroid_row(bld, ring, cur_ring, Region::Q0);
    } else if (2 * ring.size() == cur_ring.size()) {
      emit_template_row(bld, ring, cur_ring, Region::Q0);
    } else {
      emit_zipper_row(bld, ring, next_angles.dirs, cur_ring, cur_angles.dirs, Region::Q0);
    }
    cur_ring = ring;
    cur_angles = next_angles;
    rho = rho_next;
  }
  const Index center = bld.add_vertex(cx, cy);
  const int nl = (int)cur_ring.size();
  for (int k = 0; k < nl; ++k) bld.add_tri(center, cur_ring[k], cur_ring[(k + 1) % nl], Region::Q0);

  // --- Tagged edges ---
  for (int k = 0; k < m; ++k)
    bld.mesh.edges.push_back({gamma_ring[k], gamma_ring[(k + 1) % m], EdgeTag::Gamma, 0});
  // Periodic pairs: right<->left edges share ids 0..c0-1, top<->bottom the rest.
  const int c0 = gamma.csize[0], c1 = gamma.csize[1];
  auto face_edge = [&](int s, int j) { // j-th boundary edge on face s
    const int k = gamma.corner[s] + j;
    const int k1 = (k + 1) % m;
    return std::pair<Index, Index>(outer_ring[k], outer_ring[k1]);
  };
  for (int j = 0; j < c0; ++j) {
    auto [a, b] = face_edge(0, j);
    auto [c, d] = face_edge(2, c0 - 1 - j);
    bld.mesh.edges.push_back({a, b, EdgeTag::PeriodicPair, (Index)j});
    bld.mesh.edges.push_back({c, d, EdgeTag::PeriodicPair, (Index)j});
  }
  for (int j = 0; j < c1; ++j) {
    auto [a, b] = face_edge(1, j);
    auto [c, d] = face_edge(3, c1 - 1 - j);
    bld.mesh.edges.push_back({a, b, EdgeTag::PeriodicPair, (Index)(c0 + j)});
    bld.mesh.edges.push_back({c, d, EdgeTag::PeriodicPair, (Index)(c0 + j)});
  }
  return bld.mesh;
}

double tri_min_angle(const Mesh& m, Index e) {
  const auto& t = m.elems[e];
  double best = M_PI;
  for (int i = 0; i < 3; ++i) {
    const Index a = t[i], b = t[(i + 1) % 3], c = t[(i + 2) % 3];
    const double ux = m.vx[b] - m.vx[a], uy = m.vy[b] - m.vy[a];
    const double wx = m.vx[c] - m.vx[a], wy = m.vy[c] - m.vy[a];
    const double cosang = (ux * wx + uy * wy) / (std::hypot(ux, uy) * std::hypot(wx, wy));
    best = std::min(best, std::acos(std::clamp(cosang, -1.0, 1.0)));
  }
  return best * 180.0 / M_PI;
}

} // namespace

CellGeometry CellGeometry::disk(double a, int m_gamma) {
  CellGeometry g;
  g.ax = g.ay = a;
  g.m_gamma = m_gamma;
  return g;
}

CellGeometry CellGeometry::ellipse(double ax, double ay, int m_gamma) {
  CellGeometry g;
  g.ax = ax;
  g.ay = ay;
  g.m_gamma = m_gamma;
  return g;
}

double CellGeometry::inclusion_area() const { return M_PI * ax * ay; }

void CellGeometry::validate() const {
  if (dimension != 2) throw std::invalid_argument("meshed geometry requires dimension 2");
  if (!(ax > 0.0 && ax < 0.5 && ay > 0.0 && ay < 0.5))
    throw std::invalid_argument("inclusion not strictly interior: semi-axes must lie in (0, 1/2)");
  if (m_gamma != 0 && (m_gamma < 16 || m_gamma % 2 != 0))
    throw std::invalid_argument("m_gamma must be even and >= 16");
}

double Mesh::elem_area(Index e) const {
  const auto& t = elems[e];
  return 0.5 * cross2(vx[t[1]] - vx[t[0]], vy[t[1]] - vy[t[0]],
                      vx[t[2]] - vx[t[0]], vy[t[2]] - vy[t[0]]);
}

double Mesh::region_area(Region r) const {
  double a = 0.0;
  for (Index e = 0; e < n_elements(); ++e)
    if (elem_region[e] == r) a += elem_area(e);
  return a;
}

Mesh build_cell_mesh(const CellGeometry& geom, double h) {
  geom.validate();
  const double amin = std::min(geom.ax, geom.ay);
  if (!(h > 0.0 && h < amin)) throw std::invalid_argument("mesh parameter must satisfy 0 < h < a");
  int m = geom.m_gamma > 0 ? geom.m_gamma : default_m_gamma(geom, h);
  double min_angle = 0.0;
  double wc[6] = {0, 0, 0, 0, 0, 0};
  for (int attempt = 0; attempt < 3; ++attempt) {
    Mesh mesh = build_cell_mesh_once(geom, h, m);
    min_angle = 180.0;
    for (Index e = 0; e < mesh.n_elements(); ++e) {
      const double a = tri_min_angle(mesh, e);
      if (a < min_angle) {
        min_angle = a;
        for (int i = 0; i < 3; ++i) {
          wc[2 * i] = mesh.vx[mesh.elems[e][i]];
          wc[2 * i + 1] = mesh.vy[mesh.elems[e][i]];
        }
      }
    }
    if (min_angle >= kMinAngleDeg) return mesh;
    m = (int)std::ceil(m * 1.25 / 8.0) * 8;
  }
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "mesh quality failure: minimum angle %.2f deg (< 15) at "
                "(%.5f,%.5f)-(%.5f,%.5f)-(%.5f,%.5f)",
                min_angle, wc[0], wc[1], wc[2], wc[3], wc[4], wc[5]);
  throw std::runtime_error(buf);
}

Mesh build_domain_mesh(const CellGeometry& geom, double eps, double h, Index dof_cap) {
  geom.validate();
  const int m = (int)std::lround(1.0 / eps);
  if (m < 2 || std::fabs(eps * m - 1.0) > 1e-9)
    throw std::invalid_argument("epsilon must be 1/m for an integer m >= 2");
  const double h_eff = std::min(h, eps / 8.0);
  const Mesh cell = build_cell_mesh(geom, h_eff * m);

  const Index cv = cell.n_vertices();
  if ((long long)cv * m * m > (long long)dof_cap * 2)
    throw std::runtime_error("memory guard exceeded: estimated vertex count above dof cap");

  Mesh out;
  out.h_target = h_eff;
  out.epsilon = eps;
  // exact bit-pattern key: shared face vertices are constructed bit-identically
  std::map<std::pair<std::uint64_t, std::uint64_t>, Index> weld;
  auto key_of = [](double x, double y) {
    std::uint64_t kx, ky;
    static_assert(sizeof(double) == 8);
    std::memcpy(&kx, &x, 8);
    std::memcpy(&ky, &y, 8);
    return std::make_pair(kx, ky);
  };
  std::vector<Index> local(cv);
  for (int cyi = 0; cyi < m; ++cyi) {
    for (int cxi = 0; cxi < m; ++cxi) {
      const int copy = cyi * m + cxi;
      for (Index v = 0; v < cv; ++v) {
        const double x = (cell.vx[v] + cxi) / m;
        const double y = (cell.vy[v] + cyi) / m;
        const bool on_face = cell.vx[v] == 0.0 || cell.vx[v] == 1.0 || cell.vy[v] == 0.0 ||
                             cell.vy[v] == 1.0;
        if (on_face) {
          const auto k = key_of(x, y);
          auto it = weld.find(k);
          if (it != weld.end() && out.vx[it->second] == x && out.vy[it->second] == y) {
            local[v] = it->second;
            continue;
          }
          local[v] = (Index)out.vx.size();
          weld.emplace(k, local[v]);
        } else {
          local[v] = (Index)out.vx.size();
        }
        out.vx.push_back(x);
        out.vy.push_back(y);
        out.cell_vertex.push_back(v);
        out.cell_ix.push_back((std::int16_t)cxi);
        out.cell_iy.push_back((std::int16_t)cyi);
      }
      for (Index e = 0; e < cell.n_elements(); ++e) {
        const auto& t = cell.elems[e];
        out.elems.push_back({local[t[0]], local[t[1]], local[t[2]]});
        out.elem_region.push_back(cell.elem_region[e]);
      }
      for (const auto& te : cell.edges) {
        if (te.tag == EdgeTag::Gamma)
          out.edges.push_back({local[te.a], local[te.b], EdgeTag::Gamma, (Index)copy});
      }
      for (const auto& te : cell.edges) {
        if (te.tag != EdgeTag::PeriodicPair) continue;
        // keep only edges that lie on the boundary of Omega
        const double xa = out.vx[local[te.a]], ya = out.vy[local[te.a]];
        const double xb = out.vx[local[te.b]], yb = out.vy[local[te.b]];
        if ((xa == 0.0 && xb == 0.0) || (xa == 1.0 && xb == 1.0) || (ya == 0.0 && yb == 0.0) ||
            (ya == 1.0 && yb == 1.0))
          out.edges.push_back({local[te.a], local[te.b], EdgeTag::Outer, -1});
      }
    }
  }
  if (out.n_vertices() > dof_cap)
    throw std::runtime_error("memory guard exceeded: vertex count above dof cap");
  return out;
}

Mesh build_square_mesh(int n) {
  if (n < 1) throw std::invalid_argument("square mesh needs n >= 1");
  Builder bld;
  bld.mesh.h_target = 1.0 / n;
  std::vector<Index> grid((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) grid[j * (n + 1) + i] = bld.add_vertex((double)i / n, (double)j / n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Index a = grid[j * (n + 1) + i], b = grid[j * (n + 1) + i + 1];
      const Index c = grid[(j + 1) * (n + 1) + i + 1], d = grid[(j + 1) * (n + 1) + i];
      const Index ctr = bld.add_vertex((i + 0.5) / n, (j + 0.5) / n);
      bld.add_tri(a, b, ctr, Region::Q1);
      bld.add_tri(b, c, ctr, Region::Q1);
      bld.add_tri(c, d, ctr, Region::Q1);
      bld.add_tri(d, a, ctr, Region::Q1);
    }
  }
  for (int i = 0; i < n; ++i) {
    bld.mesh.edges.push_back({grid[i], grid[i + 1], EdgeTag::Outer, -1});
    bld.mesh.edges.push_back({grid[n * (n + 1) + i], grid[n * (n + 1) + i + 1], EdgeTag::Outer, -1});
    bld.mesh.edges.push_back({grid[i * (n + 1)], grid[(i + 1) * (n + 1)], EdgeTag::Outer, -1});
    bld.mesh.edges.push_back({grid[i * (n + 1) + n], grid[(i + 1) * (n + 1) + n], EdgeTag::Outer, -1});
  }
  return bld.mesh;
}

MeshReport mesh_report(const Mesh& mesh) {
  if (mesh.n_elements() == 0) throw std::invalid_argument("mesh_report: empty mesh");
  MeshReport rep;
  rep.n_vertices = mesh.n_vertices();
  rep.n_elements = mesh.n_elements();
  rep.min_angle_deg = 180.0;
  rep.min_edge = std::numeric_limits<double>::max();
  rep.area_q0 = mesh.region_area(Region::Q0);
  rep.area_q1 = mesh.region_area(Region::Q1);

  std::map<std::pair<Index, Index>, std::array<int, 2>> edge_use; // count, regions-mask
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    rep.min_angle_deg = std::min(rep.min_angle_deg, tri_min_angle(mesh, e));
    const auto& t = mesh.elems[e];
    for (int i = 0; i < 3; ++i) {
      const Index a = std::min(t[i], t[(i + 1) % 3]);
      const Index b = std::max(t[i], t[(i + 1) % 3]);
      const double len = std::hypot(mesh.vx[a] - mesh.vx[b], mesh.vy[a] - mesh.vy[b]);
      rep.max_edge = std::max(rep.max_edge, len);
      rep.min_edge = std::min(rep.min_edge, len);
      auto& u = edge_use[{a, b}];
      u[0] += 1;
      u[1] |= 1 << (int)mesh.elem_region[e];
    }
  }
  rep.conforming = true;
  for (const auto& [k, u] : edge_use) {
    if (u[0] > 2) rep.conforming = false;
    if (u[0] == 1) {
      // boundary edges of the meshed square must lie on its outline
      auto on_outline = [&](Index v) {
        return mesh.vx[v] == 0.0 || mesh.vx[v] == 1.0 || mesh.vy[v] == 0.0 || mesh.vy[v] == 1.0;
      };
      if (!on_outline(k.first) || !on_outline(k.second)) rep.conforming = false;
    }
  }

  rep.gamma_separates_regions = true;
  std::map<Index, int> loop_ids;
  for (const auto& te : mesh.edges) {
    if (te.tag != EdgeTag::Gamma) continue;
    ++rep.n_gamma_edges;
    loop_ids[te.id] = 1;
    const Index a = std::min(te.a, te.b), b = std::max(te.a, te.b);
    auto it = edge_use.find({a, b});
    if (it == edge_use.end() || it->second[0] != 2 || it->second[1] != 3)
      rep.gamma_separates_regions = false;
  }
  rep.n_gamma_loops = (Index)loop_ids.size();

  if (mesh.epsilon == 0.0) {
    try {
      for (int axis = 0; axis < 2; ++axis) {
        const auto part = periodic_partner(mesh, axis);
        for (Index v = 0; v < mesh.n_vertices(); ++v)
          if (part[part[v]] != v) rep.periodic_involution = false;
      }
    } catch (const std::exception&) {
      rep.periodic_involution = false;
    }
  }
  return rep;
}

SubMesh extract_region(const Mesh& mesh, Region region) {
  SubMesh sub;
  std::vector<Index> map(mesh.n_vertices(), -1);
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    if (mesh.elem_region[e] != region) continue;
    std::array<Index, 3> t;
    for (int i = 0; i < 3; ++i) {
      const Index v = mesh.elems[e][i];
      if (map[v] < 0) {
        map[v] = (Index)sub.mesh.vx.size();
        sub.mesh.vx.push_back(mesh.vx[v]);
        sub.mesh.vy.push_back(mesh.vy[v]);
        sub.parent_vertex.push_back(v);
      }
      t[i] = map[v];
    }
    sub.mesh.elems.push_back(t);
    sub.mesh.elem_region.push_back(region);
  }
  for (const auto& te : mesh.edges)
    if (map[te.a] >= 0 && map[te.b] >= 0)
      sub.mesh.edges.push_back({map[te.a], map[te.b], te.tag, te.id});
  sub.mesh.h_target = mesh.h_target;
  sub.mesh.epsilon = mesh.epsilon;
  return sub;
}

std::vector<Index> periodic_partner(const Mesh& mesh, int axis) {
  std::vector<Index> part(mesh.n_vertices());
  for (Index v = 0; v < mesh.n_vertices(); ++v) part[v] = v;
  const auto& c = axis == 0 ? mesh.vx : mesh.vy;
  const auto& o = axis == 0 ? mesh.vy : mesh.vx;
  std::map<double, Index> lo, hi;
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    if (c[v] == 0.0) lo[o[v]] = v;
    if (c[v] == 1.0) hi[o[v]] = v;
  }
  if (lo.size() != hi.size()) throw std::runtime_error("periodic faces do not match");
  for (const auto& [y, v] : lo) {
    auto it = hi.find(y);
    if (it == hi.end()) throw std::runtime_error("periodic faces do not match");
    part[v] = it->second;
    part[it->second] = v;
  }
  return part;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  char buf[128];
  os << mesh.n_vertices() << ' ' << mesh.n_elements() << '\n';
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", mesh.vx[v], mesh.vy[v]);
    os << buf;
  }
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const auto& t = mesh.elems[e];
    os << t[0] << ' ' << t[1] << ' ' << t[2] << ' '
       << (mesh.elem_region[e] == Region::Q0 ? "Q0" : "Q1") << '\n';
  }
  for (const auto& te : mesh.edges) {
    os << te.a << ' ' << te.b << ' ';
    switch (te.tag) {
      case EdgeTag::Gamma: os << "Gamma(" << te.id << ")"; break;
      case EdgeTag::Outer: os << "Outer"; break;
      case EdgeTag::PeriodicPair: os << "PeriodicPair(" << te.id << ")"; break;
      default: os << "interior"; break;
    }
    os << '\n';
  }
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  write_mesh(f, mesh);
}

Mesh read_mesh(std::istream& is) {
  Mesh mesh;
  Index nv = 0, ne = 0;
  if (!(is >> nv >> ne)) throw std::runtime_error("bad mesh header");
  mesh.vx.resize(nv);
  mesh.vy.resize(nv);
  for (Index v = 0; v < nv; ++v) is >> mesh.vx[v] >> mesh.vy[v];
  mesh.elems.resize(ne);
  mesh.elem_region.resize(ne);
  for (Index e = 0; e < ne; ++e) {
    std::string reg;
    is >> mesh.elems[e][0] >> mesh.elems[e][1] >> mesh.elems[e][2] >> reg;
    mesh.elem_region[e] = reg == "Q0" ? Region::Q0 : Region::Q1;
  }
  Index a, b;
  std::string tag;
  while (is >> a >> b >> tag) {
    TaggedEdge te;
    te.a = a;
    te.b = b;
    if (tag.rfind("Gamma", 0) == 0) {
      te.tag = EdgeTag::Gamma;
      te.id = std::atoi(tag.c_str() + 6);
    } else if (tag == "Outer") {
      te.tag = EdgeTag::Outer;
    } else if (tag.rfind("PeriodicPair", 0) == 0) {
      te.tag = EdgeTag::PeriodicPair;
      te.id = std::atoi(tag.c_str() + 13);
    }
    mesh.edges.push_back(te);
  }
  return mesh;
}

} // namespace dhc
