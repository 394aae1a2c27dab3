#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dhc {

using Index = std::int32_t;

enum class Region : std::uint8_t { Q0 = 0, Q1 = 1 };

enum class EdgeTag : std::uint8_t { Interior = 0, Gamma, Outer, PeriodicPair };

// Periodicity cell [0,1]^2 with an axis-aligned elliptic inclusion centered at
// (1/2, 1/2). Semi-axes ax = ay gives the disk of radius a.
struct CellGeometry {
  int dimension = 2;
  double ax = 0.25;
  double ay = 0.25;
  int m_gamma = 0; // 0: derived from h as segments ~ perimeter scale

  static CellGeometry disk(double a, int m_gamma = 0);
  static CellGeometry ellipse(double ax, double ay, int m_gamma = 0);

  bool is_disk() const { return ax == ay; }
  double radius() const { return ax; }
  // Exact inclusion area pi*ax*ay.
  double inclusion_area() const;
  void validate() const; // throws std::invalid_argument
};

struct TaggedEdge {
  Index a = -1, b = -1; // Gamma edges oriented with Q0 on the left (CCW loop)
  EdgeTag tag = EdgeTag::Interior;
  Index id = -1; // Gamma: loop id; PeriodicPair: shared pair id
};

struct Mesh {
  std::vector<double> vx, vy;
  std::vector<std::array<Index, 3>> elems; // CCW
  std::vector<Region> elem_region;
  std::vector<TaggedEdge> edges; // tagged (non-interior) edges only
  double h_target = 0.0;
  double epsilon = 0.0; // 1/m for domain meshes, 0 for cell meshes

  // Domain meshes: provenance of each vertex in the template cell mesh.
  std::vector<Index> cell_vertex;
  std::vector<std::int16_t> cell_ix, cell_iy;

  Index n_vertices() const { return static_cast<Index>(vx.size()); }
  Index n_elements() const { return static_cast<Index>(elems.size()); }
  double elem_area(Index e) const;
  double region_area(Region r) const;
};

struct MeshReport {
  Index n_vertices = 0;
  Index n_elements = 0;
  double min_angle_deg = 0.0;
  double max_edge = 0.0;
  double min_edge = 0.0;
  double area_q0 = 0.0;
  double area_q1 = 0.0;
  Index n_gamma_loops = 0;
  Index n_gamma_edges = 0;
  bool conforming = false;
  bool gamma_separates_regions = false;
  bool periodic_involution = true; // cell meshes only; true when not applicable
};

// Boundary-fitted mesh of the cell Q = [0,1]^2; outer-face vertex sets match
// bit-exactly under unit translation. Throws on invalid geometry or if the
// produced mesh violates the minimum-angle floor.
Mesh build_cell_mesh(const CellGeometry& geom, double h);

// Mesh of Omega = [0,1]^2 tiled by m^2 scaled cell copies, eps = 1/m. The cell
// parameter is h/eps; h is clamped to eps/8. dof_cap guards vertex count.
Mesh build_domain_mesh(const CellGeometry& geom, double eps, double h,
                       Index dof_cap = 300000);

// Uniform crossed triangulation of the unit square without inclusions
// (n x n quads, four triangles each); Outer edges tagged, region Q1.
Mesh build_square_mesh(int n);

MeshReport mesh_report(const Mesh& mesh);

// Submesh of one region; parent_vertex maps submesh vertex -> parent vertex.
struct SubMesh {
  Mesh mesh;
  std::vector<Index> parent_vertex;
};
SubMesh extract_region(const Mesh& mesh, Region region);

// Periodic partner map for cell meshes along one axis (0: x, 1: y); vertices
// not on the relevant faces map to themselves. The map is an involution.
std::vector<Index> periodic_partner(const Mesh& mesh, int axis);

// Text format: "n_vertices n_elements" header, vertex lines "x y", element
// lines "i j k region", then tagged edge lines "i j tag".
void write_mesh(std::ostream& os, const Mesh& mesh);
void write_mesh_file(const std::string& path, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

} // namespace dhc
