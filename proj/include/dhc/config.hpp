#pragma once

#include <string>
#include <vector>

#include "dhc/fem.hpp"

namespace dhc {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat sectioned key-value configuration; see README for the schema.
struct RunConfig {
  CellGeometry geom = CellGeometry::ellipse(0.3, 0.2);
  double h = 0.04;          // cell study parameter (paired with h/2)
  int modes = 14;
  double lambda_max = 520.0;
  std::string backends = "series,direct";
  int macro_n = 32;
  int macro_count = 4;
  std::vector<double> eps_list{0.5, 1.0 / 3.0, 0.25, 1.0 / 6.0, 0.125};
  double h_cell_fine = 1.0 / 16.0;
  Index dof_cap = 300000;
  double window_lo = 0.0, window_hi = 60.0;
  std::string out_dir = "out";
  bool quick = true; // reduced-resolution validate profile
  Tolerances tol;

  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_text(const std::string& text);
  void validate() const; // throws UsageError with a field-level message
  std::string canonical() const; // deterministic serialization, hashed into manifests
};

// "1/2" or a decimal equal to a unit fraction; throws UsageError otherwise.
double parse_epsilon(const std::string& token);

} // namespace dhc
