#include "dhc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace dhc {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config field '" + key + "': cannot parse number '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config field '" + key + "': cannot parse integer '" + v + "'");
  }
}

} // namespace

double parse_epsilon(const std::string& token) {
  double value = 0.0;
  const auto slash = token.find('/');
  if (slash != std::string::npos) {
    const double num = to_double("eps", trim(token.substr(0, slash)));
    const double den = to_double("eps", trim(token.substr(slash + 1)));
    if (den == 0.0) throw UsageError("epsilon must be 1/m: division by zero in '" + token + "'");
    value = num / den;
  } else {
    value = to_double("eps", token);
  }
  if (!(value > 0.0 && value <= 0.5)) throw UsageError("epsilon must be 1/m with integer m >= 2");
  const double m = 1.0 / value;
  if (std::fabs(m - std::lround(m)) > 1e-9 * m)
    throw UsageError("epsilon must be 1/m for an integer m: got '" + token + "'");
  return value;
}

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::string> kv;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line is not key = value: '" + line + "'");
    kv[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  double ax = cfg.geom.ax, ay = cfg.geom.ay;
  int m_gamma = 0;
  for (const auto& [key, val] : kv) {
    if (key == "geometry.shape") {
      if (val != "disk" && val != "ellipse") throw UsageError("geometry.shape must be disk|ellipse");
    } else if (key == "geometry.a") {
      ax = ay = to_double(key, val);
    } else if (key == "geometry.ax") {
      ax = to_double(key, val);
    } else if (key == "geometry.ay") {
      ay = to_double(key, val);
    } else if (key == "geometry.m_gamma") {
      m_gamma = to_int(key, val);
    } else if (key == "mesh.h") {
      cfg.h = to_double(key, val);
    } else if (key == "micro.modes") {
      cfg.modes = to_int(key, val);
    } else if (key == "micro.lambda_max") {
      cfg.lambda_max = to_double(key, val);
    } else if (key == "micro.backends") {
      cfg.backends = val;
    } else if (key == "micro.tol_pole") {
      cfg.tol.pole = to_double(key, val);
    } else if (key == "micro.tol_mean") {
      cfg.tol.mean_zero = to_double(key, val);
    } else if (key == "micro.tol_solvability") {
      cfg.tol.solvability = to_double(key, val);
    } else if (key == "macro.n") {
      cfg.macro_n = to_int(key, val);
    } else if (key == "macro.count") {
      cfg.macro_count = to_int(key, val);
    } else if (key == "fine.eps") {
      cfg.eps_list.clear();
      for (const auto& tok : split(val, ',')) cfg.eps_list.push_back(parse_epsilon(tok));
    } else if (key == "fine.h_cell") {
      const auto slash = val.find('/');
      cfg.h_cell_fine = slash == std::string::npos
                            ? to_double(key, val)
                            : to_double(key, val.substr(0, slash)) /
                                  to_double(key, val.substr(slash + 1));
    } else if (key == "fine.dof_cap") {
      cfg.dof_cap = to_int(key, val);
    } else if (key == "fine.window") {
      const auto parts = split(val, ':');
      if (parts.size() != 2) throw UsageError("fine.window must be 'lo:hi'");
      cfg.window_lo = to_double(key, parts[0]);
      cfg.window_hi = to_double(key, parts[1]);
    } else if (key == "output.dir") {
      cfg.out_dir = val;
    } else if (key == "output.quick") {
      cfg.quick = val == "1" || val == "true";
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  cfg.geom = CellGeometry::ellipse(ax, ay, m_gamma);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_text(ss.str());
}

void RunConfig::validate() const {
  try {
    geom.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("geometry: ") + e.what());
  }
  if (!(h > 0.0 && h < std::min(geom.ax, geom.ay)))
    throw UsageError("mesh.h must satisfy 0 < h < min semi-axis");
  if (modes < 4) throw UsageError("micro.modes must be >= 4");
  if (lambda_max <= 0.0) throw UsageError("micro.lambda_max must be positive");
  if (macro_n < 4 || macro_count < 1) throw UsageError("macro.n >= 4 and macro.count >= 1");
  if (eps_list.empty()) throw UsageError("fine.eps must list at least one value");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (eps_list[i] >= eps_list[i - 1])
      throw UsageError("fine.eps must be strictly decreasing");
  if (!(h_cell_fine > 0.0 && h_cell_fine <= 0.125))
    throw UsageError("fine.h_cell must lie in (0, 1/8]");
  if (dof_cap < 1000) throw UsageError("fine.dof_cap too small");
  for (double t : {tol.linear, tol.eigen_residual, tol.cluster_gap, tol.mean_zero, tol.pole,
                   tol.solvability})
    if (!(t > 0.0)) throw UsageError("tolerances must be positive");
}

std::string RunConfig::canonical() const {
  char buf[2048];
  std::string eps;
  for (double e : eps_list) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g,", e);
    eps += b;
  }
  std::snprintf(buf, sizeof buf,
                "ax=%.17g;ay=%.17g;mg=%d;h=%.17g;modes=%d;lmax=%.17g;backends=%s;mn=%d;mc=%d;"
                "eps=%s;hcf=%.17g;cap=%d;win=%.17g:%.17g;quick=%d;"
                "tol=%.3g,%.3g,%.3g,%.3g,%.3g,%.3g",
                geom.ax, geom.ay, geom.m_gamma, h, modes, lambda_max, backends.c_str(), macro_n,
                macro_count, eps.c_str(), h_cell_fine, (int)dof_cap, window_lo, window_hi,
                (int)quick, tol.linear, tol.eigen_residual, tol.cluster_gap, tol.mean_zero,
                tol.pole, tol.solvability);
  return buf;
}

} // namespace dhc
