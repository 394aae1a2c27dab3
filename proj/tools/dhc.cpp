// Command line front-end: meshing, inclusion spectra, beta curves, cell
// tensors, homogenized spectra, two-term predictions, fine-scale sweeps, and
// the validate/report orchestration. Exit codes: 0 ok, 1 acceptance failure,
// 2 usage or config error, 3 numerical failure.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dhc/artifacts.hpp"
#include "dhc/config.hpp"
#include "dhc/pipeline.hpp"

using namespace dhc;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string hash_of_config(const RunConfig& cfg) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a(cfg.canonical()));
  return buf;
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

int find_mode_by_parity(const Micro& micro, int sx_want, int sy_want) {
  const auto& s = micro.spectrum();
  const auto& q0 = micro.q0_mesh();
  std::map<std::pair<long, long>, Index> lk;
  auto key = [](double x, double y) {
    return std::make_pair((long)std::llround(x * 1e9), (long)std::llround(y * 1e9));
  };
  for (Index v = 0; v < q0.n_vertices(); ++v) lk[key(q0.vx[v], q0.vy[v])] = v;
  for (int j = 0; j < (int)s.values.size(); ++j) {
    const int c = s.cluster_of(j);
    if (!s.cluster_zero_mean[c] || s.cluster_ranges[c].second - s.cluster_ranges[c].first != 1)
      continue;
    double sx = 0, sy = 0, n2 = 0;
    for (Index v = 0; v < q0.n_vertices(); ++v) {
      n2 += s.vectors(v, j) * s.vectors(v, j);
      auto ix = lk.find(key(1.0 - q0.vx[v], q0.vy[v]));
      auto iy = lk.find(key(q0.vx[v], 1.0 - q0.vy[v]));
      if (ix != lk.end()) sx += s.vectors(v, j) * s.vectors(ix->second, j);
      if (iy != lk.end()) sy += s.vectors(v, j) * s.vectors(iy->second, j);
    }
    if (sx * sx_want > 0.9 * n2 && sy * sy_want > 0.9 * n2) return j;
  }
  return -1;
}

void cmd_mesh(const RunConfig& cfg, const std::string& mesh_out, bool dump_matrices) {
  const Mesh cell = build_cell_mesh(cfg.geom, cfg.h);
  const auto rep = mesh_report(cell);
  if (dump_matrices) {
    const auto forms = assemble(cell, RegionCoeff::uniform(1.0), RegionCoeff::uniform(1.0));
    std::ofstream fk(cfg.out_dir + "/stiffness.txt"), fm(cfg.out_dir + "/mass.txt");
    write_matrix(fk, forms.K_full);
    write_matrix(fm, forms.M_full);
  }
  ordered_json j;
  j["n_vertices"] = rep.n_vertices;
  j["n_elements"] = rep.n_elements;
  j["min_angle_deg"] = rep.min_angle_deg;
  j["max_edge"] = rep.max_edge;
  j["area_q0"] = rep.area_q0;
  j["area_q1"] = rep.area_q1;
  j["gamma_loops"] = rep.n_gamma_loops;
  j["conforming"] = rep.conforming;
  j["periodic_involution"] = rep.periodic_involution;
  std::ofstream f(cfg.out_dir + "/mesh_report.json");
  f << j.dump(2) << '\n';
  if (!mesh_out.empty()) write_mesh_file(mesh_out, cell);
  std::cout << "cell mesh: " << rep.n_vertices << " vertices, min angle " << rep.min_angle_deg
            << " deg\n";
}

void cmd_micro(const RunConfig& cfg) {
  MicroStudy st(cfg.geom, cfg.h, cfg.modes, cfg.lambda_max, 8, cfg.tol);
  {
    CsvWriter csv(cfg.out_dir + "/dirichlet_spectrum.csv",
                  {"j", "lambda", "lambda_extrap", "mean", "cluster", "zero_mean"});
    const auto& sh = st.micro_h->spectrum();
    const auto& sf = st.micro_f->spectrum();
    for (int j = 0; j < (int)sf.values.size(); ++j) {
      const int c = sf.cluster_of(j);
      csv.row({std::to_string(j), g17(sf.values[j]),
               g17(richardson2(sh.values[j], sf.values[j])), g17(sf.means[j]),
               std::to_string(c), sf.cluster_zero_mean[c] ? "1" : "0"});
    }
  }
  {
    CsvWriter csv(cfg.out_dir + "/limit_spectrum.csv",
                  {"k", "lambda_extrap", "multiplicity", "from_root", "from_zero_mean",
                   "bracket_lo", "bracket_hi"});
    const auto flat = st.limit_extrap;
    int k = 0;
    for (const auto& e : st.limit_f.entries) {
      csv.row({std::to_string(k++), g17(e.value), std::to_string(e.multiplicity),
               e.from_root ? "1" : "0", e.from_zero_mean ? "1" : "0", g17(e.bracket_lo),
               g17(e.bracket_hi)});
    }
  }
  {
    CsvWriter csv(cfg.out_dir + "/zeta_spectrum.csv", {"k", "lambda_extrap"});
    for (std::size_t k = 0; k < st.zeta_extrap.size(); ++k)
      csv.row({std::to_string(k), g17(st.zeta_extrap[k])});
  }
  std::cout << "mu2 = " << g17(st.mu2) << "\n";
}

void cmd_beta(const RunConfig& cfg, const std::string& grid, const std::string& backend) {
  const auto parts = [&] {
    std::vector<double> v;
    std::stringstream ss(grid);
    std::string tok;
    while (std::getline(ss, tok, ':')) v.push_back(std::stod(tok));
    return v;
  }();
  if (parts.size() != 3 || parts[2] < 2) throw UsageError("--grid must be lo:hi:N with N >= 2");
  const double lo = parts[0], hi = parts[1];
  const int n = (int)parts[2];

  const Mesh mesh = build_cell_mesh(cfg.geom, cfg.h);
  Micro micro(mesh, cfg.modes, cfg.tol);
  AnalyticBallBeta analytic{2, cfg.geom.radius()};
  const auto poles = micro.poles(hi * 1.2);

  CsvWriter csv(cfg.out_dir + "/beta.csv", {"lambda", "beta", "B", "backend", "bracket_id"});
  for (int i = 0; i < n; ++i) {
    const double lam = lo + (hi - lo) * i / (n - 1);
    bool near_pole = false;
    for (double p : poles) near_pole |= std::fabs(lam - p) <= cfg.tol.pole * std::max(1.0, p);
    if (near_pole) continue;
    int bracket = 0;
    for (double p : poles)
      if (lam > p) ++bracket;
    BetaValue v;
    if (backend == "series") {
      v = micro.beta_series(lam);
    } else if (backend == "analytic") {
      if (!cfg.geom.is_disk()) throw UsageError("analytic backend requires a disk");
      v = analytic.eval(lam);
    } else {
      v = micro.beta_direct(lam);
    }
    csv.row({g17(lam), g17(v.beta), g17(v.B), backend, std::to_string(bracket)});
  }
}

ordered_json tensors_json(const CellTensors& t) {
  ordered_json j;
  j["lambda0"] = t.lambda0;
  j["A_hom"] = {{t.A_hom(0, 0), t.A_hom(0, 1)}, {t.A_hom(1, 0), t.A_hom(1, 1)}};
  j["C"] = t.C;
  j["C_flux"] = t.C_flux;
  j["P_int"] = t.P_int;
  j["K"] = {t.K[0], t.K[1]};
  j["nu_const"] = t.nu_const;
  j["eta_mean"] = t.eta_mean;
  j["diagnostics"] = {{"ahom_asym", t.ahom_asym},
                      {"green_a9", t.green_a9},
                      {"green_a10", t.green_a10},
                      {"solvability_defect", t.solvability_defect}};
  return j;
}

void cmd_cell(const RunConfig& cfg, const std::string& lambda0_arg) {
  int root_index = 0;
  double lambda0 = 0.0;
  bool by_root = lambda0_arg.rfind("root", 0) == 0;
  if (by_root) {
    root_index = std::stoi(lambda0_arg.substr(4));
  } else {
    lambda0 = std::stod(lambda0_arg);
  }

  ordered_json j;
  if (by_root || lambda0 == 0.0) {
    CellStudy st(cfg.geom, cfg.h, by_root ? root_index : 0, cfg.modes, cfg.tol);
    j["coarse"] = tensors_json(st.t_h);
    j["fine"] = tensors_json(st.t_f);
    j["lambda0_extrap"] = st.lambda0;
    j["A_extrap"] = {{st.A_extrap(0, 0), st.A_extrap(0, 1)},
                     {st.A_extrap(1, 0), st.A_extrap(1, 1)}};
    j["C_extrap"] = st.C_extrap;
    j["P_int_extrap"] = st.P_int_extrap;
    j["nu_const_extrap"] = st.nu_const_extrap;
  } else {
    const Mesh mesh = build_cell_mesh(cfg.geom, cfg.h);
    Micro micro(mesh, cfg.modes, cfg.tol);
    Cell cell(mesh, micro, cfg.tol);
    j = tensors_json(cell.tensors(lambda0));
  }
  std::ofstream f(cfg.out_dir + "/cell_tensors.json");
  f << j.dump(2) << '\n';
  std::cout << "cell tensors written\n";
}

void cmd_macro(const RunConfig& cfg) {
  CellStudy st(cfg.geom, cfg.h, 0, cfg.modes, cfg.tol);
  MacroStudy ms(st.A_extrap, cfg.macro_n, cfg.macro_count, cfg.tol);
  CsvWriter csv(cfg.out_dir + "/macro_spectrum.csv", {"k", "nu", "nu_extrap"});
  for (int k = 0; k < cfg.macro_count; ++k)
    csv.row({std::to_string(k), g17(ms.fine.nu[k]), g17(ms.nu_extrap[k])});
}

void cmd_predict(const RunConfig& cfg, const std::string& eps_arg) {
  std::vector<double> eps = cfg.eps_list;
  if (!eps_arg.empty()) {
    eps.clear();
    std::stringstream ss(eps_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) eps.push_back(parse_epsilon(tok));
  }
  CellStudy cs0(cfg.geom, cfg.h, 0, cfg.modes, cfg.tol);
  CellStudy cs2(cfg.geom, cfg.h, 1, cfg.modes, cfg.tol);
  MacroStudy ms(cs2.A_extrap, cfg.macro_n, cfg.macro_count, cfg.tol);

  std::vector<Branch> branches;
  CellTensors t0 = cs0.t_f;
  t0.C = cs0.C_extrap;
  t0.nu_const = cs0.nu_const_extrap;
  CellTensors t2 = cs2.t_f;
  t2.C = cs2.C_extrap;
  t2.nu_const = cs2.nu_const_extrap;
  branches.push_back({0.0, CaseKind::A, false, t0, std::nullopt});
  branches.push_back({cs2.lambda0, CaseKind::A, false, t2, std::nullopt});

  MacroSpectrum extrap = ms.fine;
  extrap.nu = ms.nu_extrap;
  const auto preds = make_predictions(branches, extrap, eps, cfg.tol);
  CsvWriter csv(cfg.out_dir + "/predictions.csv",
                {"lambda0", "case", "nu_index", "nu", "lambda1", "eps", "Lambda"});
  for (const auto& p : preds) {
    csv.row({g17(p.lambda0), p.kind == CaseKind::A ? "a" : "b", std::to_string(p.nu_index),
             g17(p.nu), g17(p.lambda1), g17(p.eps), g17(p.Lambda)});
  }
}

void cmd_caseb(const RunConfig& cfg, int mode_index) {
  const Mesh mesh = build_cell_mesh(cfg.geom, cfg.h);
  Micro micro(mesh, cfg.modes, cfg.tol);
  Cell cell(mesh, micro, cfg.tol);
  CaseB cb(mesh, micro, cell, cfg.tol);
  int mode = mode_index;
  if (mode < 0) {
    mode = find_mode_by_parity(micro, -1, -1);
    if (mode < 0) throw SolveError("no simple odd-odd zero-mean mode resolved");
  }
  const auto sol = cb.solve(mode);
  const auto rep = cb.residual_orders(sol, cfg.geom, {0.25, 0.125, 0.0625});
  ordered_json j;
  j["mode_index"] = sol.mode_index;
  j["lambda0"] = sol.lambda0;
  j["lambda1"] = sol.lambda1;
  j["lambda1_boundary"] = sol.lambda1_boundary;
  j["lambda1_raw_trace"] = sol.lambda1_raw_trace;
  j["A_tilde"] = sol.A_tilde;
  j["B_lambda0"] = sol.eta.B;
  j["w1_flux_total"] = sol.w1_flux_total;
  j["z1_residual"] = sol.z1_residual;
  j["slopes"] = {{"interior_q1", rep.slope_q1},
                 {"interior_q0", rep.slope_q0},
                 {"interface", rep.slope_interface}};
  std::ofstream f(cfg.out_dir + "/caseb.json");
  f << j.dump(2) << '\n';
  std::cout << "caseb: lambda0 = " << g17(sol.lambda0) << ", lambda1 = " << g17(sol.lambda1)
            << "\n";
}

void cmd_fine(const RunConfig& cfg, const std::string& eps_arg, const std::string& window_arg) {
  std::vector<double> eps = cfg.eps_list;
  if (!eps_arg.empty()) {
    eps.clear();
    std::stringstream ss(eps_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) eps.push_back(parse_epsilon(tok));
  }
  (void)window_arg;

  CellStudy cs0(cfg.geom, cfg.h, 0, cfg.modes, cfg.tol);
  MacroStudy ms(cs0.A_extrap, cfg.macro_n, 3, cfg.tol);
  BranchSpec b0{0.0, ms.nu_extrap[0] / cs0.C_extrap, "zero", true,
                {ms.nu_extrap[1] / cs0.C_extrap, ms.nu_extrap[2] / cs0.C_extrap}};
  TwoScaleSpec ts{&ms.fine, 0, 2 * cfg.macro_n, 0.0};
  const auto out = run_fine_sweep(cfg.geom, eps, cfg.h_cell_fine, {b0}, {}, &ts, cfg.dof_cap,
                                  cfg.tol);

  CsvWriter csv(cfg.out_dir + "/fine.csv",
                {"eps", "h", "lambda_eps", "matched_Lambda", "error", "slope_running"});
  std::vector<BranchPoint> sofar;
  for (const auto& p : out.branches[0]) {
    sofar.push_back(p);
    const auto r = summarize_rate(sofar);
    csv.row({g17(p.eps), g17(p.eps * cfg.h_cell_fine / 2.0), g17(p.lam_fine), g17(p.Lambda),
             g17(p.error), g17(r.slope)});
  }
}

// Reduced-scale end-to-end checks mirroring the acceptance suite; quick
// profile keeps the run reproducible in minutes.
int cmd_validate(const RunConfig& cfg, Manifest& man) {
  Timer total;
  auto check = [&](const std::string& name, bool pass, const std::string& detail) {
    man.add_check(name, pass, detail);
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
  };

  // mesh quality and geometry consistency
  {
    Timer t;
    const Mesh cell = build_cell_mesh(cfg.geom, cfg.h);
    const auto rep = mesh_report(cell);
    const double area_err = std::fabs(rep.area_q0 - cfg.geom.inclusion_area());
    check("mesh-quality",
          rep.conforming && rep.min_angle_deg >= 15.0 && rep.periodic_involution &&
              area_err < 1e-2,
          "min angle " + g17(rep.min_angle_deg) + ", area defect " + g17(area_err));
    man.add_timing("mesh", t.seconds());
  }

  const Mesh mesh_h = build_cell_mesh(cfg.geom, cfg.h);
  const Mesh mesh_f = build_cell_mesh(cfg.geom, cfg.h / 2.0);
  Micro micro_h(mesh_h, cfg.modes, cfg.tol);
  Micro micro_f(mesh_f, cfg.modes, cfg.tol);

  // beta backends agree away from poles
  {
    Timer t;
    const auto poles = micro_f.poles(cfg.lambda_max);
    double worst = 0.0;
    bool contained = true;
    int used = 0;
    for (int i = 0; i < 12; ++i) {
      const double lam = 5.0 + (0.8 * cfg.lambda_max - 5.0) * i / 11.0;
      bool skip = false;
      for (double p : poles) skip |= std::fabs(lam - p) < 0.12 * p;
      if (skip) continue;
      ++used;
      const auto bd = richardson2(micro_h.beta_direct(lam).beta, micro_f.beta_direct(lam).beta);
      const auto bs = micro_f.beta_series(lam);
      const double scale = std::max(std::fabs(bd), (1.0 - cfg.geom.inclusion_area()) * lam);
      worst = std::max(worst, std::fabs(bs.beta - bd) / scale);
      contained &= bs.lo - 2e-2 * scale < bd && bd < bs.hi + 2e-2 * scale;
    }
    check("beta-backends", used >= 6 && contained && worst < 5e-2,
          "grid points " + std::to_string(used) + ", worst series-direct deviation " + g17(worst));
    man.add_timing("beta", t.seconds());
  }

  // constant-trace operator equals the limit spectrum
  {
    Timer t;
    const auto lim_h = micro_h.limit_spectrum(cfg.lambda_max).flattened();
    const auto lim_f = micro_f.limit_spectrum(cfg.lambda_max).flattened();
    const int n = std::min({(int)lim_h.size(), (int)lim_f.size(), 6});
    const auto zh = micro_h.zeta_operator_spectrum(n).values;
    const auto zf = micro_f.zeta_operator_spectrum(n).values;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lim = richardson2(lim_h[i], lim_f[i]);
      const double zet = richardson2(zh[i], zf[i]);
      worst = std::max(worst, std::fabs(lim - zet) / std::max(1.0, std::fabs(zet)));
    }
    check("zeta-equivalence", worst < 2e-3,
          std::to_string(n) + " entries, worst relative gap " + g17(worst));
    man.add_timing("zeta", t.seconds());
  }

  // homogenized matrix properties and the closed macro loop
  Eigen::Matrix2d A_extrap;
  double C0 = 0.0;
  {
    Timer t;
    CellStudy cs0(cfg.geom, cfg.h, 0, cfg.modes, cfg.tol);
    A_extrap = cs0.A_extrap;
    C0 = cs0.C_extrap;
    const bool spd = A_extrap(0, 0) > 0 && A_extrap.determinant() > 0;
    check("ahom",
          spd && cs0.t_f.ahom_asym < 1e-8 && A_extrap(0, 0) < 1.0 && A_extrap(1, 1) < 1.0,
          "diag " + g17(A_extrap(0, 0)) + ", " + g17(A_extrap(1, 1)));

    CellStudy cs2(cfg.geom, cfg.h, 1, cfg.modes, cfg.tol);
    const bool idents = std::fabs(cs2.t_f.solvability_defect) < 1e-6 &&
                        cs2.t_f.green_a9 < 1e-6 && cs2.t_f.green_a10 < 1e-6 &&
                        std::fabs(cs2.t_f.C_flux - cs2.t_f.C) < 1e-4 * cs2.t_f.C &&
                        cs2.t_f.K.lpNorm<Eigen::Infinity>() < 1e-3;
    check("cell-identities", idents,
          "lambda0 " + g17(cs2.lambda0) + ", |K| " + g17(cs2.t_f.K.lpNorm<Eigen::Infinity>()));
    man.add_timing("cell", t.seconds());
  }
  {
    Timer t;
    const double alpha = 0.7;
    MacroStudy ms(alpha * Eigen::Matrix2d::Identity(), cfg.macro_n, 3, cfg.tol);
    const double e1 = std::fabs(ms.nu_extrap[0] - 2.0 * M_PI * M_PI * alpha);
    const double e2 = std::fabs(ms.nu_extrap[1] - 5.0 * M_PI * M_PI * alpha);
    check("macro-closed-loop", e1 < 1e-3 * ms.nu_extrap[0] && e2 < 1e-3 * ms.nu_extrap[1],
          "nu1 defect " + g17(e1));
    man.add_timing("macro", t.seconds());
  }

  // interface-mode construction (fixed resolution: the parity-based mode
  // finder needs an exactly mirror-symmetric interior triangulation)
  {
    Timer t;
    const Mesh mesh_cb = build_cell_mesh(cfg.geom, 0.05);
    Micro micro_cb(mesh_cb, cfg.modes, cfg.tol);
    Cell cell_f(mesh_cb, micro_cb, cfg.tol);
    CaseB cb(mesh_cb, micro_cb, cell_f, cfg.tol);
    const int mode = find_mode_by_parity(micro_cb, -1, -1);
    if (mode < 0) {
      check("caseb", false, "no simple odd-odd zero-mean mode resolved");
    } else {
      const auto sol = cb.solve(mode);
      const bool ok = sol.lambda1 <= 0.0 &&
                      std::fabs(sol.lambda1_boundary - sol.lambda1) <
                          1e-4 * std::fabs(sol.lambda1) &&
                      std::fabs(sol.w1_flux_total) < 1e-8 * std::fabs(sol.lambda1) &&
                      sol.z1_residual < 5e-2;
      check("caseb", ok, "lambda1 " + g17(sol.lambda1));
    }
    man.add_timing("caseb", t.seconds());
  }

  // short fine-scale consistency run (zero branch)
  {
    Timer t;
    MacroStudy ms(A_extrap, cfg.macro_n, 3, cfg.tol);
    BranchSpec b0{0.0, ms.nu_extrap[0] / C0, "zero", true,
                  {ms.nu_extrap[1] / C0, ms.nu_extrap[2] / C0}};
    std::vector<double> eps = cfg.eps_list;
    if (cfg.quick && eps.size() > 2) eps = {eps.front(), eps[eps.size() / 2]};
    TwoScaleSpec ts{&ms.fine, 0, 2 * cfg.macro_n, 0.0};
    const auto out =
        run_fine_sweep(cfg.geom, eps, cfg.h_cell_fine, {b0}, {}, &ts, cfg.dof_cap, cfg.tol);
    bool matched = true, decreasing = true;
    double prev = 1e300;
    for (const auto& p : out.branches[0]) {
      matched &= p.matched && p.control_ok;
      decreasing &= p.error < prev;
      prev = p.error;
    }
    check("fine-consistency", matched && decreasing,
          "errors decrease over " + std::to_string(eps.size()) + " eps values");
    man.add_timing("fine", t.seconds());

    CsvWriter csv(cfg.out_dir + "/fine.csv",
                  {"eps", "h", "lambda_eps", "matched_Lambda", "error", "slope_running"});
    std::vector<BranchPoint> sofar;
    for (const auto& p : out.branches[0]) {
      sofar.push_back(p);
      csv.row({g17(p.eps), g17(p.eps * cfg.h_cell_fine / 2.0), g17(p.lam_fine), g17(p.Lambda),
               g17(p.error), g17(summarize_rate(sofar).slope)});
    }
  }

  man.add_timing("total", total.seconds());
  return man.all_checks_pass() ? 0 : 1;
}

void cmd_report(const RunConfig& cfg) {
  std::ifstream mf(cfg.out_dir + "/manifest.json");
  std::ostringstream report;
  report << "run summary (" << cfg.out_dir << ")\n";
  if (mf) {
    const auto j = nlohmann::json::parse(mf);
    report << "config " << j.value("config_hash", "?") << "\n";
    for (const auto& c : j.value("checks", nlohmann::json::array()))
      report << (c.value("pass", false) ? "  PASS " : "  FAIL ") << c.value("name", "?") << "  "
             << c.value("detail", "") << "\n";
    for (const auto& a : j.value("artifacts", nlohmann::json::array()))
      report << "  artifact " << a.value("name", "?") << " (" << a.value("bytes", 0)
             << " bytes)\n";
  } else {
    report << "no manifest present; run validate first\n";
  }
  std::ofstream f(cfg.out_dir + "/report.txt");
  f << report.str();
  std::cout << report.str();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-scale spectral toolkit for doubly high-contrast periodic media"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mesh_out, grid = "1:420:50", backend = "direct";
  std::string lambda0_arg = "root1", eps_arg, window_arg;
  int mode_index = -1;
  bool dump_matrices = false;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--out", out_dir, "output directory override");

  auto* mesh = app.add_subcommand("mesh", "build the cell mesh and report quality");
  mesh->add_option("--mesh-out", mesh_out, "write the mesh in text format");
  mesh->add_flag("--dump-matrices", dump_matrices, "dump assembled forms in coordinate format");
  auto* micro = app.add_subcommand("micro", "inclusion spectra and the limit spectrum");
  auto* beta = app.add_subcommand("beta", "spectral function on a lambda grid");
  beta->add_option("--grid", grid, "lo:hi:N");
  beta->add_option("--backend", backend, "direct|series|analytic");
  auto* cell = app.add_subcommand("cell", "cell tensors at lambda0");
  cell->add_option("--lambda0", lambda0_arg, "value or rootN");
  auto* macro = app.add_subcommand("macro", "homogenized spectrum");
  auto* predict = app.add_subcommand("predict", "two-term spectral predictions");
  predict->add_option("--eps", eps_arg, "comma list of 1/m values");
  auto* caseb = app.add_subcommand("caseb", "interface-mode first-order construction");
  caseb->add_option("--mode-index", mode_index, "Dirichlet mode index (-1: auto)");
  auto* fine = app.add_subcommand("fine", "fine-scale sweep for the zero branch");
  fine->add_option("--eps-list", eps_arg, "comma list of 1/m values");
  fine->add_option("--window", window_arg, "lo:hi eigenvalue window");
  auto* validate = app.add_subcommand("validate", "end-to-end checks with manifest");
  auto* report = app.add_subcommand("report", "summarize artifacts in the output directory");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << (e.get_exit_code() == 0 ? "" : "usage error: ") << e.what() << "\n";
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::parse_file(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg.validate();
    ensure_dir(cfg.out_dir);
    Manifest man(cfg.out_dir, hash_of_config(cfg));

    int rc = 0;
    if (mesh->parsed()) {
      cmd_mesh(cfg, mesh_out, dump_matrices);
      man.add("mesh_report.json");
    } else if (micro->parsed()) {
      cmd_micro(cfg);
      man.add("dirichlet_spectrum.csv");
      man.add("limit_spectrum.csv");
      man.add("zeta_spectrum.csv");
    } else if (beta->parsed()) {
      cmd_beta(cfg, grid, backend);
      man.add("beta.csv");
    } else if (cell->parsed()) {
      cmd_cell(cfg, lambda0_arg);
      man.add("cell_tensors.json");
    } else if (macro->parsed()) {
      cmd_macro(cfg);
      man.add("macro_spectrum.csv");
    } else if (predict->parsed()) {
      cmd_predict(cfg, eps_arg);
      man.add("predictions.csv");
    } else if (caseb->parsed()) {
      cmd_caseb(cfg, mode_index);
      man.add("caseb.json");
    } else if (fine->parsed()) {
      cmd_fine(cfg, eps_arg, window_arg);
      man.add("fine.csv");
    } else if (validate->parsed()) {
      rc = cmd_validate(cfg, man);
      man.add("fine.csv");
    } else if (report->parsed()) {
      cmd_report(cfg);
      return 0;
    }
    man.write();
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
