// Command-line driver: one subcommand per pipeline, all reading a single JSON config.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nlhom/config.hpp"
#include "nlhom/io.hpp"

namespace {

using namespace nlhom;
using ojson = nlohmann::ordered_json;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
};

Config load(const Common& c) {
  std::vector<Override> overrides;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(s, "override must look like key.path=value");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return load_config(c.config_path, overrides);
}

std::string output_path(const Config& cfg, const std::string& stem, const std::string& ext) {
  std::filesystem::create_directories(cfg.output.directory);
  return (std::filesystem::path(cfg.output.directory) / (cfg.output.prefix + "_" + stem + "." + ext)).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << text;
}

ojson vec_json(const Eigen::Vector3d& v) { return ojson::array({v.x(), v.y(), v.z()}); }

ojson matrix_row_major(const Eigen::Matrix3d& m) {
  ojson a = ojson::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.push_back(m(i, j));
  return a;
}

ojson stats_json(const SolveStats& s) {
  return {{"energy", s.energy}, {"residual", s.residual}, {"iterations", s.iterations},
          {"el_residual", s.el_residual}};
}

Eigen::Vector3d parse_vec3(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) throw InputError(what + " needs 3 numbers");
  return {v[0], v[1], v[2]};
}

// ---- subcommands ----

int run_validate_kernels(const Config& cfg) {
  const XiLattice lat = cfg.build_lattice();
  const AssumptionReport rep = validate_assumptions(cfg.rho, cfg.nu, lat);
  const H1Report ha = check_h1(cfg.a, lat, CoefficientRole::symmetric);
  const H1Report hk = check_h1(cfg.kappa, lat, CoefficientRole::antisymmetric);
  ojson j;
  j["lattice"] = {{"n", lat.n()}, {"R", lat.radius()}, {"nodes", lat.size()}};
  j["l1_rho"] = rep.l1_rho;
  j["l1_nu"] = rep.l1_nu;
  j["coercivity_min"] = rep.coercivity_min;
  j["ratio_l2"] = rep.ratio_l2;
  j["tail_mass"] = rep.tail_mass;
  j["kernels_pass"] = rep.pass;
  j["kernels_message"] = rep.message;
  auto h1 = [](const H1Report& h) {
    return ojson{{"min_sample", h.min_sample}, {"max_sample", h.max_sample},
                 {"max_abs_sample", h.max_abs_sample}, {"symmetry_defect", h.symmetry_defect},
                 {"pass", h.pass}, {"message", h.message}};
  };
  j["a"] = h1(ha);
  j["kappa"] = h1(hk);
  const bool pass = rep.pass && ha.pass && hk.pass;
  j["pass"] = pass;
  const std::string text = j.dump(2) + "\n";
  if (cfg.output.json) write_text(output_path(cfg, "kernels", "json"), text);
  std::cout << "validate-kernels: " << (pass ? "pass" : "FAIL") << " (l1_rho " << format_double(rep.l1_rho)
            << ", ratio_l2 " << format_double(rep.ratio_l2) << ", min a " << format_double(ha.min_sample)
            << ")\n";
  if (!pass) std::cerr << rep.message << "\n" << ha.message << "\n" << hk.message << "\n";
  return pass ? 0 : kExitError;
}

int run_moments(const Config& cfg) {
  const XiLattice lat = cfg.build_lattice();
  enforce_h1(cfg.a, lat, CoefficientRole::symmetric);
  const Eigen::Matrix3d T = compute_Tbar(cfg.a, lat);
  const auto d = compute_dbar(cfg.kappa, lat);
  ojson j;
  j["n"] = lat.n();
  j["R"] = lat.radius();
  j["Tbar"] = matrix_row_major(T);
  j["dbar"] = ojson::array({vec_json(d[0]), vec_json(d[1]), vec_json(d[2])});
  const std::string text = j.dump(2) + "\n";
  if (cfg.output.json) write_text(output_path(cfg, "moments", "json"), text);
  std::cout << "moments: trace Tbar " << format_double(T.trace()) << ", |dbar| "
            << format_double(std::sqrt(d[0].squaredNorm() + d[1].squaredNorm() + d[2].squaredNorm())) << "\n";
  return 0;
}

struct CellSolveArgs {
  std::string mode = "a";
  std::vector<double> s{0, 0, 1};
  std::vector<double> A;
};

int run_cell_solve(const Config& cfg, const CellSolveArgs& args) {
  const CellInputs in = cfg.cell_inputs();
  enforce_h1(in.a, in.lattice, CoefficientRole::symmetric);
  CellProblem p{in.a, in.kappa, in.lattice, CellMode::corrector_a, Eigen::Vector3d::UnitZ(),
                Eigen::Matrix3d::Zero(), in.options};
  if (args.mode == "a") {
    p.mode = CellMode::corrector_a;
  } else if (args.mode == "kappa") {
    p.mode = CellMode::corrector_kappa;
  } else {
    p.mode = CellMode::direct;
    p.s = parse_vec3(args.s, "--s");
    if (args.A.size() != 9) throw InputError("--A needs 9 numbers (row-major)");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) p.A(i, k) = args.A[std::size_t(3 * i + k)];
  }
  const CellSolution sol = solve(p);
  ojson j{{"mode", args.mode}, {"energy", sol.energy}, {"residual", sol.residual},
          {"iterations", sol.iterations}, {"el_residual", sol.el_residual}};
  const std::string stem = "cell_" + args.mode;
  if (cfg.output.json) write_text(output_path(cfg, stem, "json"), j.dump(2) + "\n");
  if (cfg.output.csv) {
    std::ofstream out(output_path(cfg, stem, "csv"), std::ios::binary);
    write_field_csv(out, sol.v);
  }
  if (cfg.output.binary) save_field_binary(output_path(cfg, stem, "nlhf"), sol.v);
  std::cout << "cell-solve " << args.mode << ": energy " << format_double(sol.energy) << ", "
            << sol.iterations << " iterations, residual " << format_double(sol.residual) << "\n";
  return 0;
}

struct FhomArgs {
  int samples = 10;
  std::uint64_t seed = 0;
  double lambda = 1.0;
};

int run_fhom(const Config& cfg, const FhomArgs& args) {
  if (args.samples < 1) throw InputError("--samples must be positive");
  CellInputs in = cfg.cell_inputs();
  if (args.lambda != 1.0) {
    double tail = 0.0;
    in = scale_inputs(in, args.lambda, &tail);
    if (tail > 1e-6) std::cerr << "warning: lambda-scaled kernels lose tail mass " << tail << "\n";
  }
  enforce_h1(in.a, in.lattice, CoefficientRole::symmetric);
  const HomogenizedDensity H = build(in);
  Rng rng(args.seed);
  std::ostringstream csv;
  csv << "s1,s2,s3,A11,A12,A13,A21,A22,A23,A31,A32,A33,fhom_direct,fhom_decomposed,rel_diff\n";
  double worst = 0.0;
  for (int k = 0; k < args.samples; ++k) {
    const Eigen::Vector3d s = rng.unit_vector();
    const Eigen::Matrix3d A = rng.tangent_matrix(s);
    const double direct = fhom_direct(in, s, A);
    const double dec = fhom_decomposed(H, s, A);
    const double scale = std::max(std::abs(direct), std::abs(dec));
    const double rel = scale > 0.0 ? std::abs(direct - dec) / scale : 0.0;
    worst = std::max(worst, rel);
    for (int i = 0; i < 3; ++i) csv << format_double(s[i]) << ',';
    for (int i = 0; i < 3; ++i)
      for (int m = 0; m < 3; ++m) csv << format_double(A(i, m)) << ',';
    csv << format_double(direct) << ',' << format_double(dec) << ',' << format_double(rel) << '\n';
  }
  if (cfg.output.csv) write_text(output_path(cfg, "fhom", "csv"), csv.str());
  if (cfg.output.json) {
    ojson j;
    j["Tbar"] = matrix_row_major(H.Tbar);
    j["dbar"] = ojson::array({vec_json(H.dbar[0]), vec_json(H.dbar[1]), vec_json(H.dbar[2])});
    j["corrector_a"] = stats_json(H.stats_a);
    j["corrector_kappa"] = stats_json(H.stats_kappa);
    j["samples"] = args.samples;
    j["seed"] = args.seed;
    j["lambda"] = args.lambda;
    j["max_rel_diff"] = worst;
    write_text(output_path(cfg, "fhom", "json"), j.dump(2) + "\n");
  }
  std::cout << "fhom: " << args.samples << " samples, max rel_diff " << format_double(worst) << "\n";
  return 0;
}

int run_energy(const Config& cfg) {
  const CellInputs in = cfg.cell_inputs();
  enforce_h1(in.a, in.lattice, CoefficientRole::symmetric);
  const int M = cfg.macro_M(), P = cfg.macro_P();
  check_commensurate(M, in.lattice.n(), P);
  const double eps = 1.0 / double(P);
  const Magnetization m = sample(cfg.macro.magnetization, M);
  const EnergyBreakdown e = energy_eps(m, in, eps);
  const HomogenizedDensity H = build(in);
  const HomogenizedEnergy hom = energy_homogenized(m, H);
  ojson j{{"M", M},
          {"eps", eps},
          {"F_eps", e.F_eps},
          {"H_eps", e.H_eps},
          {"E_eps", e.total},
          {"pair_count", e.pair_count},
          {"dropped_fraction", e.dropped_fraction},
          {"E_hom", hom.value},
          {"projection_defect", hom.projection_defect}};
  if (!hom.warning.empty()) j["warning"] = hom.warning;
  if (cfg.output.json) write_text(output_path(cfg, "energy", "json"), j.dump(2) + "\n");
  if (cfg.output.binary) save_field_binary(output_path(cfg, "m0", "nlhf"), m.values);
  if (!hom.warning.empty()) std::cerr << "warning: " << hom.warning << "\n";
  std::cout << "energy: E_eps " << format_double(e.total) << " (F " << format_double(e.F_eps) << ", H "
            << format_double(e.H_eps) << "), E_hom " << format_double(hom.value) << "\n";
  return 0;
}

int run_gamma_sweep(const Config& cfg) {
  const Scenario sc = cfg.make_scenario();
  for (double eps : sc.eps_list) check_commensurate(sc.n * reciprocal(eps), sc.n, reciprocal(eps));
  enforce_h1(cfg.a, cfg.build_lattice(), CoefficientRole::symmetric);
  const SweepResult r = gamma_sweep(sc);
  if (cfg.output.csv) write_text(output_path(cfg, "sweep", "csv"), sweep_csv(r.rows));
  if (cfg.output.json) write_text(output_path(cfg, "sweep", "json"), reports_json({r.report}));
  std::cout << "gamma-sweep " << sc.name << ": " << (r.report.pass ? "pass" : "FAIL") << ", final recovery gap "
            << format_double(r.report.measured.at("final_recovery_gap")) << ", final plain gap "
            << format_double(r.report.measured.at("final_plain_gap")) << "\n";
  return r.report.pass ? 0 : kExitError;
}

int run_selftest(const Config& cfg) {
  const auto reports = selftest(cfg.setup(), cfg.verification);
  const std::string text = reports_json(reports);
  if (cfg.output.json) write_text(output_path(cfg, "selftest", "json"), text);
  int failed = 0;
  for (const auto& r : reports)
    if (!r.pass) ++failed;
  std::cout << "selftest: " << reports.size() - std::size_t(failed) << "/" << reports.size() << " checks pass\n";
  for (const auto& r : reports)
    if (!r.pass) std::cerr << "failed: " << r.name << "\n";
  return failed == 0 ? 0 : kExitError;
}

void print_error_chain(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << "\n";
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_error_chain(inner, depth + 1);
  } catch (...) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal micromagnetic homogenization: cell problems, homogenized density and checks"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", common.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", common.sets, "override a scalar field, e.g. --set lattice.n=4")->take_all();
  };

  auto* validate = app.add_subcommand("validate-kernels", "kernel and coefficient diagnostics");
  auto* moments = app.add_subcommand("moments", "coefficient-averaged moments Tbar and dbar");
  auto* cell = app.add_subcommand("cell-solve", "solve one cell problem");
  auto* fhom = app.add_subcommand("fhom", "sample the homogenized density by both methods");
  auto* energy = app.add_subcommand("energy", "nonlocal energy and homogenized energy of m0");
  auto* sweep = app.add_subcommand("gamma-sweep", "energies along a sequence of eps");
  auto* self = app.add_subcommand("selftest", "run the verification suite");
  for (auto* s : {validate, moments, cell, fhom, energy, sweep, self}) add_common(s);

  CellSolveArgs cell_args;
  cell->add_option("--mode", cell_args.mode, "a, kappa or direct")
      ->check(CLI::IsMember({"a", "kappa", "direct"}));
  cell->add_option("--s", cell_args.s, "unit vector s (direct mode)")->expected(3);
  cell->add_option("--A", cell_args.A, "row-major 3x3 A with A e_i . s = 0 (direct mode)")->expected(9);

  FhomArgs fhom_args;
  fhom->add_option("--samples", fhom_args.samples, "number of random (s, A) pairs");
  fhom->add_option("--seed", fhom_args.seed, "sampling seed");
  fhom->add_option("--lambda", fhom_args.lambda, "kernel scale (1 = unscaled)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return kExitUsage;
  }

  try {
    const Config cfg = load(common);
    if (validate->parsed()) return run_validate_kernels(cfg);
    if (moments->parsed()) return run_moments(cfg);
    if (cell->parsed()) return run_cell_solve(cfg, cell_args);
    if (fhom->parsed()) return run_fhom(cfg, fhom_args);
    if (energy->parsed()) return run_energy(cfg);
    if (sweep->parsed()) return run_gamma_sweep(cfg);
    if (self->parsed()) return run_selftest(cfg);
  } catch (const std::exception& e) {
    print_error_chain(e);
    return kExitError;
  }
  std::cerr << app.help();
  return kExitUsage;
}
