#pragma once

// Experiment configuration: one JSON file per run.
//
// {
//   "kernels":      {"rho": {...}, "nu": {...}},
//   "coefficients": {"a": {...}, "kappa": {...}},
//   "lattice":      {"n": 8, "R": <kernel support>, "tail_tol": 1e-8},
//   "macro":        {"M": 32, "P": [4] | "eps": [0.25], "magnetization": {...}},
//   "solver":       {"cg_tol": 1e-10, "max_iter_factor": 10, "jacobi": false, "cache": false},
//   "output":       {"directory": ".", "prefix": "nlhom", "formats": ["json", "csv"]},
//   "verification": {"seed": 0, "n": 4, "draws": 3, "samples": 10, "M": 8, "eps": 0.5},
//   "scenario":     {"name": ..., "reference_energy": ..., "plain_gap_tolerance": ...,
//                    "recovery_gap_tolerance": ...}
// }
//
// Every section is optional. Unknown keys are rejected. See README for the
// per-family fields.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nlhom/verification.hpp"

namespace nlhom {

struct LatticeConfig {
  int n = 8;
  std::optional<double> radius;  ///< defaults to the radius holding all but tail_tol of the kernel mass
  double tail_tol = 1e-8;
};

struct MacroConfig {
  std::optional<int> M;
  std::vector<int> P;  ///< 1/eps values; M = P n for each
  MagnetizationFamily magnetization = MagnetizationFamily::helix(Eigen::Vector3d::UnitZ());
};

struct OutputConfig {
  std::string directory = ".";
  std::string prefix = "nlhom";
  bool json = true;
  bool csv = true;
  bool binary = false;
};

struct ScenarioConfig {
  std::string name = "config";
  std::optional<double> reference_energy;
  std::optional<double> plain_gap_tolerance;
  std::optional<double> recovery_gap_tolerance;
};

struct Config {
  KernelSpec rho = KernelSpec::bump_quadratic(1.0);
  VectorKernelSpec nu = VectorKernelSpec::axial(RadialProfile{});
  CoefficientSpec a = CoefficientSpec::constant(1.0);
  CoefficientSpec kappa = CoefficientSpec::constant(0.0);
  LatticeConfig lattice;
  MacroConfig macro;
  SolverOptions solver;
  OutputConfig output;
  SelftestOptions verification;
  ScenarioConfig scenario;

  double lattice_radius() const;
  XiLattice build_lattice() const;
  CellInputs cell_inputs() const;
  VerificationSetup setup() const;
  Scenario make_scenario() const;
  /// Macro grid size for P[i] (or the single configured M).
  int macro_M(std::size_t i = 0) const;
  int macro_P(std::size_t i = 0) const;
};

/// Scalar override "section.key=value" applied to the JSON text before validation.
using Override = std::pair<std::string, std::string>;

/// Throws ConfigError naming the field, CommensurabilityError, or ExpressionError with a span.
Config parse_config(std::string_view text, const std::vector<Override>& overrides = {});
Config load_config(const std::string& path, const std::vector<Override>& overrides = {});

}  // namespace nlhom
