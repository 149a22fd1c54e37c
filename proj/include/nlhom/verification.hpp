#pragma once

// Executable checks of the discrete identities and inequalities.

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nlhom/macro_energy.hpp"

namespace nlhom {

/// Portable generator: mt19937_64 with explicit conversions, so streams do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }  ///< [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();                        ///< Box-Muller
  Eigen::Vector3d unit_vector();
  /// Column-tangent matrix: A e_i in T_s S^2 with entries of order `scale`.
  Eigen::Matrix3d tangent_matrix(const Eigen::Vector3d& s, double scale = 1.0);
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Field random_field(Rng& rng, int n, int components);
NodeFamily random_family(Rng& rng, int n, int components, std::size_t nodes);
/// Refills `u` (reshaped if needed) with iid entries in [-1, 1).
void fill_random(Rng& rng, NodeFamily& u, int n, int components, std::size_t nodes);
/// iid directions on S^2 at every Omega node.
Magnetization random_magnetization(Rng& rng, int M);

struct CheckReport {
  std::string name;
  bool pass = false;
  std::map<std::string, double> measured;
  double tolerance = 0;
  std::uint64_t seed = 0;
  std::string note;
};

/// Kernels, coefficients and solver settings shared by the checks.
struct VerificationSetup {
  KernelSpec rho = KernelSpec::bump_quadratic(1.0, NormalizationMode::quadrature);
  VectorKernelSpec nu = VectorKernelSpec::axial(RadialProfile{}, NormalizationMode::quadrature);
  CoefficientSpec a = CoefficientSpec::constant(1.0);
  CoefficientSpec kappa = CoefficientSpec::constant(0.0);
  double radius = 1.0;
  SolverOptions options;

  XiLattice lattice(int n) const { return XiLattice::build(n, radius, rho, nu); }
  CellInputs inputs(int n) const;
};

/// One-mode microstructure used by the decomposition and sweep checks:
/// a = 1 + 0.5 cos(2 pi (z3 + z3')), kappa = 0.3 + 0.2 sin(2 pi (z3 + z3')).
VerificationSetup one_mode_setup();

/// Buffers reused across adjoint checks at the same grid size.
struct AdjointWorkspace {
  NodeFamily u, Sw;
};

CheckReport check_adjoint(const VerificationSetup& setup, std::uint64_t seed, int n);
CheckReport check_adjoint(const VerificationSetup& setup, std::uint64_t seed, int n, AdjointWorkspace& ws);

/// Smallest eigenvalue of the mean-zero restricted form norm_rho(w)^2 / |w|^2 (a = 1)
/// computed from the constant-coefficient Fourier symbol.
double poincare_symbol_eigenvalue(const XiLattice& lattice);

struct PoincareEstimate {
  double constant = 0;     ///< C_P = 1 / lambda_min
  double eigenvalue = 0;   ///< lambda_min
  double residual = 0;     ///< relative eigen-residual at exit
  int iterations = 0;
};

/// Inverse power iteration with CG inner solves on mean-zero scalar fields.
PoincareEstimate estimate_poincare(const XiLattice& lattice, std::uint64_t seed, double tol = 1e-8,
                                   int max_iterations = 500);

CheckReport check_poincare(const VerificationSetup& setup, std::uint64_t seed, int n, int samples);
CheckReport check_decomposition(const VerificationSetup& setup, std::uint64_t seed, int n, int draws);
CheckReport check_antisym_bound(const VerificationSetup& setup, std::uint64_t seed, int draws, int M,
                                double eps);

/// C = (1 / (2 a0)) |kappa|_inf^2 |nu / rho^(1/2)|^2 with a0, |kappa|_inf sampled on the lattice pairs.
double antisym_constant(const CellInputs& inputs);

struct Scenario {
  std::string name = "scenario";
  VerificationSetup setup;
  int n = 3;
  MagnetizationFamily magnetization = MagnetizationFamily::helix(Eigen::Vector3d::UnitZ());
  std::vector<double> eps_list{0.25, 0.125, 0.0625};
  std::optional<double> reference_energy;        ///< limit value; defaults to E(m0)
  std::optional<double> plain_gap_tolerance;     ///< bound on the final |E_eps(m0) - E_ref|
  std::optional<double> recovery_gap_tolerance;  ///< bound on the final |E_eps(m_eps) - E_ref|
};

struct SweepRow {
  double eps = 0;
  int M = 0;
  double F_eps = 0;
  double H_eps = 0;
  double E_eps_plain = 0;
  double E_eps_recovery = 0;
  double E_hom = 0;
  double dropped_fraction = 0;
};

struct SweepResult {
  CheckReport report;
  std::vector<SweepRow> rows;
  double reference = 0;
  double moment_energy = 0;  ///< uncorrected F(m0, 0) + H(m0, 0)
};

/// Runs E_eps(m0), E_eps(m_eps) and E(m0) for each eps with M = n / eps. Passes iff both gap
/// sequences are nonincreasing and the final gaps are within the scenario tolerances.
SweepResult gamma_sweep(const Scenario& scenario);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct SelftestOptions {
  std::uint64_t seed = 0;
  int n = 4;
  int draws = 3;
  int samples = 10;
  int M = 8;
  double eps = 0.5;
};

/// Runs the check suite; the JSON array holds names, flags, measured values, tolerances and seeds.
std::vector<CheckReport> selftest(const VerificationSetup& setup, const SelftestOptions& options);
std::string reports_json(const std::vector<CheckReport>& reports);

}  // namespace nlhom
