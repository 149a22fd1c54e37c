#pragma once

// Discrete cell problems on the n^3 periodic grid.
//
// The discrete functional of every mode is
//   E(v) = sum_q h^3 n^-3 sum_z a rho |B xi + D_q v|^2 / |xi|^2 + kappa (B xi + D_q v) / |xi| . g(xi)
// with D_q v = v(z + j_q) - v(z). Modes differ in B and g:
//   corrector_a      B = I, g = 0
//   corrector_kappa  B = 0, g = nu
//   direct           B = A, g = s x nu, v tangent to s
// In grid coordinates E(v) = n^-3 (<Hv, v>/2 + <b, v>) + E(0), so the minimizer solves Hv = -b.

#include <Eigen/Core>
#include <vector>

#include "nlhom/microstructure.hpp"
#include "nlhom/periodic_cell.hpp"

namespace nlhom {

enum class CellMode { corrector_a, corrector_kappa, direct };

struct SolverOptions {
  double cg_tol = 1e-10;
  double max_iter_factor = 10.0;
  bool jacobi = false;              ///< diagonal preconditioner
  bool cache_coefficients = false;  ///< tabulate a(z, z + xi_q) once (nodes x n^3 doubles)
};

/// Hessian H v = 2 sum_q h^3 D_q^T (a rho / |xi|^2 . D_q v), applied per component.
class CellOperator {
 public:
  CellOperator(const CoefficientSpec& a, const XiLattice& lattice, bool cache = false);

  const XiLattice& lattice() const noexcept { return *lattice_; }
  const CoefficientSpec& coefficient() const noexcept { return a_; }
  int n() const noexcept { return lattice_->n(); }

  /// a(z, z + xi_q) rho(xi_q) / |xi_q|^2 at grid site z.
  double pair_weight(std::size_t q, Index site) const;

  Field apply(const Field& v) const;
  /// Diagonal of H (same for every component).
  Eigen::VectorXd diagonal() const;
  /// sum_q h^3 n^-3 sum_z a rho (D_q f_k)(D_q g_l) / |xi|^2 for scalar components f_k, g_l.
  double dirichlet_form(const Field& f, int k, const Field& g, int l) const;

 private:
  CoefficientSpec a_;
  const XiLattice* lattice_;
  std::vector<double> scale_;  ///< rho / |xi|^2 per node
  std::vector<double> cache_;  ///< nodes x sites, empty when uncached
};

struct CellProblem {
  CoefficientSpec a = CoefficientSpec::constant(1.0);
  CoefficientSpec kappa = CoefficientSpec::constant(0.0);
  XiLattice lattice;
  CellMode mode = CellMode::corrector_a;
  Eigen::Vector3d s = Eigen::Vector3d::UnitZ();
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  SolverOptions options;

  /// Throws DomainError when a column of A leaves T_s S^2, InputError on bad sizes.
  void validate() const;
};

struct CellSolution {
  Field v;  ///< 3 components, mean zero
  Field frame_coordinates;  ///< direct mode only: (V1, V2) with v = V1 t1 + V2 t2
  double energy = 0;
  double residual = 0;      ///< relative CG residual (max over components)
  int iterations = 0;
  double el_residual = 0;   ///< sup |Hv + b|
  std::vector<double> residual_history;
};

/// Statistics of a lockstep solve.
struct CgStats {
  double residual = 0;
  int iterations = 0;
  std::vector<double> history;
};

Field apply_hessian(const CellProblem& problem, const Field& v);
/// Right-hand side b; 3 components for correctors, 2 frame components in direct mode.
Field assemble_rhs(const CellProblem& problem);

/// Solves H x = -b for every component of b as an independent scalar CG, advanced in lockstep.
CgStats cg_solve_components(const CellOperator& op, const Field& b, const SolverOptions& options,
                            Field& x);

/// Corrector modes.
CellSolution cg_solve(const CellProblem& problem);
/// Direct mode in tangent-frame coordinates.
CellSolution solve_direct(const CellProblem& problem);
/// Dispatches on problem.mode.
CellSolution solve(const CellProblem& problem);

/// Discrete functional of the problem's mode at a 3-component field v.
double cell_energy(const CellProblem& problem, const Field& v);

}  // namespace nlhom
