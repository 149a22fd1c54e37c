#pragma once

// Homogenized density f_hom(s, A): moment tensor, averaged DMI vectors,
// corrector cache, and direct / decomposed evaluation.

#include <Eigen/Core>
#include <array>
#include <string>

#include "nlhom/cell_solver.hpp"

namespace nlhom {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix12d = Eigen::Matrix<double, 12, 12>;

/// Everything a cell solve needs besides (s, A).
struct CellInputs {
  CoefficientSpec a = CoefficientSpec::constant(1.0);
  CoefficientSpec kappa = CoefficientSpec::constant(0.0);
  XiLattice lattice;
  SolverOptions options;
};

/// T = sum_q h^3 rho(xi_q) (xi_q/|xi_q| (x) xi_q/|xi_q|) n^-3 sum_z a(z, z + xi_q).
Eigen::Matrix3d compute_Tbar(const CoefficientSpec& a, const XiLattice& lattice);
/// d_i = sum_q h^3 (xi_q)_i / |xi_q| nu(xi_q) n^-3 sum_z kappa(z, z + xi_q).
std::array<Eigen::Vector3d, 3> compute_dbar(const CoefficientSpec& kappa, const XiLattice& lattice);

struct SolveStats {
  double residual = 0;
  int iterations = 0;
  double el_residual = 0;
  double energy = 0;
};

class HomogenizedDensity {
 public:
  Eigen::Matrix3d Tbar = Eigen::Matrix3d::Zero();
  std::array<Eigen::Vector3d, 3> dbar{};
  Field v_a;
  Field v_kappa;
  /// G(alpha, beta) = sum_q h^3 n^-3 sum_z a rho D f_alpha D f_beta / |xi|^2 over the scalar
  /// fields f = ((v_a)_1, (v_a)_2, (v_a)_3, (v_kappa)_1, (v_kappa)_2, (v_kappa)_3).
  Matrix6d gram = Matrix6d::Zero();
  /// Correction as a quadratic form in p = (A11, A12, ..., A33, s1, s2, s3).
  Matrix12d correction_form = Matrix12d::Zero();
  SolveStats stats_a;
  SolveStats stats_kappa;

  /// (A T) : A + sum_i s . (d_i x A e_i).
  double moment_part(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) const;
  /// Integral of a rho |D v_{s,A}|^2 / |xi|^2 with v_{s,A} = A v_a + s x v_kappa, from the Gram block.
  double correction(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) const;
  /// Same value through the 12 x 12 form.
  double correction_from_form(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) const;
  /// A v_a + s x v_kappa.
  Field corrector(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) const;
};

/// Throws DomainError unless |s| = 1 and every column of A is orthogonal to s (1e-8).
void require_tangent_pair(const Eigen::Vector3d& s, const Eigen::Matrix3d& A);

/// Solves both correctors and tabulates the cache.
HomogenizedDensity build(const CellInputs& inputs);

double fhom_decomposed(const HomogenizedDensity& H, const Eigen::Vector3d& s, const Eigen::Matrix3d& A);
double fhom_direct(const CellInputs& inputs, const Eigen::Vector3d& s, const Eigen::Matrix3d& A);

struct LambdaResult {
  double direct = 0;
  double decomposed = 0;
  double tail_mass = 0;  ///< continuum mass of the scaled kernels outside the lattice radius
  std::string warning;   ///< set when tail_mass > 1e-6
};

/// Inputs with both kernels replaced by their lambda-scaled versions on a lattice of
/// radius max(R, lambda R). lambda = 1 returns the inputs unchanged.
CellInputs scale_inputs(const CellInputs& inputs, double lambda, double* tail_mass = nullptr);
LambdaResult fhom_lambda(const CellInputs& inputs, double lambda, const Eigen::Vector3d& s,
                         const Eigen::Matrix3d& A);

}  // namespace nlhom
