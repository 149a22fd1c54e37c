#pragma once

// Energies on Omega = (0,1)^3 sampled at x = (i + 1/2) / M.
//
// With eps = 1/P and M = P n, eps xi_q = j_q / M is an exact shift on the
// Omega grid and the fast variable x/eps falls on cell index i mod n.

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>

#include "nlhom/homogenized_density.hpp"

namespace nlhom {

/// Analytic (or DSL) magnetization family m0 : Omega -> S^2.
class MagnetizationFamily {
 public:
  enum class Kind { constant, helix, bloch_wall, expression };

  static MagnetizationFamily constant(const Eigen::Vector3d& m);
  /// m = cos(2 pi p x.e) t1 + sin(2 pi p x.e) t2 with (t1, t2) the tangent frame of the axis e.
  static MagnetizationFamily helix(const Eigen::Vector3d& axis, double pitch = 1.0);
  /// theta = 2 atan(exp((x.e - c) / delta)), m = cos(theta) t1 + sin(theta) t2.
  static MagnetizationFamily bloch_wall(const Eigen::Vector3d& normal, double center = 0.5,
                                        double width = 0.1);
  /// Three expressions in x1..x3, normalized pointwise.
  static MagnetizationFamily expression(const std::array<std::string, 3>& components);

  Kind kind() const noexcept { return kind_; }
  bool has_gradient() const noexcept { return kind_ != Kind::expression; }
  Eigen::Vector3d value(const Eigen::Vector3d& x) const;
  /// Columns are the partial derivatives d m / d x_i.
  Eigen::Matrix3d gradient(const Eigen::Vector3d& x) const;

 private:
  Kind kind_ = Kind::constant;
  Eigen::Vector3d m_ = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d axis_ = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d t1_ = Eigen::Vector3d::UnitX(), t2_ = Eigen::Vector3d::UnitY();
  double pitch_ = 1.0, center_ = 0.5, width_ = 0.1;
  std::array<std::shared_ptr<const Expression>, 3> exprs_;
};

/// Unit vector field on the M^3 Omega grid (same layout as a PeriodicField with n = M).
struct Magnetization {
  Field values;
  std::optional<MagnetizationFamily> family;

  int M() const { return values.n(); }
  Eigen::Vector3d position(Index site) const;
  /// Analytic gradient when a family is attached, else central differences
  /// (one-sided second order at the faces).
  Eigen::Matrix3d gradient(Index site) const;
};

Magnetization sample(const MagnetizationFamily& family, int M);
/// Wraps raw values; throws InputError unless every | |m| - 1 | <= 1e-10.
Magnetization from_values(Field values);
/// Maximum of | |m(x)| - 1 |.
double unit_defect(const Magnetization& m);

/// Throws CommensurabilityError unless M = P n.
void check_commensurate(int M, int n, int P);
/// P from eps, requiring 1/eps to be an integer (within 1e-9).
int reciprocal(double eps);

struct EnergyBreakdown {
  double F_eps = 0;
  double H_eps = 0;
  double total = 0;
  std::size_t pair_count = 0;
  double dropped_fraction = 0;  ///< quadrature mass of pairs leaving Omega, relative to all pairs
};

EnergyBreakdown energy_eps(const Magnetization& m, const CellInputs& inputs, double eps);
double energy_F_eps(const Magnetization& m, const CellInputs& inputs, double eps);
double energy_H_eps(const Magnetization& m, const CellInputs& inputs, double eps);

/// Delta(x, xi_q) = 1_{Omega_{eps xi}}(x) rho^(1/2) (m(x + eps xi) - m(x)) / (eps |xi|),
/// tabulated as a NodeFamily over the Omega grid.
NodeFamily delta_rho_eps(const Magnetization& m, const CellInputs& inputs, double eps);
/// sum_q h^3 M^-3 sum_x a(x/eps, x/eps + xi_q) |Delta|^2; equals energy_F_eps.
double weighted_square_sum(const NodeFamily& delta, const CellInputs& inputs, double eps);

/// Gradient with every column projected onto T_m S^2, plus the projection defect.
Eigen::Matrix3d tangent_gradient(const Eigen::Vector3d& m, const Eigen::Matrix3d& grad,
                                 double* defect = nullptr);

/// w(x, z) = grad m0(x) v_a(z) + m0(x) x v_kappa(z), evaluated per Omega site.
class CorrectorField {
 public:
  CorrectorField(const Magnetization& m0, const HomogenizedDensity& H);
  /// Cell field z -> w(x, z) at Omega site x.
  Field at(Index site) const;
  /// w(x, z) at Omega site x and cell site z.
  Eigen::Vector3d operator()(Index site, Index cell_site) const;
  /// max over x, z of |w(x, z) . m0(x)|.
  double tangency_defect() const;
  const Magnetization& magnetization() const { return *m0_; }

 private:
  const Magnetization* m0_;
  const HomogenizedDensity* H_;
};

/// m_eps(x) = (m0 + eps phi(x, x/eps)) / |m0 + eps phi|; throws StepSizeError when the
/// unnormalized length drops below 1/2.
Magnetization recovery_sequence(const Magnetization& m0, const CorrectorField& phi, double eps);

struct HomogenizedEnergy {
  double value = 0;
  double projection_defect = 0;  ///< max normal component removed from grad m0
  std::string warning;
};

/// Midpoint rule of fhom_decomposed(m0, P_T grad m0) over Omega. Strict mode turns a
/// projection defect above 1e-3 into a DomainError.
HomogenizedEnergy energy_homogenized(const Magnetization& m0, const HomogenizedDensity& H,
                                     bool strict = false);

struct TwoScaleEnergy {
  double F = 0;
  double H = 0;
  std::size_t distinct_points = 0;  ///< (m, grad m) pairs actually evaluated
};

/// F(m, w) and H(m, w) by midpoint rule over (x, xi_q, z) with w the corrector field.
/// Sites sharing bit-identical (m, grad m) are evaluated once.
TwoScaleEnergy energy_two_scale(const CorrectorField& w, const CellInputs& inputs);
/// F(m, 0) and H(m, 0).
TwoScaleEnergy energy_two_scale_uncorrected(const Magnetization& m0, const CellInputs& inputs);

struct OmegaIntegral {
  double value = 0;
  std::size_t distinct_points = 0;
};

/// Midpoint rule of fhom_direct(m0, P_T grad m0) over Omega, memoized like energy_two_scale.
OmegaIntegral integrate_fhom_direct(const Magnetization& m0, const CellInputs& inputs);

}  // namespace nlhom
