#pragma once

// Localizing kernels: the scalar kernel rho of the symmetric exchange term and
// the vector kernel nu of the antisymmetric (DMI) term.

#include <Eigen/Core>
#include <array>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "nlhom/expression.hpp"

namespace nlhom {

class XiLattice;

enum class NormalizationMode { analytic, quadrature };

/// Unnormalized radial profile p(r) shared by the built-in kernel families.
struct RadialProfile {
  enum class Kind { bump_quadratic, truncated_gaussian, indicator_shell };

  Kind kind = Kind::bump_quadratic;
  double radius = 1.0;   ///< bump radius; gaussian truncation (may be +inf)
  double sigma = 0.3;    ///< gaussian width
  double inner = 0.0;    ///< shell inner radius
  double outer = 1.0;    ///< shell outer radius

  double operator()(double r) const;
  /// Integral of p(|xi|) over R^3 in closed form.
  double mass() const;
  /// Radius beyond which p vanishes (+inf for an untruncated gaussian).
  double support() const;
  /// Radii where p jumps; used to split radial quadrature.
  std::array<double, 2> breakpoints() const;
};

/// Scalar kernel rho. Evaluates as c * lambda^-3 * p(xi / lambda).
class KernelSpec {
 public:
  enum class Family { bump_quadratic, truncated_gaussian, indicator_shell, expression };

  static KernelSpec bump_quadratic(double radius,
                                   NormalizationMode mode = NormalizationMode::analytic);
  static KernelSpec truncated_gaussian(double sigma,
                                       double truncation = std::numeric_limits<double>::infinity(),
                                       NormalizationMode mode = NormalizationMode::analytic);
  static KernelSpec indicator_shell(double inner, double outer,
                                    NormalizationMode mode = NormalizationMode::analytic);
  /// Expression in xi1..xi3, r; zero for |xi| > support. Analytic mode takes it as written.
  static KernelSpec expression(const std::string& source, double support,
                               NormalizationMode mode = NormalizationMode::quadrature);

  double operator()(const Eigen::Vector3d& xi) const;

  Family family() const noexcept { return family_; }
  NormalizationMode mode() const noexcept { return mode_; }
  bool radial() const noexcept { return family_ != Family::expression; }
  const RadialProfile& profile() const noexcept { return profile_; }
  double scale() const noexcept { return scale_; }
  double normalization() const noexcept { return constant_; }
  /// True once the normalization constant is final (always in analytic mode).
  bool resolved() const noexcept { return resolved_; }
  double support_radius() const;
  /// Radius r of the lower bound ess inf_{B_r} rho / |xi|^2 > 0.
  double coercivity_radius() const;
  void set_coercivity_radius(double r) { coercivity_radius_ = r; }

  /// Copy with a fixed normalization constant; marks the kernel resolved.
  KernelSpec with_normalization(double constant) const;

  /// Radial part c * lambda^-3 * p(r / lambda); radial families only.
  double radial_value(double r) const;

 private:
  Family family_ = Family::bump_quadratic;
  NormalizationMode mode_ = NormalizationMode::analytic;
  RadialProfile profile_;
  std::shared_ptr<const Expression> expr_;
  double expr_support_ = 1.0;
  double constant_ = 1.0;
  double scale_ = 1.0;
  bool resolved_ = true;
  std::optional<double> coercivity_radius_;

  friend KernelSpec scale_lambda(const KernelSpec&, double);
};

/// Vector kernel nu.
class VectorKernelSpec {
 public:
  enum class Family { axial, fixed_direction, expression };

  /// nu(xi) = xi/|xi| g(|xi|), g the normalized profile.
  static VectorKernelSpec axial(const RadialProfile& profile,
                                NormalizationMode mode = NormalizationMode::analytic);
  /// nu(xi) = e g(|xi|).
  static VectorKernelSpec fixed_direction(const Eigen::Vector3d& direction,
                                          const RadialProfile& profile,
                                          NormalizationMode mode = NormalizationMode::analytic);
  /// Three component expressions in xi1..xi3, r; zero for |xi| > support.
  static VectorKernelSpec expression(const std::array<std::string, 3>& components,
                                     double support,
                                     NormalizationMode mode = NormalizationMode::quadrature);
  /// nu = 0. Convenient when the DMI term is switched off.
  static VectorKernelSpec zero();

  Eigen::Vector3d operator()(const Eigen::Vector3d& xi) const;

  Family family() const noexcept { return family_; }
  NormalizationMode mode() const noexcept { return mode_; }
  bool radial() const noexcept { return family_ != Family::expression; }
  bool is_zero() const noexcept { return zero_; }
  const RadialProfile& profile() const noexcept { return profile_; }
  const Eigen::Vector3d& direction() const noexcept { return direction_; }
  double scale() const noexcept { return scale_; }
  double normalization() const noexcept { return constant_; }
  bool resolved() const noexcept { return resolved_; }
  double support_radius() const;
  VectorKernelSpec with_normalization(double constant) const;
  /// |nu| as a function of |xi|; radial families only.
  double radial_magnitude(double r) const;

 private:
  Family family_ = Family::axial;
  NormalizationMode mode_ = NormalizationMode::analytic;
  RadialProfile profile_;
  Eigen::Vector3d direction_ = Eigen::Vector3d::UnitX();
  std::array<std::shared_ptr<const Expression>, 3> exprs_;
  double expr_support_ = 1.0;
  double constant_ = 1.0;
  double scale_ = 1.0;
  bool resolved_ = true;
  bool zero_ = false;

  friend VectorKernelSpec scale_lambda(const VectorKernelSpec&, double);
};

double eval_rho(const KernelSpec& spec, const Eigen::Vector3d& xi);
Eigen::Vector3d eval_nu(const VectorKernelSpec& spec, const Eigen::Vector3d& xi);

/// rho_lambda(xi) = lambda^-3 rho(xi / lambda); throws InputError for lambda <= 0.
KernelSpec scale_lambda(const KernelSpec& spec, double lambda);
VectorKernelSpec scale_lambda(const VectorKernelSpec& spec, double lambda);

/// Continuum mass of rho inside B_radius (radius may be +inf). Radial families
/// use adaptive Gauss-Kronrod in r; expression kernels a midpoint rule with
/// `resolution` cells per axis on the support box.
double kernel_mass_within(const KernelSpec& spec, double radius, int resolution = 128);
/// Continuum L1 norm of |nu| inside B_radius.
double kernel_mass_within(const VectorKernelSpec& spec, double radius, int resolution = 128);

/// Smallest radius that holds all but `tail_tol` of the kernel's mass.
double mass_radius(const KernelSpec& spec, double tail_tol);
double mass_radius(const VectorKernelSpec& spec, double tail_tol);

struct AssumptionReport {
  double l1_rho = 0;          ///< lattice sum of rho
  double l1_nu = 0;           ///< lattice sum of |nu|
  double coercivity_min = 0;  ///< min rho/|xi|^2 over nodes in B_r
  double ratio_l2 = 0;        ///< (sum |nu|^2 / rho)^(1/2) over nodes with rho > 0
  double tail_mass_rho = 0;   ///< continuum mass of rho outside the lattice radius
  double tail_mass_nu = 0;
  double tail_mass = 0;       ///< max of the two
  bool pass = false;
  std::string message;
};

/// Lattice diagnostics for H2-H4. Throws H4Error when nu != 0 at a node with rho = 0.
AssumptionReport validate_assumptions(const KernelSpec& rho, const VectorKernelSpec& nu,
                                      const XiLattice& lattice);

}  // namespace nlhom
