#include "nlhom/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "nlhom/periodic_cell.hpp"

namespace nlhom {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;
// Relative slack on support radii so lattice nodes at |j|/n == R are inside.
constexpr double kSupportSlack = 1e-12;

void require_finite(const Eigen::Vector3d& xi) {
  if (!xi.allFinite()) throw InputError("kernel evaluated at a non-finite point");
}

bool inside(double r, double radius) { return r <= radius * (1.0 + kSupportSlack); }

Bindings kernel_bindings(const Eigen::Vector3d& xi) {
  Bindings b;
  b[Variable::xi1] = xi.x();
  b[Variable::xi2] = xi.y();
  b[Variable::xi3] = xi.z();
  b[Variable::r] = xi.norm();
  return b;
}

// 4 pi int_0^R r^2 f(r) dr, split at the discontinuities of f.
template <typename F>
double radial_integral(F&& f, double radius, std::array<double, 2> breaks) {
  using boost::math::quadrature::gauss_kronrod;
  std::vector<double> cuts{0.0};
  for (double b : breaks)
    if (b > 0.0 && b < radius && std::isfinite(b)) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(radius);
  double total = 0.0;
  auto integrand = [&](double r) { return r * r * f(r); };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1], 20, 1e-14);
  }
  return 4.0 * kPi * total;
}

// Midpoint rule over the cube [-S, S]^3 restricted to B_radius.
template <typename F>
double box_integral(F&& f, double support, double radius, int resolution) {
  const double h = 2.0 * support / resolution;
  CompensatedSum<double> acc;
  for (int k = 0; k < resolution; ++k)
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        const Eigen::Vector3d xi(-support + (i + 0.5) * h, -support + (j + 0.5) * h,
                                 -support + (k + 0.5) * h);
        if (xi.norm() <= radius) acc += f(xi);
      }
  return acc.value() * h * h * h;
}

template <typename Spec>
double bisect_mass_radius(const Spec& spec, double tail_tol) {
  const double total = kernel_mass_within(spec, kInf);
  if (total <= 0.0) return 0.0;
  double hi = 1.0;
  while (total - kernel_mass_within(spec, hi) > tail_tol * total) {
    hi *= 2.0;
    if (hi > 1e6) throw ConvergenceError("mass radius search diverged");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total - kernel_mass_within(spec, mid) > tail_tol * total)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

}  // namespace

// --- RadialProfile ---------------------------------------------------------

double RadialProfile::operator()(double r) const {
  switch (kind) {
    case Kind::bump_quadratic:
      return inside(r, radius) ? r * r : 0.0;
    case Kind::truncated_gaussian:
      return inside(r, radius) ? std::exp(-(r * r) / (sigma * sigma)) : 0.0;
    case Kind::indicator_shell:
      return (r >= inner && inside(r, outer)) ? 1.0 : 0.0;
  }
  return 0.0;
}

double RadialProfile::mass() const {
  switch (kind) {
    case Kind::bump_quadratic:
      return 4.0 * kPi * std::pow(radius, 5) / 5.0;
    case Kind::truncated_gaussian: {
      const double full = std::pow(kPi, 1.5) * sigma * sigma * sigma;
      if (!std::isfinite(radius)) return full;
      const double t = radius / sigma;
      return full * std::erf(t) - 2.0 * kPi * sigma * sigma * radius * std::exp(-t * t);
    }
    case Kind::indicator_shell:
      return 4.0 * kPi / 3.0 * (outer * outer * outer - inner * inner * inner);
  }
  return 0.0;
}

double RadialProfile::support() const {
  return kind == Kind::indicator_shell ? outer : radius;
}

std::array<double, 2> RadialProfile::breakpoints() const {
  if (kind == Kind::indicator_shell) return {inner, outer};
  return {radius, 0.0};
}

// --- KernelSpec ------------------------------------------------------------

KernelSpec KernelSpec::bump_quadratic(double radius, NormalizationMode mode) {
  if (!(radius > 0.0)) throw InputError("bump_quadratic radius must be positive");
  KernelSpec k;
  k.family_ = Family::bump_quadratic;
  k.profile_ = {RadialProfile::Kind::bump_quadratic, radius};
  k.mode_ = mode;
  k.constant_ = 1.0 / k.profile_.mass();
  k.resolved_ = mode == NormalizationMode::analytic;
  return k;
}

KernelSpec KernelSpec::truncated_gaussian(double sigma, double truncation, NormalizationMode mode) {
  if (!(sigma > 0.0) || !(truncation > 0.0))
    throw InputError("truncated_gaussian needs positive sigma and truncation radius");
  KernelSpec k;
  k.family_ = Family::truncated_gaussian;
  k.profile_ = {RadialProfile::Kind::truncated_gaussian, truncation, sigma};
  k.mode_ = mode;
  k.constant_ = 1.0 / k.profile_.mass();
  k.resolved_ = mode == NormalizationMode::analytic;
  return k;
}

KernelSpec KernelSpec::indicator_shell(double inner, double outer, NormalizationMode mode) {
  if (!(inner >= 0.0) || !(outer > inner))
    throw InputError("indicator_shell needs 0 <= inner < outer");
  KernelSpec k;
  k.family_ = Family::indicator_shell;
  k.profile_ = {RadialProfile::Kind::indicator_shell, outer, 0.3, inner, outer};
  k.mode_ = mode;
  k.constant_ = 1.0 / k.profile_.mass();
  k.resolved_ = mode == NormalizationMode::analytic;
  return k;
}

KernelSpec KernelSpec::expression(const std::string& source, double support,
                                  NormalizationMode mode) {
  if (!(support > 0.0) || !std::isfinite(support))
    throw InputError("expression kernel needs a finite positive support radius");
  KernelSpec k;
  k.family_ = Family::expression;
  k.expr_ = std::make_shared<const Expression>(
      Expression::parse(source, kKernelVariables, "kernels.rho.expression"));
  k.expr_support_ = support;
  k.mode_ = mode;
  k.constant_ = 1.0;
  k.resolved_ = mode == NormalizationMode::analytic;
  return k;
}

double KernelSpec::operator()(const Eigen::Vector3d& xi) const {
  require_finite(xi);
  const Eigen::Vector3d y = xi / scale_;
  const double factor = constant_ / (scale_ * scale_ * scale_);
  if (family_ == Family::expression) {
    if (!inside(y.norm(), expr_support_)) return 0.0;
    return factor * expr_->evaluate(kernel_bindings(y));
  }
  return factor * profile_(y.norm());
}

double KernelSpec::radial_value(double r) const {
  return constant_ / (scale_ * scale_ * scale_) * profile_(r / scale_);
}

double KernelSpec::support_radius() const {
  return scale_ * (family_ == Family::expression ? expr_support_ : profile_.support());
}

double KernelSpec::coercivity_radius() const {
  if (coercivity_radius_) return *coercivity_radius_ * scale_;
  const double s = support_radius();
  if (std::isfinite(s)) return s;
  return scale_ * profile_.sigma;
}

KernelSpec KernelSpec::with_normalization(double constant) const {
  KernelSpec k = *this;
  k.constant_ = constant;
  k.resolved_ = true;
  return k;
}

double eval_rho(const KernelSpec& spec, const Eigen::Vector3d& xi) { return spec(xi); }

KernelSpec scale_lambda(const KernelSpec& spec, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InputError("scale factor lambda must be positive and finite");
  KernelSpec k = spec;
  k.scale_ = spec.scale_ * lambda;
  return k;
}

// --- VectorKernelSpec ------------------------------------------------------

VectorKernelSpec VectorKernelSpec::axial(const RadialProfile& profile, NormalizationMode mode) {
  VectorKernelSpec k;
  k.family_ = Family::axial;
  k.profile_ = profile;
  k.mode_ = mode;
  k.constant_ = 1.0 / profile.mass();
  k.resolved_ = mode == NormalizationMode::analytic;
  return k;
}

VectorKernelSpec VectorKernelSpec::fixed_direction(const Eigen::Vector3d& direction,
                                                   const RadialProfile& profile,
                                                   NormalizationMode mode) {
  if (!direction.allFinite() || direction.norm() == 0.0)
    throw InputError("fixed_direction needs a nonzero direction");
  VectorKernelSpec k = axial(profile, mode);
  k.family_ = Family::fixed_direction;
  k.direction_ = direction.normalized();
  return k;
}

VectorKernelSpec VectorKernelSpec::expression(const std::array<std::string, 3>& components,
                                              double support, NormalizationMode mode) {
  if (!(support > 0.0) || !std::isfinite(support))
    throw InputError("expression kernel needs a finite positive support radius");
  VectorKernelSpec k;
  k.family_ = Family::expression;
  for (int c = 0; c < 3; ++c)
    k.exprs_[c] = std::make_shared<const Expression>(Expression::parse(
        components[c], kKernelVariables, "kernels.nu.components[" + std::to_string(c) + "]"));
  k.expr_support_ = support;
  k.mode_ = mode;
  k.constant_ = 1.0;
  k.resolved_ = mode == NormalizationMode::analytic;
  return k;
}

VectorKernelSpec VectorKernelSpec::zero() {
  VectorKernelSpec k;
  k.family_ = Family::fixed_direction;
  k.zero_ = true;
  k.constant_ = 0.0;
  k.profile_ = {RadialProfile::Kind::indicator_shell, 0.0, 0.3, 0.0, 0.0};
  return k;
}

Eigen::Vector3d VectorKernelSpec::operator()(const Eigen::Vector3d& xi) const {
  require_finite(xi);
  if (zero_) return Eigen::Vector3d::Zero();
  const Eigen::Vector3d y = xi / scale_;
  const double factor = constant_ / (scale_ * scale_ * scale_);
  const double r = y.norm();
  switch (family_) {
    case Family::axial:
      if (r == 0.0) return Eigen::Vector3d::Zero();
      return (factor * profile_(r) / r) * y;
    case Family::fixed_direction:
      return (factor * profile_(r)) * direction_;
    case Family::expression: {
      if (!inside(r, expr_support_)) return Eigen::Vector3d::Zero();
      const Bindings b = kernel_bindings(y);
      return factor * Eigen::Vector3d(exprs_[0]->evaluate(b), exprs_[1]->evaluate(b),
                                      exprs_[2]->evaluate(b));
    }
  }
  return Eigen::Vector3d::Zero();
}

double VectorKernelSpec::radial_magnitude(double r) const {
  if (zero_) return 0.0;
  return std::abs(constant_) / (scale_ * scale_ * scale_) * profile_(r / scale_);
}

double VectorKernelSpec::support_radius() const {
  if (zero_) return 0.0;
  return scale_ * (family_ == Family::expression ? expr_support_ : profile_.support());
}

VectorKernelSpec VectorKernelSpec::with_normalization(double constant) const {
  VectorKernelSpec k = *this;
  k.constant_ = constant;
  k.resolved_ = true;
  return k;
}

Eigen::Vector3d eval_nu(const VectorKernelSpec& spec, const Eigen::Vector3d& xi) {
  return spec(xi);
}

VectorKernelSpec scale_lambda(const VectorKernelSpec& spec, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InputError("scale factor lambda must be positive and finite");
  VectorKernelSpec k = spec;
  k.scale_ = spec.scale_ * lambda;
  return k;
}

// --- quadrature diagnostics ------------------------------------------------

double kernel_mass_within(const KernelSpec& spec, double radius, int resolution) {
  if (spec.radial()) {
    const double support = spec.support_radius();
    const double upper = std::min(radius, support);
    const auto br = spec.profile().breakpoints();
    return radial_integral([&](double r) { return spec.radial_value(r); }, upper,
                           {br[0] * spec.scale(), br[1] * spec.scale()});
  }
  const double support = spec.support_radius();
  return box_integral([&](const Eigen::Vector3d& xi) { return std::abs(spec(xi)); }, support,
                      std::min(radius, support), resolution);
}

double kernel_mass_within(const VectorKernelSpec& spec, double radius, int resolution) {
  if (spec.is_zero()) return 0.0;
  if (spec.radial()) {
    const double support = spec.support_radius();
    const double upper = std::min(radius, support);
    const auto br = spec.profile().breakpoints();
    return radial_integral([&](double r) { return spec.radial_magnitude(r); }, upper,
                           {br[0] * spec.scale(), br[1] * spec.scale()});
  }
  const double support = spec.support_radius();
  return box_integral([&](const Eigen::Vector3d& xi) { return spec(xi).norm(); }, support,
                      std::min(radius, support), resolution);
}

double mass_radius(const KernelSpec& spec, double tail_tol) {
  const double s = spec.support_radius();
  if (std::isfinite(s)) return s;
  return bisect_mass_radius(spec, tail_tol);
}

double mass_radius(const VectorKernelSpec& spec, double tail_tol) {
  const double s = spec.support_radius();
  if (std::isfinite(s)) return s;
  return bisect_mass_radius(spec, tail_tol);
}

AssumptionReport validate_assumptions(const KernelSpec& rho_in, const VectorKernelSpec& nu_in,
                                      const XiLattice& lattice) {
  const KernelSpec& rho = rho_in.resolved() ? rho_in : lattice.rho();
  const VectorKernelSpec& nu = nu_in.resolved() ? nu_in : lattice.nu();
  const double h3 = lattice.weight();
  const double r_coercive = rho.coercivity_radius();

  CompensatedSum<double> l1_rho, l1_nu, ratio;
  double coercivity_min = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < lattice.size(); ++q) {
    const Eigen::Vector3d& xi = lattice.xi(q);
    const double r = lattice.norm(q);
    const double rv = rho(xi);
    const Eigen::Vector3d nv = nu(xi);
    if (rv < 0.0) {
      std::ostringstream os;
      os << "rho is negative at lattice node " << lattice.offset(q).transpose();
      throw InputError(os.str());
    }
    l1_rho += h3 * rv;
    l1_nu += h3 * nv.norm();
    if (r <= r_coercive * (1.0 + kSupportSlack)) coercivity_min = std::min(coercivity_min, rv / (r * r));
    if (rv > 0.0) {
      ratio += h3 * nv.squaredNorm() / rv;
    } else if (nv.norm() > 0.0) {
      std::ostringstream os;
      os << "H4 violated: nu != 0 where rho = 0 at lattice node j = ("
         << lattice.offset(q).transpose() << "), ratio nu/rho^(1/2) undefined";
      throw H4Error(os.str());
    }
  }

  AssumptionReport rep;
  rep.l1_rho = l1_rho.value();
  rep.l1_nu = l1_nu.value();
  rep.coercivity_min = std::isfinite(coercivity_min) ? coercivity_min : 0.0;
  rep.ratio_l2 = std::sqrt(ratio.value());
  rep.tail_mass_rho =
      std::max(0.0, kernel_mass_within(rho, kInf) - kernel_mass_within(rho, lattice.radius()));
  rep.tail_mass_nu =
      std::max(0.0, kernel_mass_within(nu, kInf) - kernel_mass_within(nu, lattice.radius()));
  rep.tail_mass = std::max(rep.tail_mass_rho, rep.tail_mass_nu);

  std::ostringstream msg;
  bool pass = true;
  if (std::abs(rep.l1_rho - 1.0) > 1e-3) {
    pass = false;
    msg << "lattice L1 of rho = " << rep.l1_rho << " deviates from 1 by more than 1e-3; ";
  }
  if (!nu.is_zero() && std::abs(rep.l1_nu - 1.0) > 1e-3) {
    pass = false;
    msg << "lattice L1 of nu = " << rep.l1_nu << " deviates from 1 by more than 1e-3; ";
  }
  if (!(rep.coercivity_min > 0.0)) {
    pass = false;
    msg << "rho/|xi|^2 is not bounded below on B_r, r = " << r_coercive << "; ";
  }
  if (!std::isfinite(rep.ratio_l2)) {
    pass = false;
    msg << "ratio norm |nu/rho^(1/2)| is not finite; ";
  }
  rep.pass = pass;
  rep.message = pass ? "ok" : msg.str();
  return rep;
}

}  // namespace nlhom
