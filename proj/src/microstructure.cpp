#include "nlhom/microstructure.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nlhom {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Vector3d wrap(const Eigen::Vector3d& z) {
  return {z.x() - std::floor(z.x()), z.y() - std::floor(z.y()), z.z() - std::floor(z.z())};
}

Bindings coefficient_bindings(const Eigen::Vector3d& z, const Eigen::Vector3d& zp) {
  Bindings b;
  b[Variable::z1] = z.x();
  b[Variable::z2] = z.y();
  b[Variable::z3] = z.z();
  b[Variable::zp1] = zp.x();
  b[Variable::zp2] = zp.y();
  b[Variable::zp3] = zp.z();
  return b;
}

Eigen::Vector3i site_coords(Index site, int n) {
  return {int(site % n), int((site / n) % n), int(site / (Index(n) * n))};
}

}  // namespace

CoefficientSpec CoefficientSpec::constant(double value) {
  if (!std::isfinite(value)) throw InputError("constant coefficient must be finite");
  CoefficientSpec c;
  c.kind_ = Kind::constant;
  c.mean_ = value;
  return c;
}

CoefficientSpec CoefficientSpec::separable(const std::string& f, const std::string& g) {
  CoefficientSpec c;
  c.kind_ = Kind::separable;
  c.f_ = std::make_shared<const Expression>(
      Expression::parse(f, kCoefficientVariables & 0x7, "coefficients.f"));
  c.g_ = std::make_shared<const Expression>(
      Expression::parse(g, kCoefficientVariables & 0x38, "coefficients.g"));
  return c;
}

CoefficientSpec CoefficientSpec::fourier(double mean, std::vector<FourierMode> modes) {
  CoefficientSpec c;
  c.kind_ = Kind::fourier;
  c.mean_ = mean;
  c.modes_ = std::move(modes);
  return c;
}

CoefficientSpec CoefficientSpec::expression(const std::string& source) {
  CoefficientSpec c;
  c.kind_ = Kind::expression;
  c.f_ = std::make_shared<const Expression>(
      Expression::parse(source, kCoefficientVariables, "coefficients.expression"));
  return c;
}

CoefficientSpec CoefficientSpec::scaled(double factor) const {
  CoefficientSpec c = *this;
  c.factor_ *= factor;
  if (kind_ == Kind::constant) {
    c.mean_ *= factor;
    c.factor_ = 1.0;
  }
  return c;
}

double CoefficientSpec::operator()(const Eigen::Vector3d& z_in, const Eigen::Vector3d& zp_in) const {
  if (kind_ == Kind::constant) return mean_;
  const Eigen::Vector3d z = wrap(z_in), zp = wrap(zp_in);
  switch (kind_) {
    case Kind::separable: {
      const Bindings b = coefficient_bindings(z, zp);
      return factor_ * f_->evaluate(b) * g_->evaluate(b);
    }
    case Kind::fourier: {
      double v = mean_;
      for (const auto& m : modes_) {
        const double phase = kTwoPi * (m.k.cast<double>().dot(z) + m.kp.cast<double>().dot(zp));
        v += m.cos_amp * std::cos(phase) + m.sin_amp * std::sin(phase);
      }
      return factor_ * v;
    }
    case Kind::expression:
      return factor_ * f_->evaluate(coefficient_bindings(z, zp));
    default:
      return mean_;
  }
}

double CoefficientSpec::at_nodes(Index site, Index site_p, int n) const {
  if (kind_ == Kind::constant) return mean_;
  const Eigen::Vector3i i = site_coords(site, n), ip = site_coords(site_p, n);
  if (kind_ == Kind::fourier) {
    // Integer phase reduction keeps node evaluation exactly periodic.
    double v = mean_;
    for (const auto& m : modes_) {
      const long long p = 1LL * m.k.dot(i) + 1LL * m.kp.dot(ip);
      const long long r = ((p % n) + n) % n;
      const double phase = kTwoPi * double(r) / double(n);
      v += m.cos_amp * std::cos(phase) + m.sin_amp * std::sin(phase);
    }
    return factor_ * v;
  }
  return (*this)(i.cast<double>() / double(n), ip.cast<double>() / double(n));
}

double eval_coeff(const CoefficientSpec& spec, const Eigen::Vector3d& z, const Eigen::Vector3d& zp) {
  return spec(z, zp);
}

H1Report check_h1(const CoefficientSpec& spec, const XiLattice& lattice, CoefficientRole role) {
  const int n = lattice.n();
  const Index sites = Index(n) * n * n;
  H1Report rep;
  rep.min_sample = std::numeric_limits<double>::infinity();
  rep.max_sample = -std::numeric_limits<double>::infinity();
  bool finite = true;
  for (std::size_t q = 0; q < lattice.size(); ++q) {
    const Eigen::Vector3i& j = lattice.offset(q);
    for (Index s = 0; s < sites; ++s) {
      const Index t = shifted_site(s, j, n);
      const double v = spec.at_nodes(s, t, n);
      if (!std::isfinite(v)) finite = false;
      const bool below = role == CoefficientRole::symmetric && v < spec.a0_declared;
      const bool above = std::abs(v) > spec.sup_bound;
      if ((below || above || !std::isfinite(v)) && rep.offending_site < 0) {
        rep.offending_site = s;
        rep.offending_offset = j;
      }
      rep.min_sample = std::min(rep.min_sample, v);
      rep.max_sample = std::max(rep.max_sample, v);
      rep.max_abs_sample = std::max(rep.max_abs_sample, std::abs(v));
      if (!spec.is_constant())
        rep.symmetry_defect = std::max(rep.symmetry_defect, std::abs(v - spec.at_nodes(t, s, n)));
    }
  }
  std::ostringstream msg;
  bool pass = finite;
  if (!finite) msg << spec.name << " has non-finite samples; ";
  if (role == CoefficientRole::symmetric) {
    if (!(spec.a0_declared > 0.0)) {
      pass = false;
      msg << spec.name << ": declared lower bound a0 must be positive; ";
    }
    if (rep.min_sample < spec.a0_declared) {
      pass = false;
      msg << spec.name << ": min sample " << rep.min_sample << " < a0 = " << spec.a0_declared
          << "; ";
    }
  }
  if (rep.max_abs_sample > spec.sup_bound) {
    pass = false;
    msg << spec.name << ": |sample| " << rep.max_abs_sample << " exceeds sup bound "
        << spec.sup_bound << "; ";
  }
  if (!pass && rep.offending_site >= 0) {
    const Eigen::Vector3i i = site_coords(rep.offending_site, n);
    msg << "offending pair z = (" << i.transpose() << ")/" << n << ", z' = z + ("
        << rep.offending_offset.transpose() << ")/" << n;
  }
  rep.pass = pass;
  rep.message = pass ? "ok" : msg.str();
  return rep;
}

H1Report enforce_h1(const CoefficientSpec& spec, const XiLattice& lattice, CoefficientRole role) {
  H1Report rep = check_h1(spec, lattice, role);
  if (!rep.pass) throw H1Error("H1 violated: " + rep.message);
  return rep;
}

double node_average(const CoefficientSpec& spec, const XiLattice& lattice, std::size_t q) {
  const int n = lattice.n();
  if (spec.is_constant()) return spec.constant_value();
  const Index sites = Index(n) * n * n;
  const Eigen::Vector3i& j = lattice.offset(q);
  CompensatedSum<double> acc;
  for (Index s = 0; s < sites; ++s) acc += spec.at_nodes(s, shifted_site(s, j, n), n);
  return acc.value() / double(sites);
}

AveragedKernels averaged_kernels(const CoefficientSpec& a, const CoefficientSpec& kappa,
                                 const XiLattice& lattice) {
  AveragedKernels out;
  const std::size_t nodes = lattice.size();
  out.a_mean.resize(nodes);
  out.kappa_mean.resize(nodes);
  out.rho_bar.resize(nodes);
  out.nu_bar.resize(nodes);
  parallel_for(nodes, [&](std::size_t q) {
    out.a_mean[q] = node_average(a, lattice, q);
    out.kappa_mean[q] = node_average(kappa, lattice, q);
    out.rho_bar[q] = lattice.rho_value(q) * out.a_mean[q];
    out.nu_bar[q] = lattice.nu_value(q) * out.kappa_mean[q];
  }, 16);
  return out;
}

}  // namespace nlhom
