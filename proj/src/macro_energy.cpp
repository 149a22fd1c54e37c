#include "nlhom/macro_energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <sstream>

namespace nlhom {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Vector3d unit_or_throw(const Eigen::Vector3d& v, const char* what) {
  if (!v.allFinite() || v.norm() < 1e-12) throw InputError(std::string(what) + ": degenerate vector");
  return v.normalized();
}

}  // namespace

MagnetizationFamily MagnetizationFamily::constant(const Eigen::Vector3d& m) {
  MagnetizationFamily f;
  f.kind_ = Kind::constant;
  f.m_ = unit_or_throw(m, "constant magnetization");
  return f;
}

MagnetizationFamily MagnetizationFamily::helix(const Eigen::Vector3d& axis, double pitch) {
  if (!std::isfinite(pitch)) throw InputError("helix pitch must be finite");
  MagnetizationFamily f;
  f.kind_ = Kind::helix;
  f.axis_ = unit_or_throw(axis, "helix axis");
  const auto frame = tangent_frame<double>(f.axis_);
  f.t1_ = frame.t1;
  f.t2_ = frame.t2;
  f.pitch_ = pitch;
  return f;
}

MagnetizationFamily MagnetizationFamily::bloch_wall(const Eigen::Vector3d& normal, double center,
                                                    double width) {
  if (!(width > 0.0)) throw InputError("Bloch wall width must be positive");
  MagnetizationFamily f;
  f.kind_ = Kind::bloch_wall;
  f.axis_ = unit_or_throw(normal, "Bloch wall normal");
  const auto frame = tangent_frame<double>(f.axis_);
  f.t1_ = frame.t1;
  f.t2_ = frame.t2;
  f.center_ = center;
  f.width_ = width;
  return f;
}

MagnetizationFamily MagnetizationFamily::expression(const std::array<std::string, 3>& components) {
  MagnetizationFamily f;
  f.kind_ = Kind::expression;
  for (int k = 0; k < 3; ++k)
    f.exprs_[std::size_t(k)] = std::make_shared<const Expression>(Expression::parse(
        components[std::size_t(k)], kPositionVariables, "macro.magnetization.m" + std::to_string(k + 1)));
  return f;
}

Eigen::Vector3d MagnetizationFamily::value(const Eigen::Vector3d& x) const {
  switch (kind_) {
    case Kind::constant:
      return m_;
    case Kind::helix: {
      const double phase = kTwoPi * pitch_ * x.dot(axis_);
      return std::cos(phase) * t1_ + std::sin(phase) * t2_;
    }
    case Kind::bloch_wall: {
      const double theta = 2.0 * std::atan(std::exp((x.dot(axis_) - center_) / width_));
      return std::cos(theta) * t1_ + std::sin(theta) * t2_;
    }
    case Kind::expression: {
      Bindings b;
      b[Variable::x1] = x.x();
      b[Variable::x2] = x.y();
      b[Variable::x3] = x.z();
      Eigen::Vector3d v(exprs_[0]->evaluate(b), exprs_[1]->evaluate(b), exprs_[2]->evaluate(b));
      const double len = v.norm();
      if (!(len > 1e-12) || !std::isfinite(len))
        throw InputError("magnetization expression vanishes or is non-finite at a grid node");
      return v / len;
    }
  }
  return m_;
}

Eigen::Matrix3d MagnetizationFamily::gradient(const Eigen::Vector3d& x) const {
  switch (kind_) {
    case Kind::constant:
      return Eigen::Matrix3d::Zero();
    case Kind::helix: {
      const double phase = kTwoPi * pitch_ * x.dot(axis_);
      const Eigen::Vector3d dm = kTwoPi * pitch_ * (-std::sin(phase) * t1_ + std::cos(phase) * t2_);
      return dm * axis_.transpose();
    }
    case Kind::bloch_wall: {
      const double u = (x.dot(axis_) - center_) / width_;
      const double theta = 2.0 * std::atan(std::exp(u));
      const double dtheta = 1.0 / (std::cosh(u) * width_);
      const Eigen::Vector3d dm = dtheta * (-std::sin(theta) * t1_ + std::cos(theta) * t2_);
      return dm * axis_.transpose();
    }
    case Kind::expression:
      break;
  }
  throw InputError("expression magnetization has no closed-form gradient");
}

Eigen::Vector3d Magnetization::position(Index site) const {
  const Eigen::Vector3i i = values.coords(site);
  return (i.cast<double>().array() + 0.5) / double(M());
}

Eigen::Matrix3d Magnetization::gradient(Index site) const {
  if (family && family->has_gradient()) return family->gradient(position(site));
  const int M = this->M();
  if (M < 3) throw InputError("finite-difference gradient needs M >= 3");
  const Eigen::Vector3i i = values.coords(site);
  Eigen::Matrix3d G;
  for (int k = 0; k < 3; ++k) {
    auto at = [&](int ik) {
      Eigen::Vector3i c = i;
      c[k] = ik;
      return Eigen::Vector3d(values.vec(values.site(c.x(), c.y(), c.z())));
    };
    const int ik = i[k];
    if (ik == 0)
      G.col(k) = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * (double(M) / 2.0);
    else if (ik == M - 1)
      G.col(k) = (3.0 * at(M - 1) - 4.0 * at(M - 2) + at(M - 3)) * (double(M) / 2.0);
    else
      G.col(k) = (at(ik + 1) - at(ik - 1)) * (double(M) / 2.0);
  }
  return G;
}

Magnetization sample(const MagnetizationFamily& family, int M) {
  if (M < 1) throw InputError("magnetization grid needs M >= 1");
  Magnetization m;
  m.values = Field(M, 3);
  m.family = family;
  for (Index s = 0; s < m.values.sites(); ++s) m.values.vec(s) = family.value(m.position(s));
  return m;
}

Magnetization from_values(Field values) {
  if (values.components() != 3) throw InputError("magnetization needs 3 components");
  Magnetization m;
  m.values = std::move(values);
  const double defect = unit_defect(m);
  if (!(defect <= 1e-10)) {
    std::ostringstream msg;
    msg << "magnetization is not unit length (max | |m| - 1 | = " << defect << ")";
    throw InputError(msg.str());
  }
  return m;
}

double unit_defect(const Magnetization& m) {
  double d = 0.0;
  for (Index s = 0; s < m.values.sites(); ++s) d = std::max(d, std::abs(m.values.vec(s).norm() - 1.0));
  return d;
}

void check_commensurate(int M, int n, int P) {
  if (P < 1 || n < 1 || M != P * n) {
    std::ostringstream msg;
    msg << "grid sizes are not commensurate: need M = P * n with eps = 1/P, got M = " << M
        << ", n = " << n << ", P = " << P;
    throw CommensurabilityError("macro.M", msg.str());
  }
}

int reciprocal(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw CommensurabilityError("macro.eps", "eps must be positive");
  const double p = 1.0 / eps;
  const double r = std::round(p);
  if (r < 1.0 || std::abs(p - r) > 1e-9 * r)
    throw CommensurabilityError("macro.eps", "1/eps must be an integer");
  return int(r);
}

namespace {

struct MacroGrid {
  int M = 0, n = 0, P = 0;
  double eps = 0;
  std::vector<Index> cell;  ///< cell site of each Omega site
};

MacroGrid macro_grid(const Magnetization& m, const XiLattice& lattice, double eps) {
  MacroGrid g;
  g.M = m.M();
  g.n = lattice.n();
  g.P = reciprocal(eps);
  g.eps = 1.0 / double(g.P);
  check_commensurate(g.M, g.n, g.P);
  g.cell.resize(std::size_t(m.values.sites()));
  for (Index s = 0; s < m.values.sites(); ++s) {
    const Eigen::Vector3i i = m.values.coords(s);
    g.cell[std::size_t(s)] = (i.x() % g.n) + Index(g.n) * ((i.y() % g.n) + Index(g.n) * (i.z() % g.n));
  }
  return g;
}

/// Omega site reached by x + j, or -1 when it leaves Omega.
Index macro_target(const Field& f, Index s, const Eigen::Vector3i& j) {
  const Eigen::Vector3i i = f.coords(s) + j;
  const int M = f.n();
  if ((i.array() < 0).any() || (i.array() >= M).any()) return -1;
  return f.site(i.x(), i.y(), i.z());
}

double coefficient_pair(const CoefficientSpec& c, const MacroGrid& g, Index s, const Eigen::Vector3i& j) {
  if (c.is_constant()) return c.constant_value();
  const Index z = g.cell[std::size_t(s)];
  return c.at_nodes(z, shifted_site(z, j, g.n), g.n);
}

}  // namespace

EnergyBreakdown energy_eps(const Magnetization& m, const CellInputs& inputs, double eps) {
  const XiLattice& lat = inputs.lattice;
  const MacroGrid g = macro_grid(m, lat, eps);
  const std::size_t sites = std::size_t(m.values.sites());
  const double scale = lat.weight() / double(sites);
  const bool dmi = !(inputs.kappa.is_constant() && inputs.kappa.constant_value() == 0.0) &&
                   !lat.nu().is_zero();
  EnergyBreakdown out;
  out.F_eps = scale * deterministic_sum(lat.size() * sites, [&](std::size_t idx) {
    const std::size_t q = idx / sites;
    const Index s = Index(idx % sites);
    const Index t = macro_target(m.values, s, lat.offset(q));
    if (t < 0) return 0.0;
    const double d = g.eps * lat.norm(q);
    return coefficient_pair(inputs.a, g, s, lat.offset(q)) * lat.rho_value(q) *
           (m.values.vec(t) - m.values.vec(s)).squaredNorm() / (d * d);
  });
  if (dmi) {
    out.H_eps = scale * deterministic_sum(lat.size() * sites, [&](std::size_t idx) {
      const std::size_t q = idx / sites;
      const Index s = Index(idx % sites);
      const Index t = macro_target(m.values, s, lat.offset(q));
      if (t < 0) return 0.0;
      const double d = g.eps * lat.norm(q);
      return coefficient_pair(inputs.kappa, g, s, lat.offset(q)) *
             lat.nu_value(q).dot(Eigen::Vector3d(m.values.vec(t)).cross(Eigen::Vector3d(m.values.vec(s)))) / d;
    });
  }
  out.total = out.F_eps + out.H_eps;
  CompensatedSum<double> all, kept;
  for (std::size_t q = 0; q < lat.size(); ++q) {
    std::size_t count = 1;
    for (int k = 0; k < 3; ++k) count *= std::size_t(std::max(0, g.M - std::abs(lat.offset(q)[k])));
    out.pair_count += count;
    all += lat.rho_value(q);
    kept += lat.rho_value(q) * double(count) / double(sites);
  }
  out.dropped_fraction = all.value() > 0.0 ? 1.0 - kept.value() / all.value() : 0.0;
  return out;
}

double energy_F_eps(const Magnetization& m, const CellInputs& inputs, double eps) {
  CellInputs no_dmi = inputs;
  no_dmi.kappa = CoefficientSpec::constant(0.0);
  return energy_eps(m, no_dmi, eps).F_eps;
}

double energy_H_eps(const Magnetization& m, const CellInputs& inputs, double eps) {
  return energy_eps(m, inputs, eps).H_eps;
}

NodeFamily delta_rho_eps(const Magnetization& m, const CellInputs& inputs, double eps) {
  const XiLattice& lat = inputs.lattice;
  const MacroGrid g = macro_grid(m, lat, eps);
  NodeFamily out(g.M, 3, lat.size());
  parallel_for(lat.size(), [&](std::size_t q) {
    const double f = std::sqrt(lat.rho_value(q)) / (g.eps * lat.norm(q));
    for (Index s = 0; s < m.values.sites(); ++s) {
      const Index t = macro_target(m.values, s, lat.offset(q));
      if (t < 0) continue;
      for (int k = 0; k < 3; ++k) out(q, s, k) = f * (m.values(t, k) - m.values(s, k));
    }
  }, 1);
  return out;
}

double weighted_square_sum(const NodeFamily& delta, const CellInputs& inputs, double eps) {
  const XiLattice& lat = inputs.lattice;
  Magnetization shape;
  shape.values = Field(delta.n, 3);
  const MacroGrid g = macro_grid(shape, lat, eps);
  const std::size_t sites = std::size_t(delta.sites());
  return lat.weight() / double(sites) * deterministic_sum(lat.size() * sites, [&](std::size_t idx) {
    const std::size_t q = idx / sites;
    const Index s = Index(idx % sites);
    double sq = 0.0;
    for (int k = 0; k < 3; ++k) sq += delta(q, s, k) * delta(q, s, k);
    return sq == 0.0 ? 0.0 : coefficient_pair(inputs.a, g, s, lat.offset(q)) * sq;
  });
}

Eigen::Matrix3d tangent_gradient(const Eigen::Vector3d& m, const Eigen::Matrix3d& grad, double* defect) {
  const Eigen::Vector3d s = m.normalized();
  Eigen::Matrix3d G = grad;
  double d = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double normal = s.dot(grad.col(k));
    d = std::max(d, std::abs(normal));
    G.col(k) -= normal * s;
  }
  if (defect) *defect = d;
  return G;
}

CorrectorField::CorrectorField(const Magnetization& m0, const HomogenizedDensity& H)
    : m0_(&m0), H_(&H) {}

Field CorrectorField::at(Index site) const {
  const Eigen::Vector3d m = m0_->values.vec(site);
  return H_->corrector(m, tangent_gradient(m, m0_->gradient(site)));
}

Eigen::Vector3d CorrectorField::operator()(Index site, Index cell_site) const {
  const Eigen::Vector3d m = m0_->values.vec(site);
  const Eigen::Matrix3d G = tangent_gradient(m, m0_->gradient(site));
  return G * H_->v_a.vec(cell_site) + m.cross(Eigen::Vector3d(H_->v_kappa.vec(cell_site)));
}

double CorrectorField::tangency_defect() const {
  double d = 0.0;
  for (Index x = 0; x < m0_->values.sites(); ++x) {
    const Eigen::Vector3d m = m0_->values.vec(x);
    const Field w = at(x);
    for (Index z = 0; z < w.sites(); ++z) d = std::max(d, std::abs(w.vec(z).dot(m)));
  }
  return d;
}

Magnetization recovery_sequence(const Magnetization& m0, const CorrectorField& phi, double eps) {
  const int P = reciprocal(eps);
  const int n = phi.at(0).n();
  check_commensurate(m0.M(), n, P);
  Magnetization out;
  out.values = Field(m0.M(), 3);
  for (Index x = 0; x < m0.values.sites(); ++x) {
    const Eigen::Vector3i i = m0.values.coords(x);
    const Index z = (i.x() % n) + Index(n) * ((i.y() % n) + Index(n) * (i.z() % n));
    const Eigen::Vector3d w = phi(x, z);
    const Eigen::Vector3d u = Eigen::Vector3d(m0.values.vec(x)) + (1.0 / double(P)) * w;
    const double len = u.norm();
    if (!(len >= 0.5)) {
      std::ostringstream msg;
      msg << "recovery step too large: |m0 + eps phi| = " << len << " < 1/2 at Omega node ("
          << i.transpose() << ")";
      throw StepSizeError(msg.str());
    }
    // zero corrector: keep m0 bit for bit
    out.values.vec(x) = w.isZero(0.0) ? Eigen::Vector3d(m0.values.vec(x)) : Eigen::Vector3d(u / len);
  }
  return out;
}

HomogenizedEnergy energy_homogenized(const Magnetization& m0, const HomogenizedDensity& H, bool strict) {
  HomogenizedEnergy out;
  const Index sites = m0.values.sites();
  std::vector<double> f(static_cast<std::size_t>(sites));
  std::vector<double> defect(static_cast<std::size_t>(sites));
  parallel_for(std::size_t(sites), [&](std::size_t x) {
    const Eigen::Vector3d m = m0.values.vec(Index(x));
    const Eigen::Matrix3d G = tangent_gradient(m, m0.gradient(Index(x)), &defect[x]);
    f[x] = fhom_decomposed(H, m, G);
  });
  out.value = deterministic_sum(f.size(), [&](std::size_t x) { return f[x]; }) / double(sites);
  out.projection_defect = *std::max_element(defect.begin(), defect.end());
  if (out.projection_defect > 1e-3) {
    std::ostringstream msg;
    msg << "gradient columns leave the tangent plane by up to " << out.projection_defect;
    out.warning = msg.str();
    if (strict) throw DomainError("energy_homogenized: " + out.warning);
  }
  return out;
}

namespace {

using PointKey = std::array<double, 12>;

struct KeyLess {
  bool operator()(const PointKey& a, const PointKey& b) const {
    return std::memcmp(a.data(), b.data(), sizeof(PointKey)) < 0;
  }
};

PointKey point_key(const Eigen::Vector3d& m, const Eigen::Matrix3d& G) {
  PointKey k;
  for (int i = 0; i < 3; ++i) k[std::size_t(i)] = m[i];
  for (int i = 0; i < 9; ++i) k[std::size_t(3 + i)] = G.data()[i];
  return k;
}

/// Groups Omega sites by bit-identical (m, P_T grad m); returns the key of every site
/// and the distinct keys in first-seen order.
struct PointTable {
  std::vector<std::size_t> slot;  ///< per site, index into points
  std::vector<std::pair<Eigen::Vector3d, Eigen::Matrix3d>> points;
};

PointTable distinct_points(const Magnetization& m0) {
  PointTable t;
  std::map<PointKey, std::size_t, KeyLess> seen;
  t.slot.resize(std::size_t(m0.values.sites()));
  for (Index x = 0; x < m0.values.sites(); ++x) {
    const Eigen::Vector3d m = m0.values.vec(x);
    const Eigen::Matrix3d G = tangent_gradient(m, m0.gradient(x));
    const auto [it, fresh] = seen.emplace(point_key(m, G), t.points.size());
    if (fresh) t.points.emplace_back(m, G);
    t.slot[std::size_t(x)] = it->second;
  }
  return t;
}

/// F and H integrands of the two-scale energies at one (m, G) with cell field w.
std::pair<double, double> two_scale_point(const CellInputs& inputs, const Eigen::Vector3d& m,
                                          const Eigen::Matrix3d& G, const Field& w) {
  const XiLattice& lat = inputs.lattice;
  const int n = lat.n();
  const std::size_t sites = std::size_t(Index(n) * n * n);
  auto coef = [&](const CoefficientSpec& c, std::size_t q, Index s) {
    return c.is_constant() ? c.constant_value() : c.at_nodes(s, shifted_site(s, lat.offset(q), n), n);
  };
  const double scale = lat.weight() / double(sites);
  const double F = scale * deterministic_sum(lat.size() * sites, [&](std::size_t idx) {
    const std::size_t q = idx / sites;
    const Index s = Index(idx % sites);
    const Index t = shifted_site(s, lat.offset(q), n);
    const double r = lat.norm(q);
    const Eigen::Vector3d d = G * lat.xi(q) + (w.vec(t) - w.vec(s));
    return coef(inputs.a, q, s) * lat.rho_value(q) * d.squaredNorm() / (r * r);
  });
  double H = 0.0;
  if (!(inputs.kappa.is_constant() && inputs.kappa.constant_value() == 0.0)) {
    H = scale * deterministic_sum(lat.size() * sites, [&](std::size_t idx) {
      const std::size_t q = idx / sites;
      const Index s = Index(idx % sites);
      const Index t = shifted_site(s, lat.offset(q), n);
      const Eigen::Vector3d d = G * lat.xi(q) + (w.vec(t) - w.vec(s));
      return coef(inputs.kappa, q, s) * d.dot(m.cross(lat.nu_value(q))) / lat.norm(q);
    });
  }
  return {F, H};
}

template <typename PointValue>
std::vector<PointValue> evaluate_points(const PointTable& t,
                                        const std::function<PointValue(std::size_t)>& f) {
  std::vector<PointValue> out;
  out.reserve(t.points.size());
  for (std::size_t p = 0; p < t.points.size(); ++p) out.push_back(f(p));
  return out;
}

}  // namespace

TwoScaleEnergy energy_two_scale(const CorrectorField& w, const CellInputs& inputs) {
  const Magnetization& m0 = w.magnetization();
  const PointTable t = distinct_points(m0);
  std::vector<Index> representative(t.points.size(), -1);
  for (Index x = 0; x < m0.values.sites(); ++x)
    if (representative[t.slot[std::size_t(x)]] < 0) representative[t.slot[std::size_t(x)]] = x;
  const auto values = evaluate_points<std::pair<double, double>>(t, [&](std::size_t p) {
    return two_scale_point(inputs, t.points[p].first, t.points[p].second, w.at(representative[p]));
  });
  TwoScaleEnergy out;
  const std::size_t sites = t.slot.size();
  out.F = deterministic_sum(sites, [&](std::size_t x) { return values[t.slot[x]].first; }) / double(sites);
  out.H = deterministic_sum(sites, [&](std::size_t x) { return values[t.slot[x]].second; }) / double(sites);
  out.distinct_points = t.points.size();
  return out;
}

TwoScaleEnergy energy_two_scale_uncorrected(const Magnetization& m0, const CellInputs& inputs) {
  const PointTable t = distinct_points(m0);
  const Field zero(inputs.lattice.n(), 3);
  const auto values = evaluate_points<std::pair<double, double>>(t, [&](std::size_t p) {
    return two_scale_point(inputs, t.points[p].first, t.points[p].second, zero);
  });
  TwoScaleEnergy out;
  const std::size_t sites = t.slot.size();
  out.F = deterministic_sum(sites, [&](std::size_t x) { return values[t.slot[x]].first; }) / double(sites);
  out.H = deterministic_sum(sites, [&](std::size_t x) { return values[t.slot[x]].second; }) / double(sites);
  out.distinct_points = t.points.size();
  return out;
}

OmegaIntegral integrate_fhom_direct(const Magnetization& m0, const CellInputs& inputs) {
  const PointTable t = distinct_points(m0);
  const auto values = evaluate_points<double>(t, [&](std::size_t p) {
    return fhom_direct(inputs, t.points[p].first, t.points[p].second);
  });
  OmegaIntegral out;
  const std::size_t sites = t.slot.size();
  out.value = deterministic_sum(sites, [&](std::size_t x) { return values[t.slot[x]]; }) / double(sites);
  out.distinct_points = t.points.size();
  return out;
}

}  // namespace nlhom
