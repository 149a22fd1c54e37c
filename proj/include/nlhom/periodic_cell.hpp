#pragma once

// Periodic unit cell Q = [0,1)^3 sampled at z = i/n, the commensurate
// xi-lattice {j/n : 0 < |j|/n <= R}, exact cyclic shifts, the difference
// operator S_rho with its adjoint, and tangent frames of S^2.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nlhom/errors.hpp"
#include "nlhom/kernels.hpp"
#include "nlhom/parallel.hpp"

namespace nlhom {

using Index = Eigen::Index;

/// c-component field on the n^3 periodic grid.
/// Layout: data[comp + c * (i1 + n * (i2 + n * i3))].
template <typename Scalar>
class PeriodicField {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  PeriodicField() = default;
  PeriodicField(int n, int components)
      : n_(n), c_(components), data_(Vector::Zero(Index(components) * n * n * n)) {
    if (n < 1 || components < 1) throw InputError("field needs n >= 1 and at least one component");
  }
  PeriodicField(int n, int components, Vector data) : n_(n), c_(components), data_(std::move(data)) {
    if (data_.size() != Index(components) * n * n * n)
      throw InputError("field payload size does not match n^3 * components");
  }

  static PeriodicField constant(int n, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& value) {
    PeriodicField f(n, int(value.size()));
    for (Index s = 0; s < f.sites(); ++s) f.data_.segment(s * f.c_, f.c_) = value;
    return f;
  }

  int n() const noexcept { return n_; }
  int components() const noexcept { return c_; }
  Index sites() const noexcept { return Index(n_) * n_ * n_; }
  Index size() const noexcept { return data_.size(); }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }

  Scalar& operator()(Index site, int comp) { return data_[comp + c_ * site]; }
  Scalar operator()(Index site, int comp) const { return data_[comp + c_ * site]; }

  /// All components at a site (c == 3 only).
  Eigen::Map<Eigen::Matrix<Scalar, 3, 1>> vec(Index site) {
    return Eigen::Map<Eigen::Matrix<Scalar, 3, 1>>(data_.data() + 3 * site);
  }
  Eigen::Map<const Eigen::Matrix<Scalar, 3, 1>> vec(Index site) const {
    return Eigen::Map<const Eigen::Matrix<Scalar, 3, 1>>(data_.data() + 3 * site);
  }

  Index site(int i1, int i2, int i3) const { return i1 + Index(n_) * (i2 + Index(n_) * i3); }
  Eigen::Vector3i coords(Index site) const {
    return {int(site % n_), int((site / n_) % n_), int(site / (Index(n_) * n_))};
  }

  /// Single component as a c = 1 field.
  PeriodicField component(int comp) const {
    PeriodicField out(n_, 1);
    for (Index s = 0; s < sites(); ++s) out.data_[s] = (*this)(s, comp);
    return out;
  }
  void set_component(int comp, const PeriodicField& scalar) {
    for (Index s = 0; s < sites(); ++s) (*this)(s, comp) = scalar.data_[s];
  }

  bool mean_zero = false;  ///< tag: per-component mean known to vanish

 private:
  int n_ = 0;
  int c_ = 0;
  Vector data_;
};

using Field = PeriodicField<double>;

inline int wrap_index(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

/// Site reached from `site` by adding the integer offset j (mod n).
inline Index shifted_site(Index site, const Eigen::Vector3i& j, int n) {
  const int i1 = int(site % n), i2 = int((site / n) % n), i3 = int(site / (Index(n) * n));
  return wrap_index(i1 + j.x(), n) + Index(n) * (wrap_index(i2 + j.y(), n) + Index(n) * wrap_index(i3 + j.z(), n));
}

/// (shift f)(i) = f((i + j) mod n), exact.
template <typename Scalar>
PeriodicField<Scalar> shift(const PeriodicField<Scalar>& f, const Eigen::Vector3i& j) {
  PeriodicField<Scalar> out(f.n(), f.components());
  const int c = f.components();
  for (Index s = 0; s < f.sites(); ++s) {
    const Index t = shifted_site(s, j, f.n());
    out.data().segment(s * c, c) = f.data().segment(t * c, c);
  }
  out.mean_zero = f.mean_zero;
  return out;
}

/// Per-component grid mean, order-fixed compensated sum.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean(const PeriodicField<Scalar>& f) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m(f.components());
  for (int k = 0; k < f.components(); ++k)
    m[k] = deterministic_sum(std::size_t(f.sites()), [&](std::size_t s) { return f(Index(s), k); }) /
           Scalar(f.sites());
  return m;
}

template <typename Scalar>
PeriodicField<Scalar> project_mean_zero(PeriodicField<Scalar> f) {
  const auto m = mean(f);
  for (Index s = 0; s < f.sites(); ++s)
    for (int k = 0; k < f.components(); ++k) f(s, k) -= m[k];
  f.mean_zero = true;
  return f;
}

/// <f, g> = n^-3 sum_z f(z) . g(z).
template <typename Scalar>
Scalar inner(const PeriodicField<Scalar>& f, const PeriodicField<Scalar>& g) {
  const int c = f.components();
  return deterministic_sum(std::size_t(f.sites()), [&](std::size_t s) {
           return f.data().segment(Index(s) * c, c).dot(g.data().segment(Index(s) * c, c));
         }) /
         Scalar(f.sites());
}

template <typename Scalar>
Scalar l2_norm(const PeriodicField<Scalar>& f) {
  return std::sqrt(inner(f, f));
}

/// Orthonormal basis {t1, t2} of the tangent plane at s, with det[t1 t2 s] = +1.
template <typename Scalar>
struct TangentFrame {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  Vec3 s, t1, t2;

  Vec3 from_frame(Scalar a, Scalar b) const { return a * t1 + b * t2; }
};

/// Deterministic frame: t1 comes from the coordinate axis least aligned with s.
template <typename Scalar>
TangentFrame<Scalar> tangent_frame(const Eigen::Matrix<Scalar, 3, 1>& s_in) {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  if (!s_in.allFinite()) throw InputError("tangent_frame: non-finite direction");
  const Scalar len = s_in.norm();
  if (len < Scalar(1e-8)) throw InputError("tangent_frame: degenerate direction |s| < 1e-8");
  if (std::abs(len - Scalar(1)) > Scalar(1e-8))
    throw DomainError("tangent_frame: s is not a unit vector (| |s| - 1 | > 1e-8)");
  TangentFrame<Scalar> f;
  f.s = s_in / len;
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(f.s[i]) < std::abs(f.s[k])) k = i;
  const Vec3 e = Vec3::Unit(k);
  f.t1 = (e - f.s.dot(e) * f.s).normalized();
  f.t2 = f.s.cross(f.t1);
  return f;
}

/// Quadrature lattice for the xi-integrals: nodes j/n with 0 < |j|/n <= R,
/// each carrying weight n^-3, plus cached kernel values.
class XiLattice {
 public:
  /// Builds nodes and resolves quadrature-mode kernel normalizations on them.
  static XiLattice build(int n, double radius, const KernelSpec& rho, const VectorKernelSpec& nu);

  int n() const noexcept { return n_; }
  double radius() const noexcept { return radius_; }
  double weight() const noexcept { return weight_; }
  /// Volume of the excluded xi = 0 cell.
  double omitted_volume() const noexcept { return weight_; }
  std::size_t size() const noexcept { return offsets_.size(); }

  const Eigen::Vector3i& offset(std::size_t q) const { return offsets_[q]; }
  const Eigen::Vector3d& xi(std::size_t q) const { return xi_[q]; }
  double norm(std::size_t q) const { return norm_[q]; }
  double rho_value(std::size_t q) const { return rho_[q]; }
  const Eigen::Vector3d& nu_value(std::size_t q) const { return nu_[q]; }
  /// Offset reduced mod n is zero: the shift is the identity.
  bool trivial_shift(std::size_t q) const { return trivial_[q]; }

  const KernelSpec& rho() const noexcept { return rho_spec_; }
  const VectorKernelSpec& nu() const noexcept { return nu_spec_; }

 private:
  int n_ = 0;
  double radius_ = 0;
  double weight_ = 0;
  std::vector<Eigen::Vector3i> offsets_;
  std::vector<Eigen::Vector3d> xi_;
  std::vector<double> norm_;
  std::vector<double> rho_;
  std::vector<Eigen::Vector3d> nu_;
  std::vector<std::uint8_t> trivial_;
  KernelSpec rho_spec_;
  VectorKernelSpec nu_spec_;
};

/// Default truncation radius: kernel support when compact, else the radius
/// holding all but tail_tol of the mass.
double default_lattice_radius(const KernelSpec& rho, const VectorKernelSpec& nu,
                              double tail_tol = 1e-8);

/// Field family u(xi_q, z) over lattice nodes, c components per (node, site).
/// Layout: data[comp + c * (site + sites * q)].
struct NodeFamily {
  int n = 0;
  int components = 0;
  std::size_t nodes = 0;
  Eigen::VectorXd data;

  NodeFamily() = default;
  NodeFamily(int n_, int c_, std::size_t nodes_)
      : n(n_), components(c_), nodes(nodes_),
        data(Eigen::VectorXd::Zero(Index(nodes_) * n_ * n_ * n_ * c_)) {}
  /// Storage left uninitialized; the caller writes every entry.
  static NodeFamily uninitialized(int n_, int c_, std::size_t nodes_) {
    NodeFamily u;
    u.n = n_;
    u.components = c_;
    u.nodes = nodes_;
    u.data.resize(Index(nodes_) * n_ * n_ * n_ * c_);
    return u;
  }
  Index sites() const { return Index(n) * n * n; }
  double& operator()(std::size_t q, Index site, int comp) {
    return data[comp + components * (site + sites() * Index(q))];
  }
  double operator()(std::size_t q, Index site, int comp) const {
    return data[comp + components * (site + sites() * Index(q))];
  }
};

/// u(xi_q, z) = rho(xi_q)^(1/2) (w(z + xi_q) - w(z)) / |xi_q|.
NodeFamily s_rho_apply(const Field& w, const XiLattice& lattice);
/// Same, writing into `out` (reshaped if needed) to reuse its storage.
void s_rho_apply(const Field& w, const XiLattice& lattice, NodeFamily& out);

/// S*(u)(z) = sum_q h^3 rho(xi_q)^(1/2) (u(xi_q, z - xi_q) - u(xi_q, z)) / |xi_q|.
Field s_rho_adjoint_apply(const NodeFamily& u, const XiLattice& lattice);

/// <u, v> = sum_q h^3 n^-3 sum_z u . v.
double inner(const NodeFamily& u, const NodeFamily& v, const XiLattice& lattice);

/// (sum_q h^3 n^-3 sum_z rho |w(z + xi_q) - w(z)|^2 / |xi_q|^2)^(1/2).
double norm_rho(const Field& w, const XiLattice& lattice);
/// Square of norm_rho without the final square root; the same sum as inner(S w, S w).
double norm_rho_squared(const Field& w, const XiLattice& lattice);

}  // namespace nlhom
