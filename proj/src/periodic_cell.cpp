#include "nlhom/periodic_cell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace nlhom {

double default_lattice_radius(const KernelSpec& rho, const VectorKernelSpec& nu, double tail_tol) {
  double r = mass_radius(rho, tail_tol);
  if (!nu.is_zero()) r = std::max(r, mass_radius(nu, tail_tol));
  return r;
}

XiLattice XiLattice::build(int n, double radius, const KernelSpec& rho,
                           const VectorKernelSpec& nu) {
  if (n < 1) throw InputError("lattice needs n >= 1");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw InputError("lattice radius must be positive and finite");
  XiLattice lat;
  lat.n_ = n;
  lat.radius_ = radius;
  lat.weight_ = 1.0 / (double(n) * n * n);

  const double reach = radius * n;
  const int jmax = int(std::floor(reach * (1.0 + 1e-12)));
  const double reach2 = reach * reach * (1.0 + 1e-12);
  for (int j3 = -jmax; j3 <= jmax; ++j3)
    for (int j2 = -jmax; j2 <= jmax; ++j2)
      for (int j1 = -jmax; j1 <= jmax; ++j1) {
        const long long sq = 1LL * j1 * j1 + 1LL * j2 * j2 + 1LL * j3 * j3;
        if (sq == 0 || double(sq) > reach2) continue;
        const Eigen::Vector3i j(j1, j2, j3);
        lat.offsets_.push_back(j);
        lat.xi_.push_back(j.cast<double>() / double(n));
        lat.norm_.push_back(std::sqrt(double(sq)) / double(n));
        lat.trivial_.push_back(j1 % n == 0 && j2 % n == 0 && j3 % n == 0);
      }

  lat.rho_spec_ = rho;
  lat.nu_spec_ = nu;
  if (!rho.resolved()) {
    CompensatedSum<double> acc;
    for (const auto& xi : lat.xi_) acc += lat.weight_ * rho(xi);
    const double sum = acc.value();
    if (!(sum > 0.0)) throw InputError("rho vanishes on every lattice node; cannot normalize");
    lat.rho_spec_ = rho.with_normalization(rho.normalization() / sum);
  }
  if (!nu.resolved()) {
    CompensatedSum<double> acc;
    for (const auto& xi : lat.xi_) acc += lat.weight_ * nu(xi).norm();
    const double sum = acc.value();
    if (!(sum > 0.0)) throw InputError("nu vanishes on every lattice node; cannot normalize");
    lat.nu_spec_ = nu.with_normalization(nu.normalization() / sum);
  }
  lat.rho_.reserve(lat.size());
  lat.nu_.reserve(lat.size());
  for (const auto& xi : lat.xi_) {
    lat.rho_.push_back(lat.rho_spec_(xi));
    lat.nu_.push_back(lat.nu_spec_(xi));
  }
  return lat;
}

namespace {

// wrapped indices (i + shift) mod n along one axis
std::vector<Index> wrapped_line(int shift, int n) {
  std::vector<Index> line(n);
  for (int i = 0; i < n; ++i) line[i] = wrap_index(i + shift, n);
  return line;
}

}  // namespace

NodeFamily s_rho_apply(const Field& w, const XiLattice& lattice) {
  NodeFamily u;
  s_rho_apply(w, lattice, u);
  return u;
}

void s_rho_apply(const Field& w, const XiLattice& lattice, NodeFamily& u) {
  if (w.n() != lattice.n()) throw InputError("s_rho_apply: field and lattice grid sizes differ");
  const int c = w.components();
  const int n = w.n();
  const Index nn = Index(n) * n;
  if (u.n != n || u.components != c || u.nodes != lattice.size()) u = NodeFamily::uninitialized(n, c, lattice.size());
  const double* wd = w.data().data();
  parallel_for(lattice.size(), [&](std::size_t q) {
    const double f = std::sqrt(lattice.rho_value(q)) / lattice.norm(q);
    const Eigen::Vector3i& j = lattice.offset(q);
    const auto l1 = wrapped_line(j.x(), n), l2 = wrapped_line(j.y(), n), l3 = wrapped_line(j.z(), n);
    double* out = u.data.data() + Index(q) * nn * n * c;
    for (int i3 = 0; i3 < n; ++i3)
      for (int i2 = 0; i2 < n; ++i2) {
        const Index row = n * (i2 + Index(n) * i3), trow = n * (l2[i2] + n * l3[i3]);
        for (int i1 = 0; i1 < n; ++i1) {
          const double* ws = wd + (row + i1) * c;
          const double* wt = wd + (trow + l1[i1]) * c;
          double* us = out + (row + i1) * c;
          for (int k = 0; k < c; ++k) us[k] = f * (wt[k] - ws[k]);
        }
      }
  }, 1);
}

Field s_rho_adjoint_apply(const NodeFamily& u, const XiLattice& lattice) {
  if (u.n != lattice.n() || u.nodes != lattice.size())
    throw InputError("s_rho_adjoint_apply: family does not match the lattice");
  const int c = u.components;
  const int n = u.n;
  const Index nn = Index(n) * n;
  Field out(n, c);
  const double h3 = lattice.weight();
  std::vector<double> f(lattice.size());
  for (std::size_t q = 0; q < lattice.size(); ++q) f[q] = h3 * std::sqrt(lattice.rho_value(q)) / lattice.norm(q);
  // one task per z-slice; every site sums over q in ascending order
  parallel_for(std::size_t(n), [&](std::size_t slice) {
    const int i3 = int(slice);
    std::vector<double> acc(std::size_t(nn * c), 0.0);
    for (std::size_t q = 0; q < lattice.size(); ++q) {
      const Eigen::Vector3i& j = lattice.offset(q);
      const auto l1 = wrapped_line(-j.x(), n), l2 = wrapped_line(-j.y(), n);
      const Index b3 = wrap_index(i3 - j.z(), n);
      const double* uq = u.data.data() + Index(q) * nn * n * c;
      for (int i2 = 0; i2 < n; ++i2) {
        const Index row = n * (i2 + Index(n) * i3), brow = n * (l2[i2] + n * b3);
        for (int i1 = 0; i1 < n; ++i1) {
          const double* us = uq + (row + i1) * c;
          const double* ub = uq + (brow + l1[i1]) * c;
          double* a = acc.data() + (Index(n) * i2 + i1) * c;
          for (int k = 0; k < c; ++k) a[k] += f[q] * (ub[k] - us[k]);
        }
      }
    }
    for (Index r = 0; r < nn; ++r)
      for (int k = 0; k < c; ++k) out(nn * i3 + r, k) = acc[std::size_t(r * c + k)];
  }, 1);
  return out;
}

double inner(const NodeFamily& u, const NodeFamily& v, const XiLattice& lattice) {
  const Index sites = u.sites();
  const Index len = sites * u.components;
  // per-node dot products, then an order-fixed sum over nodes
  const double sum = deterministic_sum(u.nodes, [&](std::size_t q) {
    return u.data.segment(Index(q) * len, len).dot(v.data.segment(Index(q) * len, len));
  });
  return sum * lattice.weight() / double(sites);
}

double norm_rho_squared(const Field& w, const XiLattice& lattice) {
  if (w.n() != lattice.n()) throw InputError("norm_rho: field and lattice grid sizes differ");
  const Index sites = w.sites();
  const int c = w.components();
  const int n = w.n();
  const double sum = deterministic_sum(lattice.size() * std::size_t(sites), [&](std::size_t idx) {
    const std::size_t q = idx / std::size_t(sites);
    const Index s = Index(idx % std::size_t(sites));
    const double f = std::sqrt(lattice.rho_value(q)) / lattice.norm(q);
    const Index t = shifted_site(s, lattice.offset(q), n);
    double acc = 0.0;
    for (int k = 0; k < c; ++k) {
      const double d = f * (w(t, k) - w(s, k));
      acc += d * d;
    }
    return acc;
  });
  return sum * lattice.weight() / double(sites);
}

double norm_rho(const Field& w, const XiLattice& lattice) {
  return std::sqrt(norm_rho_squared(w, lattice));
}

}  // namespace nlhom
