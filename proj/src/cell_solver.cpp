#include "nlhom/cell_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace nlhom {

CellOperator::CellOperator(const CoefficientSpec& a, const XiLattice& lattice, bool cache)
    : a_(a), lattice_(&lattice) {
  const std::size_t nodes = lattice.size();
  scale_.resize(nodes);
  for (std::size_t q = 0; q < nodes; ++q)
    scale_[q] = lattice.rho_value(q) / (lattice.norm(q) * lattice.norm(q));
  if (cache && !a_.is_constant()) {
    const int n = lattice.n();
    const Index sites = Index(n) * n * n;
    cache_.resize(nodes * std::size_t(sites));
    parallel_for(nodes, [&](std::size_t q) {
      const Eigen::Vector3i& j = lattice.offset(q);
      for (Index s = 0; s < sites; ++s)
        cache_[q * std::size_t(sites) + std::size_t(s)] = a_.at_nodes(s, shifted_site(s, j, n), n);
    }, 1);
  }
}

double CellOperator::pair_weight(std::size_t q, Index site) const {
  const int n = lattice_->n();
  double a;
  if (a_.is_constant()) {
    a = a_.constant_value();
  } else if (!cache_.empty()) {
    a = cache_[q * std::size_t(Index(n) * n * n) + std::size_t(site)];
  } else {
    a = a_.at_nodes(site, shifted_site(site, lattice_->offset(q), n), n);
  }
  return a * scale_[q];
}

Field CellOperator::apply(const Field& v) const {
  const int n = lattice_->n();
  if (v.n() != n) throw InputError("apply_hessian: field and lattice grid sizes differ");
  const int c = v.components();
  const double two_h3 = 2.0 * lattice_->weight();
  Field out(n, c);
  parallel_for(std::size_t(v.sites()), [&](std::size_t si) {
    const Index s = Index(si);
    double acc[3] = {0.0, 0.0, 0.0};
    std::vector<double> big;
    double* sum = acc;
    if (c > 3) {
      big.assign(std::size_t(c), 0.0);
      sum = big.data();
    }
    for (std::size_t q = 0; q < lattice_->size(); ++q) {
      if (lattice_->trivial_shift(q)) continue;
      const Eigen::Vector3i& j = lattice_->offset(q);
      const Index fwd = shifted_site(s, j, n);
      const Index back = shifted_site(s, Eigen::Vector3i(-j), n);
      const double w_here = pair_weight(q, s);
      const double w_back = pair_weight(q, back);
      for (int k = 0; k < c; ++k)
        sum[k] += w_back * (v(s, k) - v(back, k)) - w_here * (v(fwd, k) - v(s, k));
    }
    for (int k = 0; k < c; ++k) out(s, k) = two_h3 * sum[k];
  });
  return out;
}

Eigen::VectorXd CellOperator::diagonal() const {
  const int n = lattice_->n();
  const Index sites = Index(n) * n * n;
  const double two_h3 = 2.0 * lattice_->weight();
  Eigen::VectorXd d(sites);
  parallel_for(std::size_t(sites), [&](std::size_t si) {
    const Index s = Index(si);
    double acc = 0.0;
    for (std::size_t q = 0; q < lattice_->size(); ++q) {
      if (lattice_->trivial_shift(q)) continue;
      const Index back = shifted_site(s, Eigen::Vector3i(-lattice_->offset(q)), n);
      acc += pair_weight(q, back) + pair_weight(q, s);
    }
    d[s] = two_h3 * acc;
  });
  return d;
}

double CellOperator::dirichlet_form(const Field& f, int k, const Field& g, int l) const {
  const int n = lattice_->n();
  const std::size_t sites = std::size_t(f.sites());
  const double sum = deterministic_sum(lattice_->size() * sites, [&](std::size_t idx) {
    const std::size_t q = idx / sites;
    const Index s = Index(idx % sites);
    const Index t = shifted_site(s, lattice_->offset(q), n);
    return pair_weight(q, s) * (f(t, k) - f(s, k)) * (g(t, l) - g(s, l));
  });
  return sum * lattice_->weight() / double(sites);
}

void CellProblem::validate() const {
  if (lattice.size() == 0) throw InputError("cell problem: empty xi-lattice");
  if (mode != CellMode::direct) return;
  if (!s.allFinite() || !A.allFinite()) throw InputError("cell problem: non-finite (s, A)");
  if (std::abs(s.norm() - 1.0) > 1e-8) throw DomainError("cell problem: s is not a unit vector");
  for (int i = 0; i < 3; ++i) {
    const double defect = std::abs(A.col(i).dot(s));
    if (defect > 1e-8 * std::max(1.0, A.col(i).norm())) {
      std::ostringstream msg;
      msg << "cell problem: column " << i + 1 << " of A is not tangent to s (|A e_i . s| = "
          << defect << ")";
      throw DomainError(msg.str());
    }
  }
}

namespace {

/// Per-node linear data: b(z) = sum_q h^3 (g_q(z - j) - g_q(z)) with g_q(z) from `flux`.
Field assemble_divergence(const XiLattice& lattice, int components,
                          const std::function<void(std::size_t, Index, double*)>& flux) {
  const int n = lattice.n();
  Field out(n, components);
  const double h3 = lattice.weight();
  parallel_for(std::size_t(out.sites()), [&](std::size_t si) {
    const Index s = Index(si);
    const std::size_t c = std::size_t(components);
    std::vector<CompensatedSum<double>> acc(c);
    std::vector<double> here(c), back(c);
    for (std::size_t q = 0; q < lattice.size(); ++q) {
      if (lattice.trivial_shift(q)) continue;
      const Index b = shifted_site(s, Eigen::Vector3i(-lattice.offset(q)), n);
      flux(q, s, here.data());
      flux(q, b, back.data());
      for (std::size_t k = 0; k < c; ++k) acc[k] += h3 * (back[k] - here[k]);
    }
    for (int k = 0; k < components; ++k) out(s, k) = acc[std::size_t(k)].value();
  });
  return project_mean_zero(out);
}

double coefficient_at(const CoefficientSpec& c, const XiLattice& lattice, std::size_t q, Index s) {
  if (c.is_constant()) return c.constant_value();
  const int n = lattice.n();
  return c.at_nodes(s, shifted_site(s, lattice.offset(q), n), n);
}

Eigen::Matrix3d affine_part(const CellProblem& p) {
  switch (p.mode) {
    case CellMode::corrector_a: return Eigen::Matrix3d::Identity();
    case CellMode::corrector_kappa: return Eigen::Matrix3d::Zero();
    default: return p.A;
  }
}

Eigen::Vector3d linear_kernel(const CellProblem& p, std::size_t q) {
  switch (p.mode) {
    case CellMode::corrector_a: return Eigen::Vector3d::Zero();
    case CellMode::corrector_kappa: return p.lattice.nu_value(q);
    default: return p.s.cross(p.lattice.nu_value(q));
  }
}

double component_dot(const Field& f, int k, const Field& g, int l) {
  return deterministic_sum(std::size_t(f.sites()),
                           [&](std::size_t s) { return f(Index(s), k) * g(Index(s), l); });
}

void project_component(Field& f, int k) {
  const double m = deterministic_sum(std::size_t(f.sites()), [&](std::size_t s) {
                     return f(Index(s), k);
                   }) / double(f.sites());
  for (Index s = 0; s < f.sites(); ++s) f(s, k) -= m;
}

double sup_norm(const Field& f) {
  return f.size() ? f.data().cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

Field apply_hessian(const CellProblem& problem, const Field& v) {
  CellOperator op(problem.a, problem.lattice, problem.options.cache_coefficients);
  return op.apply(v);
}

Field assemble_rhs(const CellProblem& problem) {
  problem.validate();
  const XiLattice& lat = problem.lattice;
  const Eigen::Matrix3d B = affine_part(problem);
  const bool dmi = problem.mode != CellMode::corrector_a;
  TangentFrame<double> frame;
  Eigen::Matrix<double, 3, Eigen::Dynamic> basis;
  if (problem.mode == CellMode::direct) {
    frame = tangent_frame<double>(problem.s);
    basis.resize(3, 2);
    basis.col(0) = frame.t1;
    basis.col(1) = frame.t2;
  } else {
    basis = Eigen::Matrix3d::Identity();
  }
  const int c = int(basis.cols());
  return assemble_divergence(lat, c, [&](std::size_t q, Index s, double* g) {
    const Eigen::Vector3d& xi = lat.xi(q);
    const double r = lat.norm(q);
    const double a = B.isZero() ? 0.0 : coefficient_at(problem.a, lat, q, s);
    const Eigen::Vector3d affine = 2.0 * a * lat.rho_value(q) * (B * xi) / (r * r);
    Eigen::Vector3d total = affine;
    if (dmi) {
      const double kap = coefficient_at(problem.kappa, lat, q, s);
      total += kap * linear_kernel(problem, q) / r;
    }
    for (int k = 0; k < c; ++k) g[k] = basis.col(k).dot(total);
  });
}

CgStats cg_solve_components(const CellOperator& op, const Field& b, const SolverOptions& options,
                            Field& x) {
  const int c = b.components();
  const int n = b.n();
  const Index sites = b.sites();
  x = Field(n, c);
  CgStats stats;
  const Index unknowns = Index(c) * sites;
  const int cap = std::max(1, int(std::ceil(options.max_iter_factor * double(unknowns))));

  Eigen::VectorXd inv_diag;
  if (options.jacobi) {
    inv_diag = op.diagonal();
    for (Index s = 0; s < sites; ++s) inv_diag[s] = inv_diag[s] > 0.0 ? 1.0 / inv_diag[s] : 1.0;
  }
  auto precondition = [&](const Field& r) {
    if (!options.jacobi) return r;
    Field z = r;
    for (Index s = 0; s < sites; ++s)
      for (int k = 0; k < c; ++k) z(s, k) *= inv_diag[s];
    for (int k = 0; k < c; ++k) project_component(z, k);
    return z;
  };

  Field r(n, c);
  for (Index s = 0; s < sites; ++s)
    for (int k = 0; k < c; ++k) r(s, k) = -b(s, k);
  for (int k = 0; k < c; ++k) project_component(r, k);
  const std::size_t cc = std::size_t(c);
  std::vector<double> bnorm(cc), rz(cc), rel(cc, 0.0);
  std::vector<bool> active(cc);
  bool any = false;
  for (int k = 0; k < c; ++k) {
    bnorm[std::size_t(k)] = std::sqrt(component_dot(b, k, b, k));
    active[std::size_t(k)] = bnorm[std::size_t(k)] > 0.0;
    any = any || active[std::size_t(k)];
  }
  if (!any) {
    stats.history.push_back(0.0);
    return stats;
  }
  Field z = precondition(r);
  Field p = z;
  for (int k = 0; k < c; ++k) {
    rz[std::size_t(k)] = component_dot(r, k, z, k);
    rel[std::size_t(k)] = active[std::size_t(k)] ? 1.0 : 0.0;
  }
  stats.history.push_back(1.0);

  int it = 0;
  while (true) {
    bool open = false;
    for (int k = 0; k < c; ++k) open = open || active[std::size_t(k)];
    if (!open) break;
    if (it >= cap) {
      std::ostringstream msg;
      msg << "CG reached the iteration cap " << cap << " with relative residual "
          << *std::max_element(rel.begin(), rel.end()) << " > " << options.cg_tol;
      throw ConvergenceError(msg.str(), stats.history);
    }
    ++it;
    const Field Ap = op.apply(p);
    for (int k = 0; k < c; ++k) {
      const std::size_t kk = std::size_t(k);
      if (!active[kk]) continue;
      const double pAp = component_dot(p, k, Ap, k);
      if (!(pAp > 0.0)) {
        std::ostringstream msg;
        msg << "non-positive curvature p.Hp = " << pAp << " in component " << k
            << " at iteration " << it << "; the assembled operator is not positive definite";
        throw AssemblyError(msg.str());
      }
      const double alpha = rz[kk] / pAp;
      for (Index s = 0; s < sites; ++s) {
        x(s, k) += alpha * p(s, k);
        r(s, k) -= alpha * Ap(s, k);
      }
      project_component(x, k);
      project_component(r, k);
      rel[kk] = std::sqrt(component_dot(r, k, r, k)) / bnorm[kk];
      if (rel[kk] <= options.cg_tol) active[kk] = false;
    }
    stats.history.push_back(*std::max_element(rel.begin(), rel.end()));
    z = precondition(r);
    for (int k = 0; k < c; ++k) {
      const std::size_t kk = std::size_t(k);
      if (!active[kk]) continue;
      const double rz_new = component_dot(r, k, z, k);
      const double beta = rz_new / rz[kk];
      rz[kk] = rz_new;
      for (Index s = 0; s < sites; ++s) p(s, k) = z(s, k) + beta * p(s, k);
    }
  }
  stats.iterations = it;
  stats.residual = *std::max_element(rel.begin(), rel.end());
  x.mean_zero = true;
  return stats;
}

double cell_energy(const CellProblem& problem, const Field& v) {
  const XiLattice& lat = problem.lattice;
  const int n = lat.n();
  if (v.n() != n || v.components() != 3)
    throw InputError("cell_energy: expected a 3-component field on the lattice grid");
  const Eigen::Matrix3d B = affine_part(problem);
  const bool dmi = problem.mode != CellMode::corrector_a;
  const std::size_t sites = std::size_t(v.sites());
  std::vector<Eigen::Vector3d> g(lat.size());
  for (std::size_t q = 0; q < lat.size(); ++q) g[q] = linear_kernel(problem, q);
  const double sum = deterministic_sum(lat.size() * sites, [&](std::size_t idx) {
    const std::size_t q = idx / sites;
    const Index s = Index(idx % sites);
    const Index t = shifted_site(s, lat.offset(q), n);
    const double r = lat.norm(q);
    const Eigen::Vector3d d = B * lat.xi(q) + (v.vec(t) - v.vec(s));
    double e = coefficient_at(problem.a, lat, q, s) * lat.rho_value(q) * d.squaredNorm() / (r * r);
    if (dmi) e += coefficient_at(problem.kappa, lat, q, s) * d.dot(g[q]) / r;
    return e;
  });
  return sum * lat.weight() / double(sites);
}

namespace {

CellSolution finish(const CellProblem& problem, const CellOperator& op, const Field& b,
                    const Field& x, const CgStats& stats) {
  CellSolution sol;
  sol.iterations = stats.iterations;
  sol.residual = stats.residual;
  sol.residual_history = stats.history;
  Field el = op.apply(x);
  el.data() += b.data();
  sol.el_residual = sup_norm(el);
  if (problem.mode == CellMode::direct) {
    const TangentFrame<double> frame = tangent_frame<double>(problem.s);
    sol.frame_coordinates = x;
    sol.v = Field(x.n(), 3);
    for (Index s = 0; s < x.sites(); ++s) sol.v.vec(s) = frame.from_frame(x(s, 0), x(s, 1));
  } else {
    sol.v = x;
  }
  sol.v.mean_zero = true;
  sol.energy = cell_energy(problem, sol.v);
  return sol;
}

}  // namespace

CellSolution cg_solve(const CellProblem& problem) {
  if (problem.mode == CellMode::direct) return solve_direct(problem);
  problem.validate();
  const CellOperator op(problem.a, problem.lattice, problem.options.cache_coefficients);
  const Field b = assemble_rhs(problem);
  Field x;
  const CgStats stats = cg_solve_components(op, b, problem.options, x);
  return finish(problem, op, b, x, stats);
}

CellSolution solve_direct(const CellProblem& problem_in) {
  CellProblem problem = problem_in;
  problem.mode = CellMode::direct;
  problem.validate();
  const CellOperator op(problem.a, problem.lattice, problem.options.cache_coefficients);
  const Field b = assemble_rhs(problem);
  Field x;
  const CgStats stats = cg_solve_components(op, b, problem.options, x);
  return finish(problem, op, b, x, stats);
}

CellSolution solve(const CellProblem& problem) {
  return problem.mode == CellMode::direct ? solve_direct(problem) : cg_solve(problem);
}

}  // namespace nlhom
