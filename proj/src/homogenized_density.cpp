#include "nlhom/homogenized_density.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nlhom {

Eigen::Matrix3d compute_Tbar(const CoefficientSpec& a, const XiLattice& lattice) {
  std::vector<double> abar(lattice.size());
  parallel_for(lattice.size(), [&](std::size_t q) { abar[q] = node_average(a, lattice, q); }, 16);
  Eigen::Matrix3d T;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      CompensatedSum<double> acc;
      for (std::size_t q = 0; q < lattice.size(); ++q) {
        const Eigen::Vector3d& xi = lattice.xi(q);
        const double r2 = lattice.norm(q) * lattice.norm(q);
        acc += lattice.weight() * lattice.rho_value(q) * xi[i] * xi[j] / r2 * abar[q];
      }
      T(i, j) = T(j, i) = acc.value();
    }
  return T;
}

std::array<Eigen::Vector3d, 3> compute_dbar(const CoefficientSpec& kappa, const XiLattice& lattice) {
  std::array<Eigen::Vector3d, 3> d;
  if (kappa.is_constant() && kappa.constant_value() == 0.0) {
    for (auto& v : d) v.setZero();
    return d;
  }
  std::vector<double> kbar(lattice.size());
  parallel_for(lattice.size(), [&](std::size_t q) { kbar[q] = node_average(kappa, lattice, q); }, 16);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      CompensatedSum<double> acc;
      for (std::size_t q = 0; q < lattice.size(); ++q)
        acc += lattice.weight() * lattice.xi(q)[i] / lattice.norm(q) * lattice.nu_value(q)[k] * kbar[q];
      d[std::size_t(i)][k] = acc.value();
    }
  return d;
}

namespace {

/// Coefficient vectors c_alpha with v_{s,A} = sum_alpha c_alpha f_alpha.
std::array<Eigen::Vector3d, 6> mixing_vectors(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) {
  std::array<Eigen::Vector3d, 6> c;
  for (int k = 0; k < 3; ++k) {
    c[std::size_t(k)] = A.col(k);
    c[std::size_t(3 + k)] = s.cross(Eigen::Vector3d::Unit(k));
  }
  return c;
}

/// Linear maps p -> c_alpha, p = (A row-major, s).
std::array<Eigen::Matrix<double, 3, 12>, 6> mixing_maps() {
  std::array<Eigen::Matrix<double, 3, 12>, 6> M;
  for (auto& m : M) m.setZero();
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i) M[std::size_t(k)](i, 3 * i + k) = 1.0;
    const Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
    for (int m = 0; m < 3; ++m) {
      const Eigen::Vector3d col = Eigen::Vector3d::Unit(m).cross(e);
      for (int i = 0; i < 3; ++i) M[std::size_t(3 + k)](i, 9 + m) = col[i];
    }
  }
  return M;
}

SolveStats stats_of(const CellSolution& sol) {
  return {sol.residual, sol.iterations, sol.el_residual, sol.energy};
}

}  // namespace

double HomogenizedDensity::moment_part(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) const {
  double value = (A * Tbar).cwiseProduct(A).sum();
  for (int i = 0; i < 3; ++i) value += s.dot(dbar[std::size_t(i)].cross(A.col(i)));
  return value;
}

double HomogenizedDensity::correction(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) const {
  const auto c = mixing_vectors(s, A);
  double value = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) value += c[std::size_t(i)].dot(c[std::size_t(j)]) * gram(i, j);
  return value;
}

double HomogenizedDensity::correction_from_form(const Eigen::Vector3d& s,
                                                const Eigen::Matrix3d& A) const {
  Eigen::Matrix<double, 12, 1> p;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p[3 * i + k] = A(i, k);
  p.tail<3>() = s;
  return p.dot(correction_form * p);
}

Field HomogenizedDensity::corrector(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) const {
  Field v(v_a.n(), 3);
  for (Index z = 0; z < v.sites(); ++z) v.vec(z) = A * v_a.vec(z) + s.cross(v_kappa.vec(z));
  v.mean_zero = true;
  return v;
}

void require_tangent_pair(const Eigen::Vector3d& s, const Eigen::Matrix3d& A) {
  if (!s.allFinite() || !A.allFinite()) throw InputError("f_hom: non-finite (s, A)");
  if (std::abs(s.norm() - 1.0) > 1e-8) throw DomainError("f_hom: s is not a unit vector");
  for (int i = 0; i < 3; ++i) {
    const double defect = std::abs(A.col(i).dot(s));
    if (defect > 1e-8 * std::max(1.0, A.col(i).norm())) {
      std::ostringstream msg;
      msg << "f_hom: (s, A) is not in the tangent bundle; column " << i + 1
          << " has |A e_i . s| = " << defect;
      throw DomainError(msg.str());
    }
  }
}

HomogenizedDensity build(const CellInputs& inputs) {
  HomogenizedDensity H;
  const XiLattice& lat = inputs.lattice;
  H.Tbar = compute_Tbar(inputs.a, lat);
  H.dbar = compute_dbar(inputs.kappa, lat);

  const CellProblem pa{inputs.a, inputs.kappa, lat, CellMode::corrector_a,
                       Eigen::Vector3d::UnitZ(), Eigen::Matrix3d::Zero(), inputs.options};
  const CellSolution sa = cg_solve(pa);
  const CellProblem pk{inputs.a, inputs.kappa, lat, CellMode::corrector_kappa,
                       Eigen::Vector3d::UnitZ(), Eigen::Matrix3d::Zero(), inputs.options};
  const CellSolution sk = cg_solve(pk);
  H.v_a = sa.v;
  H.v_kappa = sk.v;
  H.stats_a = stats_of(sa);
  H.stats_kappa = stats_of(sk);

  Field joint(lat.n(), 6);
  for (Index z = 0; z < joint.sites(); ++z)
    for (int k = 0; k < 3; ++k) {
      joint(z, k) = H.v_a(z, k);
      joint(z, 3 + k) = H.v_kappa(z, k);
    }
  const CellOperator op(inputs.a, lat, inputs.options.cache_coefficients);
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) H.gram(i, j) = H.gram(j, i) = op.dirichlet_form(joint, i, joint, j);

  const auto M = mixing_maps();
  Matrix12d Q = Matrix12d::Zero();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      Q += H.gram(i, j) * M[std::size_t(i)].transpose() * M[std::size_t(j)];
  H.correction_form = 0.5 * (Q + Q.transpose());
  return H;
}

double fhom_decomposed(const HomogenizedDensity& H, const Eigen::Vector3d& s, const Eigen::Matrix3d& A) {
  require_tangent_pair(s, A);
  return H.moment_part(s, A) - H.correction(s, A);
}

double fhom_direct(const CellInputs& inputs, const Eigen::Vector3d& s, const Eigen::Matrix3d& A) {
  require_tangent_pair(s, A);
  CellProblem p{inputs.a, inputs.kappa, inputs.lattice, CellMode::direct, s, A, inputs.options};
  return solve_direct(p).energy;
}

CellInputs scale_inputs(const CellInputs& inputs, double lambda, double* tail_mass) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be positive");
  if (tail_mass) *tail_mass = 0.0;
  if (lambda == 1.0) return inputs;
  const KernelSpec rho = scale_lambda(inputs.lattice.rho(), lambda);
  const VectorKernelSpec nu = scale_lambda(inputs.lattice.nu(), lambda);
  const double radius = std::max(inputs.lattice.radius(), lambda * inputs.lattice.radius());
  CellInputs out = inputs;
  out.lattice = XiLattice::build(inputs.lattice.n(), radius, rho, nu);
  if (tail_mass) {
    double t = std::max(0.0, kernel_mass_within(rho, std::numeric_limits<double>::infinity()) -
                                 kernel_mass_within(rho, radius));
    if (!nu.is_zero())
      t = std::max(t, kernel_mass_within(nu, std::numeric_limits<double>::infinity()) -
                          kernel_mass_within(nu, radius));
    *tail_mass = t;
  }
  return out;
}

LambdaResult fhom_lambda(const CellInputs& inputs, double lambda, const Eigen::Vector3d& s,
                         const Eigen::Matrix3d& A) {
  LambdaResult res;
  const CellInputs scaled = scale_inputs(inputs, lambda, &res.tail_mass);
  if (res.tail_mass > 1e-6) {
    std::ostringstream msg;
    msg << "lambda-scaled kernels lose tail mass " << res.tail_mass << " beyond radius "
        << scaled.lattice.radius();
    res.warning = msg.str();
  }
  res.direct = fhom_direct(scaled, s, A);
  res.decomposed = fhom_decomposed(build(scaled), s, A);
  return res;
}

}  // namespace nlhom
