#include <doctest.h>

#include <cmath>

#include "dense_oracle.hpp"
#include "nlhom/verification.hpp"

using namespace nlhom;
using Eigen::Matrix3d;
using Eigen::Vector3d;
using Eigen::Vector3i;

namespace {

constexpr double kPi = 3.14159265358979323846;

CellProblem problem(const VerificationSetup& setup, int n, CellMode mode) {
  CellProblem p;
  p.a = setup.a;
  p.kappa = setup.kappa;
  p.lattice = setup.lattice(n);
  p.mode = mode;
  p.options = setup.options;
  return p;
}

double max_abs(const Field& f) { return f.data().cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("cell_solver") {

TEST_CASE("hessian of zero and of constants") {
  const auto p = problem(one_mode_setup(), 3, CellMode::corrector_a);
  CHECK(max_abs(apply_hessian(p, Field(3, 3))) == 0.0);
  CHECK(max_abs(apply_hessian(p, Field::constant(3, Vector3d(1, 2, 3)))) < 1e-13);
}

TEST_CASE("hessian acts on Fourier modes by its symbol") {
  VerificationSetup setup;
  setup.a = CoefficientSpec::constant(1.5);
  const int n = 6;
  const auto p = problem(setup, n, CellMode::corrector_a);
  for (const Vector3i& k : {Vector3i(1, 0, 0), Vector3i(1, 2, -1), Vector3i(3, 3, 3)}) {
    Field v(n, 3);
    for (Index s = 0; s < v.sites(); ++s) {
      const double c = std::cos(2 * kPi * k.dot(v.coords(s)) / n);
      v.vec(s) = Vector3d(c, -c, 2 * c);
    }
    double sigma = 0.0;
    for (std::size_t q = 0; q < p.lattice.size(); ++q) {
      const double phi = 2 * kPi * k.dot(p.lattice.offset(q)) / n;
      sigma += 2 * p.lattice.weight() * 1.5 * p.lattice.rho_value(q) /
               (p.lattice.norm(q) * p.lattice.norm(q)) * (2 - 2 * std::cos(phi));
    }
    Field ref = v;
    ref.data() *= sigma;
    Field diff = apply_hessian(p, v);
    diff.data() -= ref.data();
    CHECK(max_abs(diff) < 1e-10 * std::max(1.0, sigma));
  }
}

TEST_CASE("hessian is symmetric") {
  const auto p = problem(one_mode_setup(), 4, CellMode::corrector_a);
  Rng rng(21);
  for (int t = 0; t < 3; ++t) {
    const Field u = random_field(rng, 4, 3), w = random_field(rng, 4, 3);
    const double a = inner(apply_hessian(p, u), w), b = inner(u, apply_hessian(p, w));
    CHECK(std::abs(a - b) < 1e-13 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("constant coefficients give a vanishing right-hand side") {
  VerificationSetup setup;
  setup.a = CoefficientSpec::constant(2.0);
  setup.kappa = CoefficientSpec::constant(0.4);
  CHECK(max_abs(assemble_rhs(problem(setup, 4, CellMode::corrector_a))) < 1e-13);
  CHECK(max_abs(assemble_rhs(problem(setup, 4, CellMode::corrector_kappa))) < 1e-13);
  const auto sol = cg_solve(problem(setup, 4, CellMode::corrector_a));
  CHECK(max_abs(sol.v) <= 1e-10);
  CHECK(sol.iterations <= 1);
}

TEST_CASE("right-hand side is the gradient of the cell functional") {
  const int n = 3;
  for (CellMode mode : {CellMode::corrector_a, CellMode::corrector_kappa}) {
    const auto p = problem(one_mode_setup(), n, mode);
    const Field b = assemble_rhs(p);
    const double h = 1e-6;
    double worst = 0.0;
    for (Index s = 0; s < b.sites(); s += 2)
      for (int k = 0; k < 3; ++k) {
        Field vp(n, 3), vm(n, 3);
        vp(s, k) = h;
        vm(s, k) = -h;
        const double fd = (cell_energy(p, vp) - cell_energy(p, vm)) / (2 * h) * double(b.sites());
        worst = std::max(worst, std::abs(fd - b(s, k)));
      }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("corrector solve against the dense oracle, n = 2") {
  for (CellMode mode : {CellMode::corrector_a, CellMode::corrector_kappa}) {
    auto p = problem(one_mode_setup(), 2, mode);
    p.options.cg_tol = 1e-13;
    const auto sol = cg_solve(p);
    const auto ref = oracle::dense_cell_solve(p);
    Field diff = sol.v;
    diff.data() -= ref.v.data();
    CHECK(max_abs(diff) < 1e-9 * std::max(1.0, max_abs(ref.v)));
    CHECK(std::abs(sol.energy - ref.energy) < 1e-9 * std::max(1.0, std::abs(ref.energy)));
    CHECK(sol.el_residual <= 1e-8 * std::max(1.0, max_abs(assemble_rhs(p))));
  }
}

TEST_CASE("hessian and CG against the dense quadratic form, n = 2") {
  auto p = problem(one_mode_setup(), 2, CellMode::corrector_a);
  p.options.cg_tol = 1e-13;
  const auto ref = oracle::dense_cell_solve(p);
  // offsets are their own negatives mod 2: the corrector rhs cancels
  CHECK(max_abs(assemble_rhs(p)) < 1e-15);
  const Index U = ref.l.size();
  Eigen::MatrixXd H(U, U);
  for (Index i = 0; i < U; ++i) {
    Field e(2, 3);
    e.data()[i] = 1.0;
    H.col(i) = apply_hessian(p, e).data();
  }
  const Eigen::MatrixXd Hd = 2.0 * double(U / 3) * ref.Q;
  CHECK((H - Hd).cwiseAbs().maxCoeff() < 1e-12 * Hd.cwiseAbs().maxCoeff());
  Rng rng(12);
  Field b = random_field(rng, 2, 3);
  const Eigen::VectorXd m = mean(b);
  for (Index s = 0; s < b.sites(); ++s) b.vec(s) -= m;
  Field x;
  cg_solve_components(CellOperator(p.a, p.lattice), b, p.options, x);
  const Eigen::VectorXd xd = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(Hd).solve(-b.data());
  CHECK((x.data() - xd).cwiseAbs().maxCoeff() < 1e-9 * xd.cwiseAbs().maxCoeff());
}

TEST_CASE("direct solve against the dense oracle, n = 2") {
  auto p = problem(one_mode_setup(), 2, CellMode::direct);
  p.options.cg_tol = 1e-13;
  Rng rng(5);
  for (int t = 0; t < 3; ++t) {
    p.s = rng.unit_vector();
    p.A = rng.tangent_matrix(p.s);
    const auto sol = solve_direct(p);
    const auto ref = oracle::dense_cell_solve(p);
    CHECK(std::abs(sol.energy - ref.energy) < 1e-9 * std::max(1.0, std::abs(ref.energy)));
    Field diff = sol.v;
    diff.data() -= ref.v.data();
    CHECK(max_abs(diff) < 1e-9 * std::max(1.0, max_abs(ref.v)));
    CHECK(sol.energy <= cell_energy(p, Field(2, 3)) + 1e-14);
    for (Index s = 0; s < sol.v.sites(); ++s) CHECK(std::abs(sol.v.vec(s).dot(p.s)) < 1e-14);
  }
}

TEST_CASE("lockstep components match independent scalar solves bit for bit") {
  auto p = problem(one_mode_setup(), 4, CellMode::corrector_a);
  const CellOperator op(p.a, p.lattice);
  const Field b = assemble_rhs(p);
  Field x;
  const auto stats = cg_solve_components(op, b, p.options, x);
  int max_single = 0;
  for (int k = 0; k < 3; ++k) {
    Field xk;
    const auto sk = cg_solve_components(op, b.component(k), p.options, xk);
    max_single = std::max(max_single, sk.iterations);
    CHECK(xk.data() == x.component(k).data());
  }
  CHECK(max_single == stats.iterations);
}

TEST_CASE("direct solve is affine in A") {
  auto p = problem(one_mode_setup(), 4, CellMode::direct);
  p.options.cg_tol = 1e-12;
  Rng rng(8);
  p.s = rng.unit_vector();
  const Matrix3d A = rng.tangent_matrix(p.s), B = rng.tangent_matrix(p.s);
  auto solve_with = [&](const Matrix3d& M) {
    CellProblem q = p;
    q.A = M;
    return solve_direct(q).v;
  };
  const Field vab = solve_with(A + B), va = solve_with(A), vb = solve_with(B), v0 = solve_with(Matrix3d::Zero());
  Eigen::VectorXd d = vab.data() + v0.data() - va.data() - vb.data();
  CHECK(d.cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, va.data().cwiseAbs().maxCoeff()));
}

TEST_CASE("jacobi and cached coefficients reproduce the plain solve") {
  auto p = problem(one_mode_setup(), 4, CellMode::corrector_a);
  p.options.cg_tol = 1e-12;
  const auto plain = cg_solve(p);
  auto pj = p;
  pj.options.jacobi = true;
  const auto jac = cg_solve(pj);
  CHECK((jac.v.data() - plain.v.data()).cwiseAbs().maxCoeff() < 1e-9);
  auto pc = p;
  pc.options.cache_coefficients = true;
  const auto cached = cg_solve(pc);
  CHECK(cached.v.data() == plain.v.data());
  CHECK(cached.iterations == plain.iterations);
}

TEST_CASE("solver errors") {
  SUBCASE("non-tangent A") {
    auto p = problem(one_mode_setup(), 2, CellMode::direct);
    p.s = Vector3d::UnitZ();
    p.A = Matrix3d::Identity();
    CHECK_THROWS_AS(solve_direct(p), DomainError);
    p.s = Vector3d(0, 0, 2);
    p.A = Matrix3d::Zero();
    CHECK_THROWS_AS(solve_direct(p), DomainError);
  }
  SUBCASE("indefinite operator") {
    VerificationSetup setup = one_mode_setup();
    setup.a = CoefficientSpec::fourier(-1.0, setup.a.modes());
    CHECK_THROWS_AS(cg_solve(problem(setup, 3, CellMode::corrector_a)), AssemblyError);
  }
  SUBCASE("iteration cap") {
    VerificationSetup setup;
    setup.a = CoefficientSpec::fourier(1.0, {{Vector3i(1, 2, 0), Vector3i(0, 0, 1), 0.3, 0.2}});
    auto p = problem(setup, 4, CellMode::corrector_a);
    p.options.max_iter_factor = 1e-9;
    try {
      cg_solve(p);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.residual_history().size() == 2);
      CHECK(e.residual_history().front() == 1.0);
    }
  }
}

TEST_CASE("solutions are mean zero and reduce the energy") {
  const auto p = problem(one_mode_setup(), 4, CellMode::corrector_kappa);
  const auto sol = cg_solve(p);
  CHECK(mean(sol.v).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(sol.energy < cell_energy(p, Field(4, 3)));
  CHECK(sol.residual <= p.options.cg_tol);
  CHECK(sol.residual_history.size() == std::size_t(sol.iterations) + 1);
}

}
