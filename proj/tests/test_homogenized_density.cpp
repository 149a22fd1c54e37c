#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "nlhom/verification.hpp"

using namespace nlhom;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

double max_diff(const Matrix3d& a, const Matrix3d& b) { return (a - b).cwiseAbs().maxCoeff(); }

CoefficientSpec::FourierMode mode(Eigen::Vector3i k, Eigen::Vector3i kp, double c, double s) {
  CoefficientSpec::FourierMode m;
  m.k = k;
  m.kp = kp;
  m.cos_amp = c;
  m.sin_amp = s;
  return m;
}

}  // namespace

TEST_SUITE("homogenized_density") {

TEST_CASE("moment tensor of a radial kernel") {
  const auto rho = KernelSpec::bump_quadratic(1.0, NormalizationMode::quadrature);
  const auto lat = XiLattice::build(16, 1.0, rho, VectorKernelSpec::zero());
  const Matrix3d T = compute_Tbar(CoefficientSpec::constant(1.0), lat);
  CHECK(max_diff(T, Matrix3d::Identity() / 3.0) < 1e-4);
  CHECK(max_diff(T, Matrix3d::Identity() / 3.0) < 1e-14);
  CHECK(max_diff(compute_Tbar(CoefficientSpec::constant(2.0), lat), 2.0 * T) < 1e-15);
  // off-diagonal entries cancel by lattice symmetry
  CHECK(std::abs(T(0, 1)) < 1e-15);
  CHECK(T(0, 0) == doctest::Approx(T(2, 2)).epsilon(1e-14));
}

TEST_CASE("analytic normalization converges with the lattice") {
  const auto rho = KernelSpec::bump_quadratic(1.0);
  auto err = [&](int n) {
    const auto lat = XiLattice::build(n, 1.0, rho, VectorKernelSpec::zero());
    return max_diff(compute_Tbar(CoefficientSpec::constant(1.0), lat), Matrix3d::Identity() / 3.0);
  };
  const double e8 = err(8), e16 = err(16);
  CHECK(e16 < e8);
  CHECK(e16 < 1e-2);
}

TEST_CASE("moment tensor with a z-only coefficient of unit mean") {
  const auto lat = VerificationSetup{}.lattice(6);
  const auto a = CoefficientSpec::expression("1 + 0.5*sin(2*pi*z1)*cos(2*pi*z2)");
  CHECK(max_diff(compute_Tbar(a, lat), compute_Tbar(CoefficientSpec::constant(1.0), lat)) < 1e-10);
}

TEST_CASE("averaged DMI vectors") {
  const auto lat = VerificationSetup{}.lattice(6);
  const auto d = compute_dbar(CoefficientSpec::constant(0.3), lat);
  for (int i = 0; i < 3; ++i) CHECK((d[i] - 0.1 * Vector3d::Unit(i)).norm() < 1e-14);
  const auto z = compute_dbar(CoefficientSpec::constant(0.0), lat);
  for (int i = 0; i < 3; ++i) CHECK(z[i].norm() == 0.0);
}

TEST_CASE("averaged DMI vectors against a refined z-average") {
  const auto lat = VerificationSetup{}.lattice(4);
  const auto kappa = CoefficientSpec::fourier(0.2, {mode({0, 1, 1}, {0, 0, -1}, 0.1, 0.3)});
  const auto d = compute_dbar(kappa, lat);
  const int N = 2 * lat.n();
  std::array<Vector3d, 3> ref{Vector3d::Zero(), Vector3d::Zero(), Vector3d::Zero()};
  for (std::size_t q = 0; q < lat.size(); ++q) {
    double avg = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) {
          const Vector3d zz(double(i) / N, double(j) / N, double(k) / N);
          avg += eval_coeff(kappa, zz, zz + lat.xi(q));
        }
    avg /= double(N) * N * N;
    for (int i = 0; i < 3; ++i)
      ref[i] += lat.weight() * lat.xi(q)[i] / lat.norm(q) * avg * lat.nu_value(q);
  }
  for (int i = 0; i < 3; ++i) CHECK((d[i] - ref[i]).norm() < 1e-5);
}

TEST_CASE("constant coefficients need no correction") {
  VerificationSetup setup;
  setup.a = CoefficientSpec::constant(1.7);
  setup.kappa = CoefficientSpec::constant(0.4);
  const auto inputs = setup.inputs(4);
  const auto H = build(inputs);
  CHECK(H.v_a.data().cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(H.v_kappa.data().cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(H.gram.cwiseAbs().maxCoeff() < 1e-18);
  Rng rng(2);
  for (int t = 0; t < 5; ++t) {
    const Vector3d s = rng.unit_vector();
    const Matrix3d A = rng.tangent_matrix(s);
    CHECK(fhom_decomposed(H, s, A) == doctest::Approx(H.moment_part(s, A)).epsilon(1e-14));
    CHECK(std::abs(fhom_direct(inputs, s, A) - H.moment_part(s, A)) < 1e-9);
  }
}

TEST_CASE("decomposed and direct evaluation agree") {
  const auto inputs = one_mode_setup().inputs(4);
  const auto H = build(inputs);
  Rng rng(17);
  for (int t = 0; t < 5; ++t) {
    const Vector3d s = rng.unit_vector();
    const Matrix3d A = rng.tangent_matrix(s);
    const double d = fhom_direct(inputs, s, A), c = fhom_decomposed(H, s, A);
    CHECK(std::abs(d - c) <= 1e-7 * std::max(1.0, std::abs(d)));
    // correction through the cache equals a fresh quadrature of the assembled corrector
    const Field v = H.corrector(s, A);
    const CellOperator op(inputs.a, inputs.lattice);
    double fresh = 0.0;
    for (int k = 0; k < 3; ++k) fresh += op.dirichlet_form(v, k, v, k);
    CHECK(std::abs(H.correction(s, A) - fresh) < 1e-10 * std::max(1.0, fresh));
    CHECK(std::abs(H.correction_from_form(s, A) - fresh) < 1e-10 * std::max(1.0, fresh));
    CHECK(c == doctest::Approx(H.moment_part(s, A) - H.correction(s, A)).epsilon(1e-14));
  }
}

TEST_CASE("sign properties") {
  const auto inputs = one_mode_setup().inputs(4);
  const auto H = build(inputs);
  Rng rng(23);
  const double C = antisym_constant(inputs);
  for (int t = 0; t < 5; ++t) {
    const Vector3d s = rng.unit_vector();
    CHECK(fhom_decomposed(H, s, Matrix3d::Zero()) <= 1e-14);
    CHECK(fhom_decomposed(H, s, rng.tangent_matrix(s)) >= -C);
  }
  VerificationSetup sym = one_mode_setup();
  sym.kappa = CoefficientSpec::constant(0.0);
  const auto inputs0 = sym.inputs(4);
  const auto H0 = build(inputs0);
  for (int t = 0; t < 5; ++t) {
    const Vector3d s = rng.unit_vector();
    CHECK(fhom_decomposed(H0, s, rng.tangent_matrix(s)) >= 0.0);
    CHECK(std::abs(fhom_direct(inputs0, s, Matrix3d::Zero())) < 1e-15);
  }
}

TEST_CASE("gram matrix is symmetric positive semidefinite") {
  const auto H = build(one_mode_setup().inputs(4));
  CHECK((H.gram - H.gram.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(H.gram);
  CHECK(es.eigenvalues().minCoeff() > -1e-14);
  CHECK((H.correction_form - H.correction_form.transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("domain checks") {
  const auto H = build(VerificationSetup{}.inputs(2));
  CHECK_THROWS_AS(fhom_decomposed(H, Vector3d(0, 0, 1), Matrix3d::Identity()), DomainError);
  CHECK_THROWS_AS(fhom_decomposed(H, Vector3d(0, 0, 1.1), Matrix3d::Zero()), DomainError);
  CHECK_NOTHROW(require_tangent_pair(Vector3d(0, 0, 1), Matrix3d::Zero()));
}

TEST_CASE("lambda = 1 reproduces the unscaled density bit for bit") {
  const auto inputs = one_mode_setup().inputs(4);
  const auto H = build(inputs);
  Rng rng(4);
  const Vector3d s = rng.unit_vector();
  const Matrix3d A = rng.tangent_matrix(s);
  const auto r = fhom_lambda(inputs, 1.0, s, A);
  CHECK(r.direct == fhom_direct(inputs, s, A));
  CHECK(r.decomposed == fhom_decomposed(H, s, A));
  CHECK(r.warning.empty());
  CHECK_THROWS_AS(fhom_lambda(inputs, 0.0, s, A), InputError);
}

TEST_CASE("lambda scaling of a constant-coefficient moment tensor") {
  const auto inputs = VerificationSetup{}.inputs(4);
  double tail = -1;
  const auto scaled = scale_inputs(inputs, 2.0, &tail);
  CHECK(scaled.lattice.radius() == 2.0);
  CHECK(tail == 0.0);
  const Matrix3d T = compute_Tbar(scaled.a, scaled.lattice);
  // isotropic, and the trace is the lattice sum of the scaled kernel
  CHECK(std::abs(T(0, 1)) < 1e-15);
  CHECK(T(0, 0) == doctest::Approx(T(1, 1)).epsilon(1e-13));
  CHECK(std::abs(T.trace() - 1.0) < 5e-2);
}

}
