#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "nlhom/verification.hpp"

using namespace nlhom;
using Eigen::Matrix3d;
using Eigen::Vector3d;
using Eigen::Vector3i;

namespace {

constexpr double kPi = 3.14159265358979323846;

Magnetization raw(Field values) {
  Magnetization m;
  m.values = std::move(values);
  return m;
}

Magnetization rotated(const Magnetization& m, const Matrix3d& R) {
  Field f = m.values;
  for (Index s = 0; s < f.sites(); ++s) f.vec(s) = R * Vector3d(m.values.vec(s));
  return raw(std::move(f));
}

HomogenizedDensity zero_corrector_density(const CellInputs& inputs) {
  HomogenizedDensity H;
  H.Tbar = compute_Tbar(inputs.a, inputs.lattice);
  H.dbar = compute_dbar(inputs.kappa, inputs.lattice);
  H.v_a = Field(inputs.lattice.n(), 3);
  H.v_kappa = Field(inputs.lattice.n(), 3);
  return H;
}

}  // namespace

TEST_SUITE("macro_energy") {

TEST_CASE("constant magnetization has zero energy") {
  const auto inputs = one_mode_setup().inputs(4);
  const auto m = sample(MagnetizationFamily::constant(Vector3d(1, 1, 0)), 8);
  const auto e = energy_eps(m, inputs, 0.5);
  CHECK(e.F_eps == 0.0);
  CHECK(e.H_eps == 0.0);
  CHECK(e.pair_count > 0);
  CHECK(e.dropped_fraction > 0.0);
  CHECK(e.dropped_fraction < 1.0);
}

TEST_CASE("single defect site matches hand enumeration") {
  VerificationSetup setup;
  const auto inputs = setup.inputs(4);
  const int M = 8;
  Field f = Field::constant(M, Vector3d(0, 0, 1));
  const Vector3i x0(3, 4, 2);
  f.vec(f.site(x0.x(), x0.y(), x0.z())) = Vector3d(1, 0, 0);
  const auto m = from_values(f);
  const double eps = 0.5;
  const auto& lat = inputs.lattice;
  auto inside = [&](const Vector3i& i) { return (i.array() >= 0).all() && (i.array() < M).all(); };
  double ref = 0.0;
  for (std::size_t q = 0; q < lat.size(); ++q) {
    const int pairs = int(inside(x0 + lat.offset(q))) + int(inside(x0 - lat.offset(q)));
    const double d = eps * lat.norm(q);
    ref += lat.weight() / (double(M) * M * M) * lat.rho_value(q) / (d * d) * 2.0 * pairs;
  }
  CHECK(energy_F_eps(m, inputs, eps) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("exchange energy is rotation invariant") {
  const auto inputs = one_mode_setup().inputs(4);
  Rng rng(31);
  const auto m = random_magnetization(rng, 8);
  const Matrix3d R = Eigen::AngleAxisd(0.7, rng.unit_vector()).toRotationMatrix();
  const double F = energy_F_eps(m, inputs, 0.5);
  CHECK(energy_F_eps(rotated(m, R), inputs, 0.5) == doctest::Approx(F).epsilon(1e-12));
}

TEST_CASE("flipping kappa flips the DMI energy") {
  auto inputs = one_mode_setup().inputs(4);
  Rng rng(32);
  const auto m = random_magnetization(rng, 8);
  const double H = energy_H_eps(m, inputs, 0.5);
  CHECK(H != 0.0);
  inputs.kappa = inputs.kappa.scaled(-1.0);
  CHECK(energy_H_eps(m, inputs, 0.5) == -H);
}

TEST_CASE("tabulated differences") {
  const auto inputs = one_mode_setup().inputs(4);
  Rng rng(33);
  const auto m = random_magnetization(rng, 8);
  const auto delta = delta_rho_eps(m, inputs, 0.5);
  const double F = energy_F_eps(m, inputs, 0.5);
  CHECK(std::abs(weighted_square_sum(delta, inputs, 0.5) - F) <= 1e-12 * F);

  const auto c = sample(MagnetizationFamily::constant(Vector3d(0, 1, 0)), 8);
  CHECK(delta_rho_eps(c, inputs, 0.5).data.cwiseAbs().maxCoeff() == 0.0);

  // linear field: the difference quotient is exact
  Matrix3d G;
  G << 0.2, -0.1, 0.3, 0.0, 0.5, -0.4, 0.1, 0.1, 0.2;
  Field lin(8, 3);
  Magnetization shape = raw(Field(8, 3));
  for (Index s = 0; s < lin.sites(); ++s) lin.vec(s) = G * shape.position(s) + Vector3d(1, 0, 0);
  const auto dl = delta_rho_eps(raw(lin), inputs, 0.5);
  double worst = 0.0;
  for (std::size_t q = 0; q < inputs.lattice.size(); ++q) {
    const Vector3d ref = std::sqrt(inputs.lattice.rho_value(q)) * G * inputs.lattice.xi(q) / inputs.lattice.norm(q);
    for (Index s = 0; s < lin.sites(); ++s) {
      const Vector3i t = lin.coords(s) + inputs.lattice.offset(q);
      if ((t.array() < 0).any() || (t.array() >= 8).any()) continue;
      worst = std::max(worst, (Vector3d(dl(q, s, 0), dl(q, s, 1), dl(q, s, 2)) - ref).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("commensurability") {
  CHECK_THROWS_AS(check_commensurate(20, 8, 3), CommensurabilityError);
  CHECK_NOTHROW(check_commensurate(24, 8, 3));
  CHECK_THROWS_AS(reciprocal(0.3), CommensurabilityError);
  CHECK_THROWS_AS(reciprocal(0.0), CommensurabilityError);
  CHECK(reciprocal(0.25) == 4);
  const auto inputs = VerificationSetup{}.inputs(8);
  const auto m = sample(MagnetizationFamily::constant(Vector3d(0, 0, 1)), 20);
  CHECK_THROWS_AS(energy_eps(m, inputs, 1.0 / 3.0), CommensurabilityError);
}

TEST_CASE("magnetization families") {
  const auto h = MagnetizationFamily::helix(Vector3d(0, 0, 1));
  const Vector3d x(0.1, 0.2, 0.125);
  CHECK((h.value(x) - Vector3d(std::cos(kPi / 4), std::sin(kPi / 4), 0)).norm() < 1e-15);
  CHECK(std::abs(h.gradient(x).col(2).norm() - 2 * kPi) < 1e-13);
  CHECK(h.gradient(x).col(0).norm() == 0.0);

  const auto w = MagnetizationFamily::bloch_wall(Vector3d(1, 0, 0), 0.5, 0.1);
  const Vector3d c = w.value(Vector3d(0.5, 0.3, 0.3));
  CHECK(std::abs(c.norm() - 1.0) < 1e-15);
  // theta = pi/2 at the wall center
  const auto f = tangent_frame<double>(Vector3d(1, 0, 0));
  CHECK((c - f.t2).norm() < 1e-15);

  const auto e = MagnetizationFamily::expression({"x1", "0", "1"});
  CHECK((e.value(Vector3d(1, 0, 0)) - Vector3d(1, 0, 1) / std::sqrt(2.0)).norm() < 1e-15);
  CHECK_FALSE(e.has_gradient());
  CHECK_THROWS_AS(MagnetizationFamily::helix(Vector3d::Zero()), InputError);
}

TEST_CASE("finite-difference gradient converges at second order") {
  const auto fam = MagnetizationFamily::bloch_wall(Vector3d(1, 1, 0), 0.5, 0.2);
  auto err = [&](int M) {
    Magnetization m = sample(fam, M);
    const Magnetization exact = m;
    m.family.reset();
    double e = 0.0;
    for (Index s = 0; s < m.values.sites(); ++s)
      e = std::max(e, (m.gradient(s) - exact.gradient(s)).cwiseAbs().maxCoeff());
    return e;
  };
  const double e1 = err(16), e2 = err(32);
  CHECK(e2 < e1 / 3.0);
  CHECK_THROWS_AS(from_values(Field::constant(4, Vector3d(0, 0, 2))), InputError);
}

TEST_CASE("tangent gradient") {
  Matrix3d G = Matrix3d::Zero();
  G.col(0) = Vector3d(1, 0, 0.5);
  double defect = 0;
  const Matrix3d P = tangent_gradient(Vector3d(0, 0, 1), G, &defect);
  CHECK(defect == 0.5);
  CHECK(P.col(0) == Vector3d(1, 0, 0));
}

TEST_CASE("corrector field") {
  const auto inputs = one_mode_setup().inputs(4);
  const auto H = build(inputs);
  SUBCASE("constant m0") {
    const Vector3d m(0, 0.6, 0.8);
    const auto m0 = sample(MagnetizationFamily::constant(m), 8);
    const CorrectorField w(m0, H);
    const Field f = w.at(5);
    for (Index z = 0; z < f.sites(); ++z)
      CHECK((f.vec(z) - m.cross(Vector3d(H.v_kappa.vec(z)))).norm() < 1e-15);
  }
  SUBCASE("helix is tangent") {
    const auto m0 = sample(MagnetizationFamily::helix(Vector3d(0, 0, 1)), 8);
    CHECK(CorrectorField(m0, H).tangency_defect() <= 1e-8);
  }
  SUBCASE("constant coefficients") {
    VerificationSetup c;
    c.a = CoefficientSpec::constant(1.3);
    c.kappa = CoefficientSpec::constant(0.2);
    const auto Hc = build(c.inputs(4));
    const auto m0 = sample(MagnetizationFamily::helix(Vector3d(0, 1, 0)), 8);
    const CorrectorField w(m0, Hc);
    for (Index x = 0; x < m0.values.sites(); x += 37) CHECK(w.at(x).data().cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("recovery sequence") {
  const auto inputs = one_mode_setup().inputs(4);
  const auto m0 = sample(MagnetizationFamily::helix(Vector3d(0, 0, 1)), 8);
  SUBCASE("zero corrector keeps m0") {
    const auto H0 = zero_corrector_density(inputs);
    const auto me = recovery_sequence(m0, CorrectorField(m0, H0), 0.5);
    CHECK(me.values.data() == m0.values.data());
  }
  SUBCASE("unit length") {
    const auto H = build(inputs);
    const auto me = recovery_sequence(m0, CorrectorField(m0, H), 0.5);
    CHECK(unit_defect(me) <= 1e-15);
    CHECK((me.values.data() - m0.values.data()).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("homogenized energy closed forms") {
  SUBCASE("constant coefficients on a helix") {
    VerificationSetup c;
    c.a = CoefficientSpec::constant(1.7);
    const auto H = build(c.inputs(4));
    const auto m0 = sample(MagnetizationFamily::helix(Vector3d(0, 0, 1)), 8);
    const auto E = energy_homogenized(m0, H);
    CHECK(E.value == doctest::Approx(1.7 / 3.0 * 4 * kPi * kPi).epsilon(1e-12));
    CHECK(E.projection_defect < 1e-12);
  }
  SUBCASE("constant m0") {
    const auto H = build(one_mode_setup().inputs(4));
    const Vector3d m(1, 0, 0);
    const auto E = energy_homogenized(sample(MagnetizationFamily::constant(m), 8), H);
    CHECK(E.value == doctest::Approx(fhom_decomposed(H, m, Matrix3d::Zero())).epsilon(1e-13));
  }
}

TEST_CASE("two-scale energies") {
  const auto inputs = one_mode_setup().inputs(4);
  const auto H = build(inputs);
  const auto m0 = sample(MagnetizationFamily::helix(Vector3d(0, 0, 1)), 8);
  const auto plain = energy_two_scale_uncorrected(m0, inputs);
  double moment = 0.0;
  for (Index x = 0; x < m0.values.sites(); ++x) {
    const Vector3d m = m0.values.vec(x);
    moment += H.moment_part(m, tangent_gradient(m, m0.gradient(x)));
  }
  moment /= double(m0.values.sites());
  CHECK(std::abs(plain.F + plain.H - moment) < 1e-10 * std::abs(moment));
  CHECK(plain.distinct_points == 8);

  const CorrectorField w(m0, H);
  const auto corrected = energy_two_scale(w, inputs);
  const double hom = energy_homogenized(m0, H).value;
  const double direct = integrate_fhom_direct(m0, inputs).value;
  CHECK(std::abs(corrected.F + corrected.H - hom) <= 1e-6 * std::abs(hom));
  CHECK(std::abs(direct - hom) <= 1e-6 * std::abs(hom));
  CHECK(corrected.F + corrected.H <= plain.F + plain.H);
}

}
