#include <doctest.h>

#include <cmath>

#include "nlhom/periodic_cell.hpp"
#include "nlhom/verification.hpp"

using namespace nlhom;
using Eigen::Vector3d;
using Eigen::Vector3i;

namespace {

constexpr double kPi = 3.14159265358979323846;

XiLattice bump_lattice(int n) {
  return XiLattice::build(n, 1.0, KernelSpec::bump_quadratic(1.0, NormalizationMode::quadrature),
                          VectorKernelSpec::axial(RadialProfile{}, NormalizationMode::quadrature));
}

Field cosine_mode(int n, const Vector3i& k) {
  Field f(n, 1);
  for (Index s = 0; s < f.sites(); ++s) f(s, 0) = std::cos(2 * kPi * double(k.dot(f.coords(s))) / n);
  return f;
}

}  // namespace

TEST_SUITE("periodic_cell") {

TEST_CASE("shift identities") {
  Rng rng(3);
  const Field f = random_field(rng, 4, 3);
  CHECK(shift(f, Vector3i(0, 0, 0)).data() == f.data());
  CHECK(shift(f, Vector3i(4, 0, -8)).data() == f.data());
  const Vector3i j(1, -2, 3), k(-3, 2, 5);
  CHECK(shift(shift(f, j), -j).data() == f.data());
  CHECK(shift(shift(f, j), k).data() == shift(f, j + k).data());
  const Field g = shift(f, j);
  CHECK(g(g.site(0, 0, 0), 1) == f(f.site(1, 2, 3), 1));
}

TEST_CASE("mean projection") {
  Rng rng(4);
  const Field f = project_mean_zero(random_field(rng, 3, 2));
  CHECK(f.mean_zero);
  CHECK(std::abs(mean(f)[0]) < 1e-16);
  CHECK(std::abs(mean(f)[1]) < 1e-16);
  Eigen::VectorXd c(2);
  c << 1.5, -2.0;
  CHECK(mean(Field::constant(3, c)) == c);
}

TEST_CASE("lattice nodes") {
  const auto lat = bump_lattice(4);
  CHECK(lat.weight() == 1.0 / 64.0);
  std::size_t count = 0;
  for (int a = -4; a <= 4; ++a)
    for (int b = -4; b <= 4; ++b)
      for (int c = -4; c <= 4; ++c)
        if (a * a + b * b + c * c > 0 && a * a + b * b + c * c <= 16) ++count;
  CHECK(lat.size() == count);
  for (std::size_t q = 0; q < lat.size(); ++q) {
    CHECK(lat.norm(q) <= 1.0 + 1e-12);
    CHECK((lat.xi(q) - lat.offset(q).cast<double>() / 4.0).norm() == 0.0);
    const Vector3i j = lat.offset(q);
    CHECK(lat.trivial_shift(q) == (j.x() % 4 == 0 && j.y() % 4 == 0 && j.z() % 4 == 0));
  }
}

TEST_CASE("difference operator") {
  const auto lat = bump_lattice(4);
  SUBCASE("constants are annihilated") {
    const Field c = Field::constant(4, Vector3d(0.3, -1, 2));
    CHECK(s_rho_apply(c, lat).data.cwiseAbs().maxCoeff() == 0.0);
    CHECK(norm_rho(c, lat) == 0.0);
  }
  SUBCASE("sinusoid") {
    const Field w = cosine_mode(4, {1, 0, 0});
    const NodeFamily u = s_rho_apply(w, lat);
    double worst = 0.0;
    for (std::size_t q = 0; q < lat.size(); ++q)
      for (Index s = 0; s < w.sites(); ++s) {
        const Vector3i i = w.coords(s);
        const double ref = std::sqrt(lat.rho_value(q)) *
                           (std::cos(2 * kPi * (i.x() + lat.offset(q).x()) / 4.0) -
                            std::cos(2 * kPi * i.x() / 4.0)) / lat.norm(q);
        worst = std::max(worst, std::abs(u(q, s, 0) - ref));
      }
    CHECK(worst < 1e-14);
  }
}

TEST_CASE("adjoint matches an independent double sum") {
  const auto lat = bump_lattice(3);
  Rng rng(9);
  const Field w = random_field(rng, 3, 3);
  const NodeFamily u = random_family(rng, 3, 3, lat.size());
  const Field su = s_rho_adjoint_apply(u, lat);
  const int n = 3;
  const double h3 = lat.weight();
  double worst = 0.0, lhs = 0.0, rhs = 0.0;
  for (Index s = 0; s < w.sites(); ++s) {
    Vector3d ref = Vector3d::Zero();
    for (std::size_t q = 0; q < lat.size(); ++q) {
      const Index back = shifted_site(s, -lat.offset(q), n);
      const Index fwd = shifted_site(s, lat.offset(q), n);
      const double c = std::sqrt(lat.rho_value(q)) / lat.norm(q);
      for (int k = 0; k < 3; ++k) {
        ref[k] += h3 * c * (u(q, back, k) - u(q, s, k));
        lhs += h3 * c * (w(fwd, k) - w(s, k)) * u(q, s, k);
      }
    }
    worst = std::max(worst, (ref - su.vec(s)).cwiseAbs().maxCoeff());
    rhs += w.vec(s).dot(su.vec(s));
  }
  CHECK(worst < 1e-13);
  lhs /= double(w.sites());
  rhs /= double(w.sites());
  CHECK(std::abs(lhs - rhs) < 1e-13 * std::max(1.0, std::abs(lhs)));
  CHECK(std::abs(inner(s_rho_apply(w, lat), u, lat) - inner(w, su)) < 1e-13);
}

TEST_CASE("adjoint of constant-per-node families vanishes") {
  const auto lat = bump_lattice(4);
  NodeFamily u(4, 3, lat.size());
  for (std::size_t q = 0; q < lat.size(); ++q)
    for (Index s = 0; s < u.sites(); ++s)
      for (int k = 0; k < 3; ++k) u(q, s, k) = double(q % 7) - 1.5 * k;
  CHECK(s_rho_adjoint_apply(u, lat).data().cwiseAbs().maxCoeff() < 1e-14);
  CHECK(s_rho_adjoint_apply(NodeFamily(4, 3, lat.size()), lat).data().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("norm_rho") {
  const auto lat = bump_lattice(4);
  Rng rng(5);
  const Field w = random_field(rng, 4, 3);
  const NodeFamily u = s_rho_apply(w, lat);
  const double sq = norm_rho_squared(w, lat);
  CHECK(std::abs(inner(u, u, lat) - sq) < 1e-13 * sq);
  CHECK(norm_rho(w, lat) == std::sqrt(sq));

  Field w2 = w;
  w2.data() *= -2.5;
  CHECK(norm_rho(w2, lat) == doctest::Approx(2.5 * norm_rho(w, lat)).epsilon(1e-14));

  // single mode: n^-3 sum_z (cos(t + p) - cos t)^2 = 1 - cos p
  const Vector3i k(1, 0, 0);
  double ref = 0.0;
  for (std::size_t q = 0; q < lat.size(); ++q) {
    const double p = 2 * kPi * double(k.dot(lat.offset(q))) / 4.0;
    ref += lat.weight() * lat.rho_value(q) / (lat.norm(q) * lat.norm(q)) * (1 - std::cos(p));
  }
  CHECK(norm_rho_squared(cosine_mode(4, k), lat) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("norm_rho is positive on nonzero mean-zero fields") {
  const auto lat = bump_lattice(3);
  Rng rng(6);
  for (int t = 0; t < 5; ++t) {
    const Field w = project_mean_zero(random_field(rng, 3, 1));
    CHECK(norm_rho(w, lat) > 0.1 * l2_norm(w));
  }
}

TEST_CASE("tangent frames") {
  SUBCASE("coordinate axes") {
    const auto f3 = tangent_frame<double>(Vector3d(0, 0, 1));
    CHECK(f3.t1 == Vector3d(1, 0, 0));
    CHECK(f3.t2 == Vector3d(0, 1, 0));
    const auto f1 = tangent_frame<double>(Vector3d(1, 0, 0));
    CHECK(f1.t1 == Vector3d(0, 1, 0));
    CHECK(f1.t2 == Vector3d(0, 0, 1));
  }
  SUBCASE("random directions") {
    Rng rng(12);
    for (int t = 0; t < 100; ++t) {
      const Vector3d s = rng.unit_vector();
      const auto f = tangent_frame<double>(s);
      CHECK(std::abs(f.t1.norm() - 1) < 1e-14);
      CHECK(std::abs(f.t2.norm() - 1) < 1e-14);
      CHECK(std::abs(f.t1.dot(f.t2)) < 1e-14);
      CHECK(std::abs(f.t1.dot(s)) < 1e-14);
      CHECK(std::abs(f.t2.dot(s)) < 1e-14);
      Eigen::Matrix3d B;
      B << f.t1, f.t2, s;
      CHECK(B.determinant() == doctest::Approx(1.0).epsilon(1e-13));
      // deterministic
      CHECK(tangent_frame<double>(s).t1 == f.t1);
    }
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(tangent_frame<double>(Vector3d(0, 0, 1e-9)), InputError);
    CHECK_THROWS_AS(tangent_frame<double>(Vector3d(0, 0, 2)), DomainError);
    CHECK_THROWS_AS(tangent_frame<double>(Vector3d(NAN, 0, 1)), InputError);
  }
}

TEST_CASE("field construction") {
  CHECK_THROWS_AS(Field(0, 3), InputError);
  CHECK_THROWS_AS(Field(2, 3, Eigen::VectorXd::Zero(5)), InputError);
  Field f(2, 3);
  f.vec(f.site(1, 0, 1)) = Vector3d(1, 2, 3);
  CHECK(f.data()[3 * (1 + 2 * (0 + 2 * 1)) + 2] == 3.0);
  CHECK(f.component(1)(f.site(1, 0, 1), 0) == 2.0);
}

}
