#pragma once

// Q x Q periodic coefficients a(z, z') and kappa(z, z').

#include <Eigen/Core>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "nlhom/expression.hpp"
#include "nlhom/periodic_cell.hpp"

namespace nlhom {

class CoefficientSpec {
 public:
  enum class Kind { constant, separable, fourier, expression };

  /// mean + sum_m [c_m cos(2 pi (k.z + kp.z')) + s_m sin(2 pi (k.z + kp.z'))]
  struct FourierMode {
    Eigen::Vector3i k = Eigen::Vector3i::Zero();
    Eigen::Vector3i kp = Eigen::Vector3i::Zero();
    double cos_amp = 0.0;
    double sin_amp = 0.0;
  };

  static CoefficientSpec constant(double value);
  /// f(z) g(z'), f over z1..z3 and g over zp1..zp3.
  static CoefficientSpec separable(const std::string& f, const std::string& g);
  static CoefficientSpec fourier(double mean, std::vector<FourierMode> modes);
  static CoefficientSpec expression(const std::string& source);

  /// Periodic evaluation; both arguments are wrapped into [0,1)^3 first.
  double operator()(const Eigen::Vector3d& z, const Eigen::Vector3d& zp) const;
  /// Evaluation at grid nodes z = i/n, z' = i'/n given as site indices.
  double at_nodes(Index site, Index site_p, int n) const;

  Kind kind() const noexcept { return kind_; }
  bool is_constant() const noexcept { return kind_ == Kind::constant; }
  double constant_value() const noexcept { return mean_; }
  const std::vector<FourierMode>& modes() const noexcept { return modes_; }
  double fourier_mean() const noexcept { return mean_; }

  double a0_declared = 0.0;  ///< declared lower bound (symmetric coefficient only)
  double sup_bound = std::numeric_limits<double>::infinity();
  std::string name = "coefficient";

  /// Copy with every value multiplied by `factor`.
  CoefficientSpec scaled(double factor) const;

 private:
  Kind kind_ = Kind::constant;
  double mean_ = 0.0;
  double factor_ = 1.0;
  std::vector<FourierMode> modes_;
  std::shared_ptr<const Expression> f_, g_;
};

double eval_coeff(const CoefficientSpec& spec, const Eigen::Vector3d& z, const Eigen::Vector3d& zp);

enum class CoefficientRole { symmetric, antisymmetric };

struct H1Report {
  double min_sample = 0;
  double max_sample = 0;
  double max_abs_sample = 0;
  double symmetry_defect = 0;  ///< max |c(z,z') - c(z',z)| over sampled pairs
  bool pass = false;
  Index offending_site = -1;   ///< first failing pair (z, z + xi_q), if any
  Eigen::Vector3i offending_offset = Eigen::Vector3i::Zero();
  std::string message;
};

/// Samples every (z, z + xi_q) pair of the cell grid and lattice.
H1Report check_h1(const CoefficientSpec& spec, const XiLattice& lattice,
                  CoefficientRole role = CoefficientRole::symmetric);
/// As check_h1, throwing H1Error on failure.
H1Report enforce_h1(const CoefficientSpec& spec, const XiLattice& lattice,
                    CoefficientRole role = CoefficientRole::symmetric);

/// n^-3 sum_z c(z, z + xi_q).
double node_average(const CoefficientSpec& spec, const XiLattice& lattice, std::size_t q);

struct AveragedKernels {
  std::vector<double> a_mean;                 ///< z-average of a per node
  std::vector<double> kappa_mean;             ///< z-average of kappa per node
  std::vector<double> rho_bar;                ///< rho(xi_q) * a_mean
  std::vector<Eigen::Vector3d> nu_bar;        ///< nu(xi_q) * kappa_mean
};

AveragedKernels averaged_kernels(const CoefficientSpec& a, const CoefficientSpec& kappa,
                                 const XiLattice& lattice);

}  // namespace nlhom
