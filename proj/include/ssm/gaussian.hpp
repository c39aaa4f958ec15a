#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace ssm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest eigenvalue accepted as "positive semi-definite", relative to the
/// largest eigenvalue magnitude (floored at 1).
inline constexpr double kPsdTolerance = 1e-10;

/// Relative pivot below which a factorization is declared singular.
inline constexpr double kSingularPivot = 1e-12;

/// (M + M^T) / 2
Matrix symmetrize(const Matrix& m);

bool is_symmetric(const Matrix& m, double tol = 1e-10);

/// True when every eigenvalue is >= -kPsdTolerance * max(1, max|eig|).
bool is_psd(const Matrix& m, double tol = kPsdTolerance);

/// Inverse through a fully pivoted LU. Throws SingularMatrix naming `what`
/// when a pivot falls below kSingularPivot relative to the largest one.
Matrix invert(const Matrix& m, const std::string& what);

/// Inverse of a symmetric matrix through LDL^T with the same pivot rule.
/// The result is symmetrized.
Matrix invert_symmetric(const Matrix& m, const std::string& what);

/// log|det| of a symmetric positive definite matrix (LDL^T).
double log_det_spd(const Matrix& m, const std::string& what);

/// Moment parameterization N(mean, cov). The covariance is symmetrized on
/// construction.
struct Gaussian {
  Vector mean;
  Matrix cov;

  Gaussian() = default;
  Gaussian(Vector m, const Matrix& c);

  Eigen::Index dim() const { return mean.size(); }
};

/// Canonical (information) parameterization: lambda = cov^-1,
/// eta = cov^-1 mean.
struct CanonicalGaussian {
  Vector eta;
  Matrix lambda;

  CanonicalGaussian() = default;
  CanonicalGaussian(Vector e, const Matrix& l);

  Eigen::Index dim() const { return eta.size(); }
};

/// Joint Gaussian over (y1, y2) stored blockwise; s21 = s12^T is implied.
struct PartitionedGaussian {
  Vector mu1;
  Vector mu2;
  Matrix s11;
  Matrix s12;
  Matrix s22;

  /// Splits a full joint at `first_dim`.
  static PartitionedGaussian split(const Gaussian& joint, Eigen::Index first_dim);

  Gaussian assemble() const;
};

/// Distribution of y1 given y2 = a.
Gaussian condition(const PartitionedGaussian& pg, const Vector& a);

CanonicalGaussian to_canonical(const Gaussian& g);
Gaussian from_canonical(const CanonicalGaussian& c);

/// (A + C B C^T)^-1 evaluated as A^-1 - A^-1 C (B^-1 + C^T A^-1 C)^-1 C^T A^-1.
Matrix woodbury_inverse(const Matrix& a, const Matrix& b, const Matrix& c);

// Discrete-support helpers used to check the tower equalities numerically.
// `pmf` is indexed [x][y][z] and need not be normalized.
struct DiscreteJoint {
  std::vector<double> x_values;
  std::size_t ny = 0;
  std::size_t nz = 0;
  std::vector<double> pmf;  // row-major: ((ix * ny) + iy) * nz + iz

  double p(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return pmf[(ix * ny + iy) * nz + iz];
  }
};

/// E[X | Z = z] for every z. Entries with zero mass are NaN.
std::vector<double> conditional_mean_given_z(const DiscreteJoint& j);

/// E[ E[X | Y, Z] | Z = z ] for every z.
std::vector<double> iterated_mean_given_z(const DiscreteJoint& j);

/// Var[X | Z = z] for every z.
std::vector<double> conditional_var_given_z(const DiscreteJoint& j);

/// Var[E[X|Y,Z] | Z] + E[Var[X|Y,Z] | Z] for every z.
std::vector<double> total_variance_given_z(const DiscreteJoint& j);

}  // namespace ssm
