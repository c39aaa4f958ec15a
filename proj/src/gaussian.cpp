#include "ssm/gaussian.hpp"

#include "ssm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssm {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_psd(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  if (!m.allFinite()) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  return ev.minCoeff() >= -tol * scale;
}

Matrix invert(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) throw SingularMatrix(what + " (not square)");
  if (m.size() == 0) return m;
  if (!m.allFinite()) throw SingularMatrix(what + " (non-finite entries)");
  Eigen::FullPivLU<Matrix> lu(m);
  lu.setThreshold(kSingularPivot);
  if (!lu.isInvertible()) throw SingularMatrix(what);
  return lu.inverse();
}

namespace {

Eigen::LDLT<Matrix> checked_ldlt(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) throw SingularMatrix(what + " (not square)");
  if (!m.allFinite()) throw SingularMatrix(what + " (non-finite entries)");
  Eigen::LDLT<Matrix> ldlt(symmetrize(m));
  if (ldlt.info() != Eigen::Success) throw SingularMatrix(what);
  const Vector d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0) || d.cwiseAbs().minCoeff() <= kSingularPivot * dmax) {
    throw SingularMatrix(what);
  }
  return ldlt;
}

}  // namespace

Matrix invert_symmetric(const Matrix& m, const std::string& what) {
  if (m.size() == 0) return m;
  auto ldlt = checked_ldlt(m, what);
  return symmetrize(ldlt.solve(Matrix::Identity(m.rows(), m.cols())));
}

double log_det_spd(const Matrix& m, const std::string& what) {
  auto ldlt = checked_ldlt(m, what);
  const Vector d = ldlt.vectorD();
  if (d.minCoeff() <= 0.0) throw SingularMatrix(what + " (not positive definite)");
  return d.array().log().sum();
}

Gaussian::Gaussian(Vector m, const Matrix& c) : mean(std::move(m)), cov(symmetrize(c)) {}

CanonicalGaussian::CanonicalGaussian(Vector e, const Matrix& l)
    : eta(std::move(e)), lambda(symmetrize(l)) {}

PartitionedGaussian PartitionedGaussian::split(const Gaussian& joint, Eigen::Index first_dim) {
  const Eigen::Index n = joint.dim();
  const Eigen::Index k = n - first_dim;
  return PartitionedGaussian{joint.mean.head(first_dim), joint.mean.tail(k),
                             joint.cov.topLeftCorner(first_dim, first_dim),
                             joint.cov.topRightCorner(first_dim, k),
                             joint.cov.bottomRightCorner(k, k)};
}

Gaussian PartitionedGaussian::assemble() const {
  const Eigen::Index n1 = mu1.size();
  const Eigen::Index n2 = mu2.size();
  Vector mean(n1 + n2);
  mean << mu1, mu2;
  Matrix cov(n1 + n2, n1 + n2);
  cov << s11, s12, s12.transpose(), s22;
  return Gaussian(std::move(mean), cov);
}

Gaussian condition(const PartitionedGaussian& pg, const Vector& a) {
  if (a.size() != pg.mu2.size()) {
    throw Error("condition: observed block has dimension " + std::to_string(a.size()) +
                ", expected " + std::to_string(pg.mu2.size()));
  }
  const Matrix s22_inv = invert_symmetric(pg.s22, "s22");
  const Matrix gain = pg.s12 * s22_inv;
  return Gaussian(pg.mu1 + gain * (a - pg.mu2), pg.s11 - gain * pg.s12.transpose());
}

CanonicalGaussian to_canonical(const Gaussian& g) {
  const Matrix lambda = invert_symmetric(g.cov, "covariance");
  return CanonicalGaussian(lambda * g.mean, lambda);
}

Gaussian from_canonical(const CanonicalGaussian& c) {
  const Matrix cov = invert_symmetric(c.lambda, "precision");
  return Gaussian(cov * c.eta, cov);
}

Matrix woodbury_inverse(const Matrix& a, const Matrix& b, const Matrix& c) {
  const Matrix a_inv = invert(a, "A");
  const Matrix b_inv = invert(b, "B");
  const Matrix a_inv_c = a_inv * c;
  const Matrix inner = invert(b_inv + c.transpose() * a_inv_c, "B^-1 + C^T A^-1 C");
  return a_inv - a_inv_c * inner * c.transpose() * a_inv;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Returns (mass, first, second moment) of X restricted to (y, z).
struct Moments {
  double mass = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
};

Moments moments_yz(const DiscreteJoint& j, std::size_t iy, std::size_t iz) {
  Moments m;
  for (std::size_t ix = 0; ix < j.x_values.size(); ++ix) {
    const double p = j.p(ix, iy, iz);
    m.mass += p;
    m.m1 += p * j.x_values[ix];
    m.m2 += p * j.x_values[ix] * j.x_values[ix];
  }
  return m;
}

}  // namespace

std::vector<double> conditional_mean_given_z(const DiscreteJoint& j) {
  std::vector<double> out(j.nz, kNaN);
  for (std::size_t iz = 0; iz < j.nz; ++iz) {
    double mass = 0.0, m1 = 0.0;
    for (std::size_t iy = 0; iy < j.ny; ++iy) {
      const auto m = moments_yz(j, iy, iz);
      mass += m.mass;
      m1 += m.m1;
    }
    if (mass > 0.0) out[iz] = m1 / mass;
  }
  return out;
}

std::vector<double> iterated_mean_given_z(const DiscreteJoint& j) {
  std::vector<double> out(j.nz, kNaN);
  for (std::size_t iz = 0; iz < j.nz; ++iz) {
    double mass = 0.0, acc = 0.0;
    for (std::size_t iy = 0; iy < j.ny; ++iy) {
      const auto m = moments_yz(j, iy, iz);
      if (m.mass <= 0.0) continue;
      acc += m.mass * (m.m1 / m.mass);
      mass += m.mass;
    }
    if (mass > 0.0) out[iz] = acc / mass;
  }
  return out;
}

std::vector<double> conditional_var_given_z(const DiscreteJoint& j) {
  std::vector<double> out(j.nz, kNaN);
  for (std::size_t iz = 0; iz < j.nz; ++iz) {
    double mass = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t iy = 0; iy < j.ny; ++iy) {
      const auto m = moments_yz(j, iy, iz);
      mass += m.mass;
      m1 += m.m1;
      m2 += m.m2;
    }
    if (mass > 0.0) {
      const double mean = m1 / mass;
      out[iz] = m2 / mass - mean * mean;
    }
  }
  return out;
}

std::vector<double> total_variance_given_z(const DiscreteJoint& j) {
  std::vector<double> out(j.nz, kNaN);
  for (std::size_t iz = 0; iz < j.nz; ++iz) {
    double mass = 0.0, e_mean = 0.0, e_mean2 = 0.0, e_var = 0.0;
    for (std::size_t iy = 0; iy < j.ny; ++iy) {
      const auto m = moments_yz(j, iy, iz);
      if (m.mass <= 0.0) continue;
      const double mean = m.m1 / m.mass;
      const double var = m.m2 / m.mass - mean * mean;
      mass += m.mass;
      e_mean += m.mass * mean;
      e_mean2 += m.mass * mean * mean;
      e_var += m.mass * var;
    }
    if (mass > 0.0) {
      const double mu = e_mean / mass;
      out[iz] = (e_mean2 / mass - mu * mu) + e_var / mass;
    }
  }
  return out;
}

}  // namespace ssm
