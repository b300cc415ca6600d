#pragma once

// Indistinguishability and disturbance measures.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "qnd/errors.hpp"
#include "qnd/hilbert.hpp"

namespace qnd {

// Tr sqrt(sqrt(rho1) rho0 sqrt(rho1)), clamped to [0, 1].
inline double uhlmann_indistinguishability(const CMatrix& rho0, const CMatrix& rho1) {
  if (rho0.rows() != rho1.rows() || rho0.cols() != rho1.cols() || rho0.rows() != rho0.cols())
    throw DomainError("uhlmann_indistinguishability: dimension mismatch");
  const CMatrix s1 = matrix_sqrt_psd(rho1);
  CMatrix inner = s1 * rho0 * s1;
  inner = 0.5 * (inner + inner.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(inner, Eigen::EigenvaluesOnly);
  double f = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) f += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return std::clamp(f, 0.0, 1.0);
}

inline double uhlmann_indistinguishability(const DensityState& rho0, const DensityState& rho1) {
  if (rho0.dims != rho1.dims) throw DomainError("uhlmann_indistinguishability: dimension mismatch");
  return uhlmann_indistinguishability(rho0.matrix, rho1.matrix);
}

// Same quantity for rho_x = V_x V_x^dag given the factors V_x (columns are
// unnormalized branch vectors): the trace norm of V0^dag V1.
inline double uhlmann_from_factors(const CMatrix& v0, const CMatrix& v1) {
  if (v0.rows() != v1.rows()) throw DomainError("uhlmann_from_factors: dimension mismatch");
  const CMatrix overlap = v0.adjoint() * v1;
  Eigen::JacobiSVD<CMatrix> svd(overlap);
  return std::clamp(svd.singularValues().sum(), 0.0, 1.0);
}

// Cavity factor of a joint pure state: column q is the cavity vector
// conditioned on qubit level q (unnormalized).
inline CMatrix cavity_factor(const JointState& psi) { return as_branches(psi).transpose(); }

// ---------------------------------------------------------------------------
// Single-mode Gaussian states described by raw moments <a>, <a^dag a>, <a^2>.

struct GaussianMode {
  cplx mean{0.0, 0.0};
  double n = 0.0;
  cplx a2{0.0, 0.0};

  // Quadrature covariance with vacuum = I/2, x = (a + a^dag)/sqrt2.
  Eigen::Matrix2d covariance() const {
    const double nc = n - std::norm(mean);
    const cplx mc = a2 - mean * mean;
    Eigen::Matrix2d v;
    v << nc + 0.5 + mc.real(), mc.imag(), mc.imag(), nc + 0.5 - mc.real();
    return v;
  }
};

// Uhlmann indistinguishability of two single-mode Gaussian states.
inline double gaussian_uhlmann(const GaussianMode& g0, const GaussianMode& g1) {
  const Eigen::Matrix2d v0 = g0.covariance();
  const Eigen::Matrix2d v1 = g1.covariance();
  const cplx dm = g0.mean - g1.mean;
  const Eigen::Vector2d d(std::sqrt(2.0) * dm.real(), std::sqrt(2.0) * dm.imag());
  const Eigen::Matrix2d s = v0 + v1;
  const double det_s = s.determinant();
  if (!(det_s > 0.0)) return 0.0;
  const double delta = std::max(0.0, 4.0 * (v0.determinant() - 0.25) * (v1.determinant() - 0.25));
  const double denom = std::sqrt(det_s + delta) - std::sqrt(delta);
  const double exponent = -0.5 * d.dot(s.inverse() * d);
  const double f2 = std::exp(exponent) / denom;
  return std::clamp(std::sqrt(std::max(0.0, f2)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Schmidt form of the final joint state for an initial qubit level x:
//   |Psi_x> = sqrt(1-eps)|phi+>|psi+> + e^{i theta} sqrt(eps)|phi->|psi->,
//   |phi+> = sqrt(1-q)|x> + e^{i phi} sqrt(q)|1-x>,
//   |phi-> = sqrt(q)|x> - e^{i phi} sqrt(1-q)|1-x>   (orthogonal complement).

struct SchmidtDecomposition {
  double epsilon = 0.0;
  double q = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  CVector qubit_major, qubit_minor;
  CVector cavity_major, cavity_minor;
  bool degenerate = false;  // equal Schmidt weights; major branch chosen by overlap with |x>
  double flip_probability = 0.0;
};

inline SchmidtDecomposition schmidt_disturbance(const JointState& psi, int initial_qubit_index) {
  if (psi.dims.qubit_levels != 2) throw DomainError("schmidt_disturbance requires a two-level qubit");
  if (initial_qubit_index != 0 && initial_qubit_index != 1) throw DomainError("initial qubit index must be 0 or 1");
  const int x = initial_qubit_index;
  const CMatrix m = as_branches(psi);  // 2 x N
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const double total = s.squaredNorm();
  CVector u_major = svd.matrixU().col(0);
  CVector u_minor = svd.matrixU().col(1);
  SchmidtDecomposition out;
  out.epsilon = s(1) * s(1) / total;
  if (std::abs(s(0) * s(0) - s(1) * s(1)) < 1e-9 * total) {
    out.degenerate = true;
    if (std::norm(u_minor(x)) > std::norm(u_major(x))) std::swap(u_major, u_minor);
  }
  // Gauge: <x|phi+> real and non-negative.
  if (std::abs(u_major(x)) > 0.0) u_major *= std::polar(1.0, -std::arg(u_major(x)));
  out.q = std::norm(u_major(1 - x));
  out.phi = std::arg(u_major(1 - x));
  CVector minor(2);
  minor(x) = std::sqrt(out.q);
  minor(1 - x) = -std::polar(std::sqrt(std::max(0.0, 1.0 - out.q)), out.phi);
  out.qubit_major = u_major;
  out.qubit_minor = minor;
  const CVector c_major = m.transpose() * u_major.conjugate();
  const CVector c_minor = m.transpose() * minor.conjugate();
  out.cavity_major = c_major / std::max(c_major.norm(), 1e-300);
  // theta absorbs the phase of the minor cavity vector's largest component.
  if (c_minor.norm() > 0.0) {
    Eigen::Index k;
    c_minor.cwiseAbs().maxCoeff(&k);
    out.theta = std::arg(c_minor(k));
    out.cavity_minor = c_minor * std::polar(1.0 / c_minor.norm(), -out.theta);
  } else {
    out.cavity_minor = CVector::Zero(c_minor.size());
  }
  out.flip_probability = out.epsilon + out.q - 2.0 * out.epsilon * out.q;
  return out;
}

}  // namespace qnd
