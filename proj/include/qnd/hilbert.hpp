#pragma once

// Truncated Hilbert space of one qubit (or multi-level transmon) and one
// cavity mode. Joint basis index is qubit-major: |q>|n> -> q * cutoff + n.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qnd/errors.hpp"

namespace qnd {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

enum class Subsystem { qubit, cavity };

struct HilbertDims {
  int qubit_levels = 2;
  int cavity_cutoff = 2;

  int joint() const { return qubit_levels * cavity_cutoff; }
  int index(int q, int n) const { return q * cavity_cutoff + n; }

  void validate() const {
    if (qubit_levels < 2) throw DomainError("qubit_levels must be >= 2");
    if (cavity_cutoff < 2) throw DomainError("cavity_cutoff must be >= 2");
  }

  bool operator==(const HilbertDims&) const = default;
};

struct JointState {
  CVector amplitudes;
  HilbertDims dims;
  double time = 0.0;
};

struct DensityState {
  CMatrix matrix;
  HilbertDims dims;
  double time = 0.0;

  static DensityState from_pure(const JointState& psi) {
    return {psi.amplitudes * psi.amplitudes.adjoint(), psi.dims, psi.time};
  }
};

// Initial cavity state D(alpha) S(xi) |0>, xi = r e^{i theta}.
struct CavityStateSpec {
  cplx alpha{0.0, 0.0};
  double r = 0.0;
  double theta = 0.0;

  double mean_photons() const {
    const double s = std::sinh(r);
    return std::norm(alpha) + s * s;
  }
};

inline constexpr double kTailMassTolerance = 1e-10;
inline constexpr double kTopLevelTolerance = 1e-6;

// ceil(|alpha|^2 + 8 |alpha| e^r + 25)
inline int default_cavity_cutoff(const CavityStateSpec& spec) {
  const double a = std::abs(spec.alpha);
  return static_cast<int>(std::ceil(a * a + 8.0 * a * std::exp(spec.r) + 25.0));
}

// ---------------------------------------------------------------------------
// Operators

// Truncated annihilation operator on a single subsystem: <n-1|a|n> = sqrt(n).
inline SparseMatrix ladder(int levels) {
  SparseMatrix a(levels, levels);
  a.reserve(Eigen::VectorXi::Constant(levels, 1));
  for (int n = 1; n < levels; ++n) a.insert(n - 1, n) = std::sqrt(static_cast<double>(n));
  a.makeCompressed();
  return a;
}

inline SparseMatrix identity(int n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (int i = 0; i < a.outerSize(); ++i)
    for (SparseMatrix::InnerIterator ia(a, i); ia; ++ia)
      for (int j = 0; j < b.outerSize(); ++j)
        for (SparseMatrix::InnerIterator ib(b, j); ib; ++ib)
          trips.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                             static_cast<int>(ia.col() * b.cols() + ib.col()),
                             ia.value() * ib.value());
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

// Lift a single-subsystem operator to the joint space.
inline SparseMatrix embed(const SparseMatrix& op, const HilbertDims& dims, Subsystem where) {
  return where == Subsystem::qubit ? kron(op, identity(dims.cavity_cutoff))
                                   : kron(identity(dims.qubit_levels), op);
}

// Local annihilation operator of the requested subsystem. For a 2-level
// qubit this is sigma_minus = |0><1| with |0> the lower state.
inline SparseMatrix annihilation_op(const HilbertDims& dims, Subsystem which) {
  dims.validate();
  return ladder(which == Subsystem::qubit ? dims.qubit_levels : dims.cavity_cutoff);
}

inline SparseMatrix number_op(int levels) {
  SparseMatrix n(levels, levels);
  for (int k = 0; k < levels; ++k) n.insert(k, k) = static_cast<double>(k);
  n.makeCompressed();
  return n;
}

// Action of exp(G) on v by scaled Taylor steps (||G/s||_1 <= 1).
inline CVector expm_multiply(const SparseMatrix& gen, CVector v) {
  double norm1 = 0.0;
  {
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(gen.cols());
    for (int i = 0; i < gen.outerSize(); ++i)
      for (SparseMatrix::InnerIterator it(gen, i); it; ++it) colsum(it.col()) += std::abs(it.value());
    norm1 = colsum.size() ? colsum.maxCoeff() : 0.0;
  }
  const int steps = std::max(1, static_cast<int>(std::ceil(norm1)));
  const double inv = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    CVector term = v;
    CVector acc = v;
    for (int k = 1; k < 80; ++k) {
      term = (gen * term) * (inv / k);
      acc += term;
      if (term.norm() <= 1e-17 * acc.norm()) break;
    }
    v = std::move(acc);
  }
  return v;
}

// ---------------------------------------------------------------------------
// States

inline CVector basis_state(int levels, int k) {
  if (k < 0 || k >= levels) throw DomainError("basis index out of range");
  CVector v = CVector::Zero(levels);
  v(k) = 1.0;
  return v;
}

namespace detail {

inline void check_tail_and_truncate(CVector& v, int cutoff) {
  const double total = v.squaredNorm();
  const double kept = v.head(cutoff).squaredNorm();
  if (total - kept > kTailMassTolerance * total)
    throw TruncationError("cavity cutoff " + std::to_string(cutoff) +
                          " leaves tail mass " + std::to_string((total - kept) / total));
  CVector out = v.head(cutoff);
  out /= std::sqrt(kept);
  v = std::move(out);
}

}  // namespace detail

inline CVector coherent_state(cplx alpha, int cutoff) {
  if (cutoff < 2) throw DomainError("cutoff must be >= 2");
  // Generate past the cutoff so the discarded tail can be measured.
  const int extended = cutoff + static_cast<int>(std::ceil(10.0 * std::abs(alpha) + 40.0));
  CVector c(extended);
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < extended; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  detail::check_tail_and_truncate(c, cutoff);
  return c;
}

// D(alpha) S(xi) |0>, built on an internal cutoff enlarged by 25% and then
// truncated. With this ordering <a> = alpha exactly.
inline CVector squeezed_coherent_state(const CavityStateSpec& spec, int cutoff) {
  if (spec.r < 0) throw DomainError("squeezing magnitude must be >= 0");
  if (spec.r == 0.0) return coherent_state(spec.alpha, cutoff);
  const int big = static_cast<int>(std::ceil(1.25 * cutoff));
  const SparseMatrix a = ladder(big);
  const SparseMatrix ad = SparseMatrix(a.adjoint());
  const cplx xi = std::polar(spec.r, spec.theta);
  const SparseMatrix a2 = a * a;
  const SparseMatrix ad2 = ad * ad;
  const SparseMatrix squeeze_gen = (std::conj(xi) * a2 - xi * ad2) * 0.5;
  CVector v = expm_multiply(squeeze_gen, basis_state(big, 0));
  if (spec.alpha != cplx(0.0, 0.0)) {
    const SparseMatrix disp_gen = spec.alpha * ad - std::conj(spec.alpha) * a;
    v = expm_multiply(disp_gen, std::move(v));
  }
  detail::check_tail_and_truncate(v, cutoff);
  return v;
}

// Smallest cutoff, starting from default_cavity_cutoff and growing in steps
// of 8, for which the initial state passes the tail-mass check.
inline int fitting_cavity_cutoff(const CavityStateSpec& spec, int minimum = 0) {
  int n = std::max(minimum, default_cavity_cutoff(spec));
  for (int tries = 0; tries < 64; ++tries, n += 8) {
    try {
      squeezed_coherent_state(spec, n);
      return n;
    } catch (const TruncationError&) {
    }
  }
  throw TruncationError("no cavity cutoff up to " + std::to_string(n) + " holds the initial state");
}

inline JointState tensor_state(const CVector& qubit, const CVector& cavity, double time = 0.0) {
  HilbertDims dims{static_cast<int>(qubit.size()), static_cast<int>(cavity.size())};
  dims.validate();
  JointState out{CVector(dims.joint()), dims, time};
  for (int q = 0; q < dims.qubit_levels; ++q)
    out.amplitudes.segment(q * dims.cavity_cutoff, dims.cavity_cutoff) = qubit(q) * cavity;
  return out;
}

// Rows are qubit levels, columns Fock states.
inline Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
as_branches(const JointState& psi) {
  return {psi.amplitudes.data(), psi.dims.qubit_levels, psi.dims.cavity_cutoff};
}

// ---------------------------------------------------------------------------
// Reductions

inline CMatrix partial_trace(const JointState& psi, Subsystem keep) {
  const auto m = as_branches(psi);
  if (keep == Subsystem::qubit) return m * m.adjoint();
  return m.transpose() * m.conjugate();
}

inline CMatrix partial_trace(const DensityState& rho, Subsystem keep) {
  const int nq = rho.dims.qubit_levels;
  const int nc = rho.dims.cavity_cutoff;
  if (keep == Subsystem::cavity) {
    CMatrix out = CMatrix::Zero(nc, nc);
    for (int q = 0; q < nq; ++q) out += rho.matrix.block(q * nc, q * nc, nc, nc);
    return out;
  }
  CMatrix out(nq, nq);
  for (int p = 0; p < nq; ++p)
    for (int q = 0; q < nq; ++q) out(p, q) = rho.matrix.block(p * nc, q * nc, nc, nc).trace();
  return out;
}

// Population of the top two Fock levels (worst case over qubit levels).
inline double top_fock_population(const JointState& psi) {
  const auto m = as_branches(psi);
  const int n = psi.dims.cavity_cutoff;
  return m.rightCols(std::min(2, n)).squaredNorm();
}

inline double top_fock_population(const DensityState& rho) {
  const int nq = rho.dims.qubit_levels;
  const int nc = rho.dims.cavity_cutoff;
  double p = 0.0;
  for (int q = 0; q < nq; ++q)
    for (int k = std::max(0, nc - 2); k < nc; ++k) p += rho.matrix(q * nc + k, q * nc + k).real();
  return p;
}

template <class State>
void check_truncation(const State& s, double tol = kTopLevelTolerance) {
  const double p = top_fock_population(s);
  if (p >= tol)
    throw TruncationError("top-two Fock level population " + std::to_string(p) + " at t=" +
                          std::to_string(s.time) + " ns exceeds " + std::to_string(tol));
}

// ---------------------------------------------------------------------------
// Matrix functions

inline double hermiticity_defect(const CMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline constexpr double kNegativeEigenvalueClip = 1e-8;

// Square root of a Hermitian positive semidefinite matrix. Eigenvalues in
// [-1e-8, 0) are clipped to zero; anything more negative is an error.
inline CMatrix matrix_sqrt_psd(const CMatrix& m) {
  if (m.rows() != m.cols()) throw DomainError("matrix_sqrt_psd: matrix not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (hermiticity_defect(m) > 1e-10 * scale) throw DomainError("matrix_sqrt_psd: input not Hermitian");
  const CMatrix herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -kNegativeEigenvalueClip * scale)
      throw DomainError("matrix_sqrt_psd: eigenvalue " + std::to_string(ev(i)) + " is negative");
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Cavity moments of a single-mode state vector.

inline cplx expect_a(const CVector& c) {
  cplx s = 0.0;
  for (int n = 1; n < c.size(); ++n) s += std::conj(c(n - 1)) * std::sqrt(double(n)) * c(n);
  return s;
}

inline cplx expect_a2(const CVector& c) {
  cplx s = 0.0;
  for (int n = 2; n < c.size(); ++n) s += std::conj(c(n - 2)) * std::sqrt(double(n) * (n - 1)) * c(n);
  return s;
}

inline double expect_n(const CVector& c) {
  double s = 0.0;
  for (int n = 1; n < c.size(); ++n) s += n * std::norm(c(n));
  return s;
}

}  // namespace qnd
