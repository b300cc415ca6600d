#pragma once

// Moment equations up to second order, with third- and fourth-order moments
// replaced by their Gaussian (zero higher cumulant) expressions.
//
// Ideal qubit, 14 real components:
//   <a>, <a^2>, <a^dag a>, <sigma_z>, <sigma_->, <a sigma_z>, <a sigma_->,
//   <a^dag sigma_->            (<a sigma_+> = conj <a^dag sigma_->)
// Transmon, treated as a Kerr oscillator b, 14 real components:
//   <a>, <b>, <a^2>, <b^2>, <a^dag a>, <b^dag b>, <a b>, <a^dag b>
//
// Both are written in the same interaction frame as the exact engine for
// the cavity; the transmon moments rotate at the bare 0-1 frequency, which
// differs from the exact engine's frame only by a qubit-diagonal phase.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qnd/fidelity.hpp"
#include "qnd/integrate.hpp"
#include "qnd/models.hpp"

namespace qnd {

enum class MomentModel { rabi, dispersive, transmon };

inline std::string to_string(MomentModel m) {
  switch (m) {
    case MomentModel::rabi: return "rabi";
    case MomentModel::dispersive: return "dispersive";
    case MomentModel::transmon: return "transmon";
  }
  return "?";
}

inline constexpr int kMomentCount = 14;
using MomentVector = Eigen::Matrix<double, kMomentCount, 1>;

struct QubitMoments {
  cplx a, a2;
  double n = 0.0;
  double sz = 0.0;
  cplx sm, a_sz, a_sm, ad_sm;

  static QubitMoments unpack(const MomentVector& v) {
    QubitMoments m;
    m.a = {v(0), v(1)};
    m.a2 = {v(2), v(3)};
    m.n = v(4);
    m.sz = v(5);
    m.sm = {v(6), v(7)};
    m.a_sz = {v(8), v(9)};
    m.a_sm = {v(10), v(11)};
    m.ad_sm = {v(12), v(13)};
    return m;
  }
  MomentVector pack() const {
    MomentVector v;
    v << a.real(), a.imag(), a2.real(), a2.imag(), n, sz, sm.real(), sm.imag(), a_sz.real(), a_sz.imag(),
        a_sm.real(), a_sm.imag(), ad_sm.real(), ad_sm.imag();
    return v;
  }
};

struct TransmonMoments {
  cplx a, b, a2, b2;
  double na = 0.0, nb = 0.0;
  cplx ab, ad_b;

  static TransmonMoments unpack(const MomentVector& v) {
    TransmonMoments m;
    m.a = {v(0), v(1)};
    m.b = {v(2), v(3)};
    m.a2 = {v(4), v(5)};
    m.b2 = {v(6), v(7)};
    m.na = v(8);
    m.nb = v(9);
    m.ab = {v(10), v(11)};
    m.ad_b = {v(12), v(13)};
    return m;
  }
  MomentVector pack() const {
    MomentVector v;
    v << a.real(), a.imag(), b.real(), b.imag(), a2.real(), a2.imag(), b2.real(), b2.imag(), na, nb, ab.real(),
        ab.imag(), ad_b.real(), ad_b.imag();
    return v;
  }
};

struct MomentState {
  MomentModel model = MomentModel::rabi;
  MomentVector v = MomentVector::Zero();
  double time = 0.0;

  cplx cavity_mean() const { return {v(0), v(1)}; }
  GaussianMode cavity_gaussian() const {
    if (model == MomentModel::transmon) {
      const auto m = TransmonMoments::unpack(v);
      return {m.a, m.na, m.a2};
    }
    const auto m = QubitMoments::unpack(v);
    return {m.a, m.n, m.a2};
  }
  // <sigma_z> for the qubit models; 2<b^dag b> - 1 for the transmon.
  double sigma_z() const {
    if (model == MomentModel::transmon) return 2.0 * TransmonMoments::unpack(v).nb - 1.0;
    return v(5);
  }
};

// ---------------------------------------------------------------------------
// Gaussian factorization of products of commuting-or-ordered operators from
// their means m_i and raw ordered pair moments c_ij = <X_i X_j>.

inline cplx gaussian3(cplx m1, cplx m2, cplx m3, cplx c12, cplx c13, cplx c23) {
  return c12 * m3 + c13 * m2 + c23 * m1 - 2.0 * m1 * m2 * m3;
}

inline cplx gaussian4(const std::array<cplx, 4>& m, cplx c12, cplx c13, cplx c14, cplx c23, cplx c24, cplx c34) {
  const cplx k12 = c12 - m[0] * m[1], k13 = c13 - m[0] * m[2], k14 = c14 - m[0] * m[3];
  const cplx k23 = c23 - m[1] * m[2], k24 = c24 - m[1] * m[3], k34 = c34 - m[2] * m[3];
  return m[0] * m[1] * m[2] * m[3] + k12 * m[2] * m[3] + k13 * m[1] * m[3] + k14 * m[1] * m[2] +
         k23 * m[0] * m[3] + k24 * m[0] * m[2] + k34 * m[0] * m[1] + k12 * k34 + k13 * k24 + k14 * k23;
}

// ---------------------------------------------------------------------------
// Right-hand sides

struct MomentContext {
  SystemParams params;
  PulseSchedule schedule;
  MomentModel model = MomentModel::rabi;

  double coupling(double t) const { return envelope_value(schedule, params.g_max, t); }
};

namespace detail {

inline constexpr cplx I{0.0, 1.0};

inline MomentVector rhs_rabi(const MomentContext& ctx, double t, const MomentVector& v) {
  const auto m = QubitMoments::unpack(v);
  const double g = ctx.coupling(t);
  const cplx c = drive_value(ctx.schedule, t);
  const double kappa = ctx.params.kappa_total();
  const cplx u = std::polar(1.0, ctx.params.omega_q * t);
  const cplx w = std::polar(1.0, -ctx.params.omega_c * t);
  const cplx uc = std::conj(u), wc = std::conj(w);

  const cplx sp = std::conj(m.sm);
  const cplx a_sp = std::conj(m.ad_sm);   // <a sigma_+>
  const cplx ad_sp = std::conj(m.a_sm);   // <a^dag sigma_+>
  const cplx ad = std::conj(m.a);
  const cplx ad_sz = std::conj(m.a_sz);

  // Third-order closures.
  auto a2_s = [&](cplx s, cplx as) { return gaussian3(m.a, m.a, s, m.a2, as, as); };
  auto ada_s = [&](cplx s, cplx as, cplx ads) { return gaussian3(ad, m.a, s, m.n, ads, as); };
  const cplx a2_sm = a2_s(m.sm, m.a_sm), a2_sp = a2_s(sp, a_sp), a2_sz = a2_s(m.sz, m.a_sz);
  const cplx ada_sm = ada_s(m.sm, m.a_sm, m.ad_sm), ada_sp = ada_s(sp, a_sp, ad_sp);
  const cplx ada_sz = ada_s(m.sz, m.a_sz, ad_sz);
  const cplx ad2_sz = std::conj(a2_sz);

  QubitMoments d;
  const cplx xq = u * sp + uc * m.sm;  // <X_q>
  d.a = -I * g * wc * xq - I * c - 0.5 * kappa * m.a;
  const cplx a_xq = u * a_sp + uc * m.a_sm;
  d.a2 = -2.0 * I * g * wc * a_xq - 2.0 * I * c * m.a - kappa * m.a2;
  const cplx ad_xq = u * ad_sp + uc * m.ad_sm;
  d.n = 2.0 * (I * g * w * std::conj(ad_xq)).real() + 2.0 * (I * std::conj(c) * m.a).real() - kappa * m.n;
  const cplx xc_sm = w * m.a_sm + wc * m.ad_sm;  // <X_c sigma_->
  d.sz = -4.0 * g * (uc * xc_sm).imag();
  d.sm = I * g * u * (w * m.a_sz + wc * ad_sz);

  const cplx xq_sz = -u * sp + uc * m.sm;
  d.a_sz = -I * g * wc * xq_sz - I * c * m.sz - 0.5 * kappa * m.a_sz +
           I * g * (-2.0 * u * (w * a2_sp + wc * (ada_sp + sp)) + 2.0 * uc * (w * a2_sm + wc * (ada_sm + m.sm)));
  const cplx xq_sm = 0.5 * u * (1.0 + m.sz);
  d.a_sm = -I * g * wc * xq_sm - I * c * m.sm - 0.5 * kappa * m.a_sm +
           I * g * u * (w * a2_sz + wc * (ada_sz + m.sz));
  d.ad_sm = I * g * w * xq_sm + I * std::conj(c) * m.sm - 0.5 * kappa * m.ad_sm +
            I * g * u * (w * ada_sz + wc * ad2_sz);
  return d.pack();
}

inline MomentVector rhs_dispersive(const MomentContext& ctx, double t, const MomentVector& v) {
  const auto m = QubitMoments::unpack(v);
  const double g = ctx.coupling(t);
  const double chi = g * g / ctx.params.detuning();
  const cplx c = drive_value(ctx.schedule, t);
  const double kappa = ctx.params.kappa_total();
  const cplx ad = std::conj(m.a);
  const cplx a2_sz = gaussian3(m.a, m.a, m.sz, m.a2, m.a_sz, m.a_sz);
  const cplx ada_sm = gaussian3(ad, m.a, m.sm, m.n, m.ad_sm, m.a_sm);
  const std::array<cplx, 4> mm{ad, m.a, m.a, m.sm};
  const std::array<cplx, 4> mp{ad, ad, m.a, m.sm};
  const cplx ad_a_a_sm = gaussian4(mm, m.n, m.n, m.ad_sm, m.a2, m.a_sm, m.a_sm);
  const cplx ad_ad_a_sm = gaussian4(mp, std::conj(m.a2), m.n, m.ad_sm, m.n, m.ad_sm, m.a_sm);

  QubitMoments d;
  d.a = -I * chi * m.a_sz - I * c - 0.5 * kappa * m.a;
  d.a2 = -2.0 * I * chi * a2_sz - 2.0 * I * c * m.a - kappa * m.a2;
  d.n = 2.0 * (I * std::conj(c) * m.a).real() - kappa * m.n;
  d.sz = 0.0;
  d.sm = -2.0 * I * chi * ada_sm;
  d.a_sz = -I * chi * m.a - I * c * m.sz - 0.5 * kappa * m.a_sz;
  d.a_sm = -I * chi * m.a_sm - I * c * m.sm - 0.5 * kappa * m.a_sm - 2.0 * I * chi * ad_a_a_sm;
  d.ad_sm = -I * chi * m.ad_sm + I * std::conj(c) * m.sm - 0.5 * kappa * m.ad_sm - 2.0 * I * chi * ad_ad_a_sm;
  return d.pack();
}

inline MomentVector rhs_transmon(const MomentContext& ctx, double t, const MomentVector& v) {
  const auto m = TransmonMoments::unpack(v);
  const double g = ctx.coupling(t);
  const cplx c = drive_value(ctx.schedule, t);
  const double kappa = ctx.params.kappa_total();
  const double eps = ctx.params.anharmonicity;
  const cplx vq = std::polar(1.0, -ctx.params.omega_q * t);
  const cplx w = std::polar(1.0, -ctx.params.omega_c * t);
  const cplx vqc = std::conj(vq), wc = std::conj(w);
  const cplx ac = std::conj(m.a), bc = std::conj(m.b);
  const cplx a_bd = std::conj(m.ad_b);  // <a b^dag>
  const cplx ad_bd = std::conj(m.ab);   // <a^dag b^dag>

  const cplx bd_b_b = gaussian3(bc, m.b, m.b, m.nb, m.nb, m.b2);
  const cplx bd_b3 = gaussian4({bc, m.b, m.b, m.b}, m.nb, m.nb, m.nb, m.b2, m.b2, m.b2);
  const cplx a_bd_b_b = gaussian4({m.a, bc, m.b, m.b}, a_bd, m.ab, m.ab, m.nb, m.nb, m.b2);
  const cplx ad_bd_b_b = gaussian4({ac, bc, m.b, m.b}, ad_bd, m.ad_b, m.ad_b, m.nb, m.nb, m.b2);

  TransmonMoments d;
  const cplx xb = vq * m.b + vqc * bc;
  const cplx xc = w * m.a + wc * ac;
  d.a = -I * g * wc * xb - I * c - 0.5 * kappa * m.a;
  d.b = -I * g * vqc * xc + I * eps * bd_b_b;
  d.a2 = -2.0 * I * g * wc * (vq * m.ab + vqc * a_bd) - 2.0 * I * c * m.a - kappa * m.a2;
  const cplx ad_xb = vq * m.ad_b + vqc * ad_bd;
  d.na = 2.0 * (I * g * w * std::conj(ad_xb)).real() + 2.0 * (I * std::conj(c) * m.a).real() - kappa * m.na;
  const cplx xc_b = w * m.ab + wc * m.ad_b;
  d.b2 = -2.0 * I * g * vqc * xc_b + I * eps * (2.0 * bd_b3 + m.b2);
  d.nb = -2.0 * g * (vq * xc_b).imag();
  const cplx xb_b = vq * m.b2 + vqc * m.nb;
  d.ab = -I * g * wc * xb_b - I * c * m.b - 0.5 * kappa * m.ab - I * g * vqc * (w * m.a2 + wc * (m.na + 1.0)) +
         I * eps * a_bd_b_b;
  d.ad_b = I * g * w * xb_b + I * std::conj(c) * m.b - 0.5 * kappa * m.ad_b -
           I * g * vqc * (w * m.na + wc * std::conj(m.a2)) + I * eps * ad_bd_b_b;
  return d.pack();
}

}  // namespace detail

inline MomentVector derive_moment_rhs(const MomentContext& ctx, double t, const MomentVector& v) {
  switch (ctx.model) {
    case MomentModel::rabi: return detail::rhs_rabi(ctx, t, v);
    case MomentModel::dispersive: return detail::rhs_dispersive(ctx, t, v);
    case MomentModel::transmon: return detail::rhs_transmon(ctx, t, v);
  }
  return MomentVector::Zero();
}

// Exact moments of a joint pure state (used for initial conditions and for
// checking the closure against the exact engine).
inline MomentState moments_from_state(const JointState& psi, MomentModel model) {
  const HilbertDims& d = psi.dims;
  const SparseMatrix a = embed(ladder(d.cavity_cutoff), d, Subsystem::cavity);
  const SparseMatrix b = embed(ladder(d.qubit_levels), d, Subsystem::qubit);
  const CVector& x = psi.amplitudes;
  auto ev = [&](const SparseMatrix& op) { return cplx(x.dot(op * x)); };
  const SparseMatrix ad = SparseMatrix(a.adjoint());
  const SparseMatrix bd = SparseMatrix(b.adjoint());
  MomentState out;
  out.model = model;
  out.time = psi.time;
  if (model == MomentModel::transmon) {
    TransmonMoments m;
    m.a = ev(a);
    m.b = ev(b);
    m.a2 = ev(a * a);
    m.b2 = ev(b * b);
    m.na = ev(ad * a).real();
    m.nb = ev(bd * b).real();
    m.ab = ev(a * b);
    m.ad_b = ev(ad * b);
    out.v = m.pack();
    return out;
  }
  if (d.qubit_levels != 2) throw DomainError("qubit moment models need a two-level qubit");
  const SparseMatrix s_local = ladder(2);
  const SparseMatrix sz_local = SparseMatrix(SparseMatrix(s_local.adjoint()) * s_local) * 2.0 - identity(2);
  const SparseMatrix sz = embed(sz_local, d, Subsystem::qubit);
  QubitMoments m;
  m.a = ev(a);
  m.a2 = ev(a * a);
  m.n = ev(ad * a).real();
  m.sz = ev(sz).real();
  m.sm = ev(b);
  m.a_sz = ev(a * sz);
  m.a_sm = ev(a * b);
  m.ad_sm = ev(ad * b);
  out.v = m.pack();
  return out;
}

struct MomentTrajectory {
  MomentModel model = MomentModel::rabi;
  std::vector<double> times;
  std::vector<MomentState> states;
  std::vector<std::string> warnings;
  ode::Stats stats;

  const MomentState& final_state() const { return states.back(); }
};

// Physicality checks; closure can violate them transiently, so they warn.
inline std::vector<std::string> moment_invariant_violations(const MomentState& s) {
  std::vector<std::string> out;
  const double sz = s.sigma_z();
  if (s.model != MomentModel::transmon && std::abs(sz) > 1.0 + 1e-6)
    out.push_back("|<sigma_z>| = " + std::to_string(std::abs(sz)) + " > 1 at t=" + std::to_string(s.time));
  const auto g = s.cavity_gaussian();
  if (g.n < std::norm(g.mean) - 1e-6)
    out.push_back("<a^dag a> < |<a>|^2 at t=" + std::to_string(s.time));
  return out;
}

inline MomentTrajectory evolve_moments(const MomentState& initial, const SystemParams& params,
                                       const PulseSchedule& schedule, double t0, double t1,
                                       const IntegratorConfig& cfg, double max_step) {
  cfg.validate();
  if (!(t1 > t0)) throw DomainError("evolve_moments: empty time span");
  if (initial.model == MomentModel::dispersive && params.detuning() == 0.0)
    throw DomainError("dispersive moment model requires nonzero detuning");
  const MomentContext ctx{params, schedule, initial.model};
  MomentTrajectory traj;
  traj.model = initial.model;
  auto rhs = [&ctx](double t, const MomentVector& y, MomentVector& dy) { dy = derive_moment_rhs(ctx, t, y); };
  auto check = [&](double t, const MomentVector& y) {
    if (!y.allFinite()) throw IntegrationError("moment state diverged at t=" + std::to_string(t));
  };
  auto store = [&](double t, const MomentVector& y) {
    MomentState s{initial.model, y, t};
    for (auto& w : moment_invariant_violations(s)) traj.warnings.push_back(std::move(w));
    traj.times.push_back(t);
    traj.states.push_back(s);
  };
  MomentVector y = initial.v;
  traj.stats = detail::run_integrator(cfg, max_step, rhs, y, t0, t1, check, store);
  return traj;
}

inline std::vector<std::pair<std::string, std::vector<double>>> observables_series(
    const MomentTrajectory& traj, const std::vector<std::string>& which) {
  if (traj.states.empty()) throw DomainError("observables_series: empty trajectory");
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const auto& name : which) {
    std::vector<double> col;
    col.reserve(traj.states.size());
    for (const auto& s : traj.states) {
      const auto g = s.cavity_gaussian();
      double v;
      if (name == "sigma_z") v = s.sigma_z();
      else if (name == "P_excited" || name == "P1") v = 0.5 * (1.0 + s.sigma_z());
      else if (name == "P0") v = 0.5 * (1.0 - s.sigma_z());
      else if (name == "a_re") v = g.mean.real();
      else if (name == "a_im") v = g.mean.imag();
      else if (name == "a_abs") v = std::abs(g.mean);
      else if (name == "n") v = g.n;
      else if (name == "a2_re") v = g.a2.real();
      else if (name == "a2_im") v = g.a2.imag();
      else throw DomainError("unknown observable: " + name);
      col.push_back(v);
    }
    out.emplace_back(name, std::move(col));
  }
  return out;
}

}  // namespace qnd
