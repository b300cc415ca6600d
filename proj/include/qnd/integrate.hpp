#pragma once

// Time integration of pure states (Schrodinger) and density matrices
// (Lindblad) under a TimeDependentHamiltonian.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qnd/errors.hpp"
#include "qnd/hilbert.hpp"
#include "qnd/models.hpp"
#include "qnd/ode.hpp"

namespace qnd {

enum class IntegratorMethod { adaptive_rk, fixed_rk4 };

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::adaptive_rk;
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = 0.0;             // ns; 0 selects the resolution bound
  double norm_check_interval = 0.1;  // ns
  int samples = 121;                 // stored states including both ends
  double truncation_tolerance = kTopLevelTolerance;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw DomainError("integrator tolerances must be > 0");
    if (max_step < 0.0) throw DomainError("max_step must be >= 0");
    if (!(norm_check_interval > 0.0)) throw DomainError("norm_check_interval must be > 0");
    if (samples < 2) throw DomainError("samples must be >= 2");
  }
};

// Largest step that resolves the fastest retained frequency w_c + w_q:
// 1 / (20 (w_c + w_q) / 2 pi).
inline double max_step_bound(const SystemParams& p) {
  const double f = (p.omega_c + p.omega_q) / units::two_pi;
  return f > 0.0 ? 1.0 / (20.0 * f) : 1.0;
}

inline double effective_max_step(const IntegratorConfig& cfg, const SystemParams& p) {
  const double bound = max_step_bound(p);
  return cfg.max_step > 0.0 ? std::min(cfg.max_step, bound) : bound;
}

inline constexpr double kNormDriftLimit = 1e-6;

template <class State>
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  ode::Stats stats;

  const State& final_state() const { return states.back(); }
};

using PureTrajectory = Trajectory<JointState>;
using MixedTrajectory = Trajectory<DensityState>;

namespace detail {

inline std::vector<double> sample_grid(double t0, double t1, int samples) {
  std::vector<double> ts(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) ts[i] = t0 + (t1 - t0) * i / (samples - 1);
  ts.back() = t1;
  return ts;
}

// Sample times merged with periodic check points; flag marks stored samples.
inline std::vector<std::pair<double, bool>> stop_grid(double t0, double t1, int samples, double check) {
  std::vector<std::pair<double, bool>> all;
  for (double t : sample_grid(t0, t1, samples)) all.emplace_back(t, true);
  const long checks = static_cast<long>(std::floor((t1 - t0) / check));
  for (long k = 1; k <= checks; ++k) all.emplace_back(t0 + k * check, false);
  std::sort(all.begin(), all.end());
  // Merge stops closer than 1e-9 ns, keeping the stored-sample flag.
  const double eps = 1e-9;
  std::vector<std::pair<double, bool>> grid;
  for (const auto& [t, keep] : all) {
    if (t <= t0 + eps && !keep) continue;
    if (!grid.empty() && t - grid.back().first < eps) {
      if (keep) grid.back() = {std::max(t, grid.back().first), true};
      continue;
    }
    grid.emplace_back(t, keep);
  }
  // Stored samples keep their exact times; the final stop is exactly t1.
  grid.back() = {t1, true};
  return grid;
}

template <class State, class Rhs, class Check, class Store>
ode::Stats run_integrator(const IntegratorConfig& cfg, double max_step, Rhs& rhs, State& y, double t0, double t1,
                          Check&& check, Store&& store) {
  ode::Options opt{cfg.rel_tol, cfg.abs_tol, max_step};
  const auto grid = stop_grid(t0, t1, cfg.samples, cfg.norm_check_interval);
  double t = t0;
  double h = 0.0;
  auto drive = [&](auto& stepper) {
    for (const auto& [ts, keep] : grid) {
      stepper.advance(rhs, t, y, ts, h);
      check(t, y);
      if (keep) store(t, y);
    }
    return stepper.stats();
  };
  if (cfg.method == IntegratorMethod::adaptive_rk) {
    ode::DormandPrince<State, Rhs> stepper(opt);
    return drive(stepper);
  }
  ode::FixedRk4<State, Rhs> stepper(opt);
  return drive(stepper);
}

}  // namespace detail

inline PureTrajectory evolve_schrodinger(const JointState& initial, const TimeDependentHamiltonian& h, double t0,
                                         double t1, const IntegratorConfig& cfg, double max_step) {
  cfg.validate();
  if (!(t1 > t0)) throw DomainError("evolve_schrodinger: empty time span");
  if (initial.dims != h.dims()) throw DomainError("evolve_schrodinger: state/Hamiltonian dimension mismatch");
  if (std::abs(initial.amplitudes.norm() - 1.0) > 1e-8) throw DomainError("initial state not normalized");

  PureTrajectory traj;
  auto rhs = [&h](double t, const CVector& psi, CVector& dpsi) {
    h.apply(t, psi, dpsi);
    dpsi *= cplx(0.0, -1.0);
  };
  auto check = [&](double t, const CVector& psi) {
    const double drift = std::abs(psi.norm() - 1.0);
    if (drift > kNormDriftLimit)
      throw IntegrationError("norm drift " + std::to_string(drift) + " at t=" + std::to_string(t));
    const double top = [&] {
      const int n = initial.dims.cavity_cutoff;
      double p = 0.0;
      for (int q = 0; q < initial.dims.qubit_levels; ++q)
        p += psi.segment(q * n + n - 2, 2).squaredNorm();
      return p;
    }();
    if (top >= cfg.truncation_tolerance)
      throw TruncationError("top-two Fock level population " + std::to_string(top) + " at t=" +
                            std::to_string(t) + " ns");
  };
  auto store = [&](double t, const CVector& psi) {
    traj.times.push_back(t);
    traj.states.push_back({psi, initial.dims, t});
  };
  CVector y = initial.amplitudes;
  traj.stats = detail::run_integrator(cfg, max_step, rhs, y, t0, t1, check, store);
  return traj;
}

enum class CollapseRole { cavity_annihilation };

struct CollapseChannel {
  CollapseRole role = CollapseRole::cavity_annihilation;
  double rate = 0.0;
};

// d rho/dt = -i[H, rho] + sum_k rate_k (a rho a^dag - {a^dag a, rho}/2).
inline MixedTrajectory evolve_lindblad(const DensityState& initial, const TimeDependentHamiltonian& h,
                                       const std::vector<CollapseChannel>& channels, double t0, double t1,
                                       const IntegratorConfig& cfg, double max_step) {
  cfg.validate();
  if (!(t1 > t0)) throw DomainError("evolve_lindblad: empty time span");
  if (initial.dims != h.dims()) throw DomainError("evolve_lindblad: state/Hamiltonian dimension mismatch");
  if (std::abs(initial.matrix.trace().real() - 1.0) > 1e-8) throw DomainError("initial density matrix trace != 1");
  double total_rate = 0.0;
  for (const auto& c : channels) {
    if (c.rate < 0.0) throw DomainError("collapse rate must be >= 0");
    total_rate += c.rate;
  }
  const HilbertDims& dims = initial.dims;
  const SparseMatrix a = embed(ladder(dims.cavity_cutoff), dims, Subsystem::cavity);
  const SparseMatrix n_op = SparseMatrix(a.adjoint()) * a;

  MixedTrajectory traj;
  CMatrix work;
  auto rhs = [&](double t, const CMatrix& rho, CMatrix& drho) {
    h.apply(t, rho, work);
    drho = cplx(0.0, -1.0) * (work - work.adjoint());
    if (total_rate > 0.0) {
      const CMatrix ar = a * rho;
      CMatrix jump = a * ar.adjoint();
      const CMatrix nr = n_op * rho;
      drho += total_rate * (jump - 0.5 * (nr + nr.adjoint()));
    }
  };
  auto check = [&](double t, const CMatrix& rho) {
    const double drift = std::abs(rho.trace().real() - 1.0);
    if (drift > kNormDriftLimit)
      throw IntegrationError("trace drift " + std::to_string(drift) + " at t=" + std::to_string(t));
    DensityState probe{rho, dims, t};
    if (top_fock_population(probe) >= cfg.truncation_tolerance)
      throw TruncationError("top-two Fock level population exceeds tolerance at t=" + std::to_string(t));
  };
  auto store = [&](double t, const CMatrix& rho) {
    traj.times.push_back(t);
    traj.states.push_back({rho, dims, t});
  };
  CMatrix y = initial.matrix;
  traj.stats = detail::run_integrator(cfg, max_step, rhs, y, t0, t1, check, store);
  return traj;
}

// ---------------------------------------------------------------------------
// Observables

namespace detail {

inline Eigen::VectorXd level_populations(const JointState& s) {
  const auto m = as_branches(s);
  return m.rowwise().squaredNorm();
}

inline Eigen::VectorXd level_populations(const DensityState& s) {
  return partial_trace(s, Subsystem::qubit).diagonal().real();
}

struct CavityMoments {
  cplx a;
  cplx a2;
  double n;
};

inline CavityMoments cavity_moments(const JointState& s) {
  const auto m = as_branches(s);
  CavityMoments out{0.0, 0.0, 0.0};
  for (int q = 0; q < s.dims.qubit_levels; ++q) {
    const CVector row = m.row(q).transpose();
    out.a += expect_a(row);
    out.a2 += expect_a2(row);
    out.n += expect_n(row);
  }
  return out;
}

inline CavityMoments cavity_moments(const DensityState& s) {
  const CMatrix rc = partial_trace(s, Subsystem::cavity);
  CavityMoments out{0.0, 0.0, 0.0};
  for (int n = 1; n < rc.rows(); ++n) {
    out.a += std::sqrt(double(n)) * rc(n, n - 1);
    out.n += n * rc(n, n).real();
  }
  for (int n = 2; n < rc.rows(); ++n) out.a2 += std::sqrt(double(n) * (n - 1)) * rc(n, n - 2);
  return out;
}

}  // namespace detail

// Qubit sigma_z convention: |0> lower, <sigma_z> = +1 on |1>.
template <class State>
std::vector<std::pair<std::string, std::vector<double>>> observables_series(const Trajectory<State>& traj,
                                                                            const std::vector<std::string>& which) {
  if (traj.states.empty()) throw DomainError("observables_series: empty trajectory");
  const int levels = traj.states.front().dims.qubit_levels;
  enum class Kind { sigma_z, pop, a_re, a_im, a_abs, n, a2_re, a2_im };
  std::vector<std::pair<Kind, int>> kinds;
  for (const auto& name : which) {
    if (name == "sigma_z") kinds.emplace_back(Kind::sigma_z, 0);
    else if (name == "P_excited") kinds.emplace_back(Kind::pop, 1);
    else if (name.size() > 1 && name[0] == 'P' && name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int k = std::stoi(name.substr(1));
      if (k >= levels) throw DomainError("observable " + name + " exceeds qubit levels");
      kinds.emplace_back(Kind::pop, k);
    } else if (name == "a_re") kinds.emplace_back(Kind::a_re, 0);
    else if (name == "a_im") kinds.emplace_back(Kind::a_im, 0);
    else if (name == "a_abs") kinds.emplace_back(Kind::a_abs, 0);
    else if (name == "n") kinds.emplace_back(Kind::n, 0);
    else if (name == "a2_re") kinds.emplace_back(Kind::a2_re, 0);
    else if (name == "a2_im") kinds.emplace_back(Kind::a2_im, 0);
    else throw DomainError("unknown observable: " + name);
  }
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const auto& name : which) out.emplace_back(name, std::vector<double>{});
  for (const auto& s : traj.states) {
    const Eigen::VectorXd pops = detail::level_populations(s);
    const auto cm = detail::cavity_moments(s);
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      const auto [kind, k] = kinds[i];
      double v = 0.0;
      switch (kind) {
        case Kind::sigma_z: v = pops(1) - pops(0); break;
        case Kind::pop: v = pops(k); break;
        case Kind::a_re: v = cm.a.real(); break;
        case Kind::a_im: v = cm.a.imag(); break;
        case Kind::a_abs: v = std::abs(cm.a); break;
        case Kind::n: v = cm.n; break;
        case Kind::a2_re: v = cm.a2.real(); break;
        case Kind::a2_im: v = cm.a2.imag(); break;
      }
      out[i].second.push_back(v);
    }
  }
  return out;
}

}  // namespace qnd
