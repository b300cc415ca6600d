#pragma once

// Protocol search: differential evolution on the moment surrogate, then
// Nelder-Mead refinement and verification with the exact engine. Also the
// Monte-Carlo robustness analysis of an optimized protocol.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qnd/metrics.hpp"

namespace qnd {

inline constexpr int kSearchDims = 6;

// Order of the search variables.
enum SearchVar : int { kFreqQubit = 0, kFreqCavity, kRampRate, kRampOn, kRampOff, kSqueezeAngle };

inline const std::array<const char*, kSearchDims> kSearchVarNames{"f_q_ghz", "f_c_ghz", "v1_per_ns", "t1_ns",
                                                                  "t2_ns", "theta_rad"};

using SearchPoint = std::array<double, kSearchDims>;

struct Bounds {
  double lo = 0.0, hi = 1.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct SearchSpace {
  std::array<Bounds, kSearchDims> bounds{{{3.0, 7.0}, {8.0, 11.0}, {0.5, 8.0}, {0.0, 3.0}, {3.0, 6.0}, {0.0, 2.0 * M_PI}}};
  double g_max_mhz = 100.0;  // fixed; at most 100 MHz
  double max_g_max_mhz = 100.0;
  double tau = 6.0;
  // Fixed context.
  CavityStateSpec cavity{8.15, 1.0, 0.0};
  QubitModel qubit_model = QubitModel::ideal;
  int qubit_levels = 2;
  double anharmonicity_mhz = 200.0;
  double kappa_int_khz = 10.0;
  double kappa_ext_mhz = 0.0;
  int cavity_cutoff = 0;  // 0 picks fitting_cavity_cutoff

  // Box with the ramp times tied to tau: t1 in [0, tau/2], t2 in [tau/2, tau].
  static SearchSpace for_tau(double tau) {
    SearchSpace s;
    s.set_tau(tau);
    return s;
  }
  void set_tau(double t) {
    tau = t;
    bounds[kRampOn] = {0.0, 0.5 * t};
    bounds[kRampOff] = {0.5 * t, t};
  }

  void validate() const {
    if (!(tau > 0.0)) throw DomainError("search tau must be > 0");
    for (int i = 0; i < kSearchDims; ++i)
      if (!(bounds[i].hi >= bounds[i].lo)) throw DomainError(std::string("empty bound for ") + kSearchVarNames[i]);
    if (g_max_mhz < 0.0 || g_max_mhz > max_g_max_mhz * (1.0 + 1e-12))
      throw DomainError("g_max outside the search bound");
  }

  SearchPoint clamp(SearchPoint x) const {
    for (int i = 0; i < kSearchDims; ++i) x[i] = std::clamp(x[i], bounds[i].lo, bounds[i].hi);
    return x;
  }
  SearchPoint to_unit(const SearchPoint& x) const {
    SearchPoint u;
    for (int i = 0; i < kSearchDims; ++i) {
      const double w = bounds[i].hi - bounds[i].lo;
      u[i] = w > 0.0 ? (x[i] - bounds[i].lo) / w : 0.0;
    }
    return u;
  }
  SearchPoint from_unit(const SearchPoint& u) const {
    SearchPoint x;
    for (int i = 0; i < kSearchDims; ++i) x[i] = bounds[i].lo + std::clamp(u[i], 0.0, 1.0) * (bounds[i].hi - bounds[i].lo);
    return x;
  }

  // The moment engine has no cutoff, so fitting it can be skipped.
  Protocol protocol(const SearchPoint& x, bool fit_cutoff = true) const {
    Protocol pr;
    pr.params.omega_q = units::from_ghz(x[kFreqQubit]);
    pr.params.omega_c = units::from_ghz(x[kFreqCavity]);
    pr.params.g_max = units::from_mhz(g_max_mhz);
    pr.params.anharmonicity = units::from_mhz(anharmonicity_mhz);
    pr.params.kappa_int = units::from_khz(kappa_int_khz);
    pr.params.kappa_ext = units::from_mhz(kappa_ext_mhz);
    pr.params.qubit_model = qubit_model;
    pr.cavity = cavity;
    pr.cavity.theta = x[kSqueezeAngle];
    const int cutoff = cavity_cutoff > 0 ? cavity_cutoff
                       : fit_cutoff       ? fitting_cavity_cutoff(pr.cavity)
                                          : default_cavity_cutoff(pr.cavity);
    pr.params.dims = {qubit_model == QubitModel::ideal ? 2 : qubit_levels, cutoff};
    pr.schedule.envelope = {EnvelopeShape::erfc, x[kRampRate], x[kRampOn], x[kRampOff]};
    pr.tau = tau;
    return pr;
  }
};

inline SearchPoint point_from_protocol(const Protocol& pr) {
  return {units::to_ghz(pr.params.omega_q), units::to_ghz(pr.params.omega_c), pr.schedule.envelope.v1,
          pr.schedule.envelope.t1,           pr.schedule.envelope.t2,          pr.cavity.theta};
}

// ---------------------------------------------------------------------------
// Objective

struct ObjectiveSettings {
  double d_bound = 0.005;
  double penalty = 1e4;
  // Coupler counts as off at both ends when g(0), g(tau) <= edge_tolerance * g_max.
  double edge_tolerance = 1e-2;
};

struct Evaluation {
  SearchPoint x{};
  double objective = -std::numeric_limits<double>::infinity();
  double distinguishability = 0.0;
  double disturbance = 1.0;
  double edge = 0.0;
  bool feasible = false;
  bool failed = false;
  std::string diagnostic;
};

inline double envelope_edge(const Protocol& pr) {
  if (pr.params.g_max == 0.0) return 0.0;
  return std::max(envelope_value(pr.schedule, pr.params.g_max, 0.0),
                  envelope_value(pr.schedule, pr.params.g_max, pr.tau)) /
         pr.params.g_max;
}

// Feasible candidates score D. Infeasible ones score
//   D - 1 - penalty * (excess_d^2 + excess_edge^2),
// which is below every feasible score.
inline double penalized_objective(double D, double d, double edge, const ObjectiveSettings& s) {
  const double excess_d = std::max(0.0, d - s.d_bound);
  const double excess_edge = std::max(0.0, edge - s.edge_tolerance);
  if (excess_d == 0.0 && excess_edge == 0.0) return D;
  return D - 1.0 - s.penalty * (excess_d * excess_d + excess_edge * excess_edge);
}

inline constexpr double kFailedObjective = -1e9;

inline Evaluation evaluate_candidate(const SearchSpace& space, const SearchPoint& x, const ReadoutOptions& opt,
                                     const ObjectiveSettings& settings) {
  Evaluation e;
  e.x = x;
  try {
    const Protocol pr = space.protocol(x, opt.engine == Engine::exact);
    e.edge = envelope_edge(pr);
    const ReadoutReport r = measurement_report(pr, opt);
    e.distinguishability = r.distinguishability;
    e.disturbance = r.disturbance;
    if (!std::isfinite(e.distinguishability) || !std::isfinite(e.disturbance))
      throw IntegrationError("non-finite readout figures");
    e.objective = penalized_objective(e.distinguishability, e.disturbance, e.edge, settings);
    e.feasible = e.objective >= 0.0 && e.disturbance <= settings.d_bound && e.edge <= settings.edge_tolerance;
  } catch (const Error& err) {
    e.failed = true;
    e.objective = kFailedObjective;
    e.diagnostic = err.what();
  }
  return e;
}

// Evaluates f(i) for i in [0, n) on up to hardware_concurrency threads. The
// result is independent of scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < threads; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Differential evolution (rand/1/bin) on the unit cube.

struct DeSettings {
  int population = 15 * kSearchDims;
  int generations = 60;
  double weight = 0.7;
  double crossover = 0.9;
  unsigned threads = 0;
};

struct DeResult {
  std::vector<Evaluation> population;  // final population, best first
  long evaluations = 0;
};

inline DeResult differential_evolution(const std::function<Evaluation(const SearchPoint&)>& eval,
                                       const SearchSpace& space, const std::vector<SearchPoint>& warm_starts,
                                       const DeSettings& s, std::uint64_t seed) {
  if (s.population < 4) throw DomainError("differential evolution needs a population of at least 4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t np = static_cast<std::size_t>(s.population);
  std::vector<SearchPoint> pop(np);
  for (std::size_t i = 0; i < np; ++i) {
    if (i < warm_starts.size()) {
      pop[i] = space.to_unit(space.clamp(warm_starts[i]));
    } else {
      for (auto& v : pop[i]) v = unit(rng);
    }
  }
  DeResult out;
  std::vector<Evaluation> fit(np);
  parallel_for(np, [&](std::size_t i) { fit[i] = eval(space.from_unit(pop[i])); }, s.threads);
  out.evaluations += static_cast<long>(np);
  std::vector<SearchPoint> trial(np);
  std::vector<Evaluation> trial_fit(np);
  for (int gen = 0; gen < s.generations; ++gen) {
    // Trial vectors are drawn serially so the random stream is fixed.
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t r[3];
      for (int k = 0; k < 3; ++k) {
        do {
          r[k] = static_cast<std::size_t>(rng() % np);
        } while (r[k] == i || (k > 0 && r[k] == r[0]) || (k > 1 && r[k] == r[1]));
      }
      const int forced = static_cast<int>(rng() % kSearchDims);
      for (int d = 0; d < kSearchDims; ++d) {
        const bool cross = unit(rng) < s.crossover || d == forced;
        double v = cross ? pop[r[0]][d] + s.weight * (pop[r[1]][d] - pop[r[2]][d]) : pop[i][d];
        // Reflect into the cube.
        if (v < 0.0) v = -v;
        if (v > 1.0) v = 2.0 - v;
        trial[i][d] = std::clamp(v, 0.0, 1.0);
      }
    }
    parallel_for(np, [&](std::size_t i) { trial_fit[i] = eval(space.from_unit(trial[i])); }, s.threads);
    out.evaluations += static_cast<long>(np);
    for (std::size_t i = 0; i < np; ++i) {
      if (trial_fit[i].objective >= fit[i].objective) {
        pop[i] = trial[i];
        fit[i] = trial_fit[i];
      }
    }
  }
  std::vector<std::size_t> order(np);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fit[a].objective > fit[b].objective; });
  for (auto i : order) out.population.push_back(fit[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Nelder-Mead on the unit cube (coordinates clamped), maximizing.

struct NelderMeadSettings {
  int max_evaluations = 150;
  double initial_step = 0.05;  // fraction of each bound width
  double tolerance = 1e-6;     // spread of objective values across the simplex
};

struct NelderMeadResult {
  Evaluation best;
  long evaluations = 0;
};

inline NelderMeadResult nelder_mead(const std::function<Evaluation(const SearchPoint&)>& eval,
                                    const SearchSpace& space, const SearchPoint& start, const NelderMeadSettings& s) {
  // Only variables with a non-empty range take part in the simplex.
  std::vector<int> free;
  for (int d = 0; d < kSearchDims; ++d)
    if (space.bounds[d].hi > space.bounds[d].lo) free.push_back(d);
  const int n = static_cast<int>(free.size());
  NelderMeadResult out;
  auto f = [&](const SearchPoint& u) {
    ++out.evaluations;
    return eval(space.from_unit(u));
  };
  const SearchPoint origin = space.to_unit(space.clamp(start));
  std::vector<SearchPoint> simplex(n + 1, origin);
  for (int i = 0; i < n; ++i) {
    double& c = simplex[i + 1][free[i]];
    c = c + s.initial_step <= 1.0 ? c + s.initial_step : c - s.initial_step;
  }
  std::vector<Evaluation> val(n + 1);
  for (int i = 0; i <= n; ++i) val[i] = f(simplex[i]);
  if (n == 0) {
    out.best = val[0];
    return out;
  }
  while (out.evaluations < s.max_evaluations) {
    std::vector<int> idx(n + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a].objective > val[b].objective; });
    std::vector<SearchPoint> sx(n + 1);
    std::vector<Evaluation> sv(n + 1);
    for (int i = 0; i <= n; ++i) {
      sx[i] = simplex[idx[i]];
      sv[i] = val[idx[i]];
    }
    simplex = sx;
    val = sv;
    if (std::abs(val[0].objective - val[n].objective) < s.tolerance) break;
    SearchPoint centroid = origin;
    for (int d : free) {
      centroid[d] = 0.0;
      for (int i = 0; i < n; ++i) centroid[d] += simplex[i][d] / n;
    }
    auto along = [&](double coef) {
      SearchPoint p = centroid;
      for (int d : free) p[d] = std::clamp(centroid[d] + coef * (simplex[n][d] - centroid[d]), 0.0, 1.0);
      return p;
    };
    const SearchPoint xr = along(-1.0);
    const Evaluation fr = f(xr);
    if (fr.objective > val[0].objective) {
      const SearchPoint xe = along(-2.0);
      const Evaluation fe = f(xe);
      if (fe.objective > fr.objective) {
        simplex[n] = xe;
        val[n] = fe;
      } else {
        simplex[n] = xr;
        val[n] = fr;
      }
    } else if (fr.objective > val[n - 1].objective) {
      simplex[n] = xr;
      val[n] = fr;
    } else {
      const bool outside = fr.objective > val[n].objective;
      const SearchPoint xc = along(outside ? -0.5 : 0.5);
      const Evaluation fc = f(xc);
      if (fc.objective > std::max(fr.objective, val[n].objective)) {
        simplex[n] = xc;
        val[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int d : free) simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
          val[i] = f(simplex[i]);
        }
      }
    }
  }
  out.best = *std::max_element(val.begin(), val.end(),
                               [](const Evaluation& a, const Evaluation& b) { return a.objective < b.objective; });
  return out;
}

// ---------------------------------------------------------------------------
// Two-phase optimization

struct OptimizeSettings {
  ObjectiveSettings objective;
  DeSettings de;
  NelderMeadSettings local;
  int local_starts = 5;  // top DE candidates refined with the exact engine
  bool skip_global = false;
  IntegratorConfig surrogate_integrator;
  IntegratorConfig local_integrator = [] {
    IntegratorConfig c;
    c.rel_tol = 1e-7;
    c.abs_tol = 1e-9;
    c.samples = 2;
    return c;
  }();
  IntegratorConfig verify_integrator;
  std::uint64_t seed = 1;
};

struct OptimizationResult {
  SearchPoint best{};
  Protocol protocol;
  double distinguishability = 0.0;  // exact engine
  double disturbance = 1.0;         // exact engine
  double surrogate_distinguishability = 0.0;
  double surrogate_disturbance = 0.0;
  bool feasible = false;
  long surrogate_evaluations = 0;
  long exact_evaluations = 0;
  std::uint64_t seed = 0;
  std::string global_engine = "moments";
  std::string local_engine = "exact";
  std::vector<Evaluation> local_results;  // one per local start
  ReadoutReport verification;
  // Infeasible surrogate candidates that outscored a feasible one (should be
  // empty by construction of the penalty).
  long penalty_inversions = 0;
};

inline OptimizationResult optimize_protocol(const SearchSpace& space, const OptimizeSettings& s,
                                            const std::vector<SearchPoint>& warm_starts = {}) {
  space.validate();
  OptimizationResult res;
  res.seed = s.seed;

  std::vector<SearchPoint> starts;
  if (!s.skip_global) {
    ReadoutOptions sur;
    sur.engine = Engine::moments;
    sur.integrator = s.surrogate_integrator;
    sur.integrator.samples = 2;
    auto eval = [&](const SearchPoint& x) { return evaluate_candidate(space, x, sur, s.objective); };
    const DeResult de = differential_evolution(eval, space, warm_starts, s.de, s.seed);
    res.surrogate_evaluations = de.evaluations;
    double worst_feasible = std::numeric_limits<double>::infinity();
    for (const auto& e : de.population)
      if (e.feasible) worst_feasible = std::min(worst_feasible, e.objective);
    for (const auto& e : de.population)
      if (!e.feasible && !e.failed && e.objective >= worst_feasible) ++res.penalty_inversions;
    for (const auto& w : warm_starts) starts.push_back(space.clamp(w));
    for (int i = 0; i < s.local_starts && i < static_cast<int>(de.population.size()); ++i)
      starts.push_back(de.population[static_cast<std::size_t>(i)].x);
  } else {
    for (const auto& w : warm_starts) starts.push_back(space.clamp(w));
  }
  if (starts.empty()) throw DomainError("optimize_protocol: no starting points");

  ReadoutOptions loc;
  loc.engine = Engine::exact;
  loc.integrator = s.local_integrator;
  auto eval = [&](const SearchPoint& x) { return evaluate_candidate(space, x, loc, s.objective); };
  Evaluation best;
  for (const auto& x0 : starts) {
    const NelderMeadResult nm = nelder_mead(eval, space, x0, s.local);
    res.exact_evaluations += nm.evaluations;
    res.local_results.push_back(nm.best);
    if (nm.best.objective > best.objective) best = nm.best;
  }
  res.best = best.x;
  res.protocol = space.protocol(best.x);

  ReadoutOptions ver;
  ver.engine = Engine::exact;
  ver.integrator = s.verify_integrator;
  res.verification = measurement_report(res.protocol, ver);
  res.distinguishability = res.verification.distinguishability;
  res.disturbance = res.verification.disturbance;
  res.feasible = res.disturbance <= s.objective.d_bound && envelope_edge(res.protocol) <= s.objective.edge_tolerance;

  ReadoutOptions sur;
  sur.engine = Engine::moments;
  sur.integrator = s.surrogate_integrator;
  try {
    const auto r = measurement_report(res.protocol, sur);
    res.surrogate_distinguishability = r.distinguishability;
    res.surrogate_disturbance = r.disturbance;
  } catch (const Error&) {
    res.surrogate_distinguishability = std::numeric_limits<double>::quiet_NaN();
    res.surrogate_disturbance = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

// ---------------------------------------------------------------------------
// Minimum time to reach a target distinguishability, per coupling strength.

struct TimeToFidelityRow {
  double g_mhz = 0.0;
  double tau_min = std::numeric_limits<double>::quiet_NaN();
  bool reachable = false;
  double distinguishability = 0.0;
  double disturbance = 0.0;
  SearchPoint best{};
};

struct TimeToFidelitySettings {
  double target = 0.99;
  double tau_lo = 1.0, tau_hi = 20.0;
  double resolution = 0.5;  // ns
  OptimizeSettings optimize;
};

// Bisection over tau; each probe is one optimization at fixed tau, warm
// started from the best point found so far (rescaled to the new tau).
inline std::vector<TimeToFidelityRow> time_to_fidelity(const SearchSpace& base, const std::vector<double>& g_grid_mhz,
                                                       const TimeToFidelitySettings& s,
                                                       const std::vector<SearchPoint>& warm_starts = {}) {
  std::vector<TimeToFidelityRow> rows;
  for (double g : g_grid_mhz) {
    TimeToFidelityRow row;
    row.g_mhz = g;
    std::vector<SearchPoint> seeds = warm_starts;
    auto probe = [&](double tau, OptimizationResult& out) {
      SearchSpace sp = base;
      sp.g_max_mhz = g;
      sp.set_tau(tau);
      std::vector<SearchPoint> scaled;
      for (auto x : seeds) {
        const double f = tau / base.tau;
        x[kRampOn] *= f;
        x[kRampOff] *= f;
        x[kRampRate] /= f;
        scaled.push_back(sp.clamp(x));
      }
      if (g <= 0.0) return false;
      out = optimize_protocol(sp, s.optimize, scaled);
      return out.feasible && out.distinguishability >= s.target;
    };
    OptimizationResult hi_res;
    if (!probe(s.tau_hi, hi_res)) {
      rows.push_back(row);
      continue;
    }
    double lo = s.tau_lo, hi = s.tau_hi;
    OptimizationResult best = hi_res;
    seeds = {hi_res.best};
    while (hi - lo > s.resolution) {
      const double mid = 0.5 * (lo + hi);
      OptimizationResult r;
      if (probe(mid, r)) {
        hi = mid;
        best = r;
        seeds = {r.best};
      } else {
        lo = mid;
      }
    }
    row.reachable = true;
    row.tau_min = hi;
    row.distinguishability = best.distinguishability;
    row.disturbance = best.disturbance;
    row.best = best.best;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Monte-Carlo robustness of the ramp parameters

struct RobustnessRow {
  double sigma_pct = 0.0;
  int samples = 0;
  double mean_error = 0.0;  // mean fractional change of the final population
  double std_error = 0.0;   // sample standard deviation
  double standard_error = 0.0;
  bool flagged = false;     // standard error above 10% of the mean
};

struct RobustnessSettings {
  std::vector<double> sigma_pct{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  int samples = 200;
  int initial_level = 1;
  IntegratorConfig integrator = [] {
    IntegratorConfig c;
    c.rel_tol = 1e-8;
    c.abs_tol = 1e-10;
    c.samples = 2;
    return c;
  }();
  unsigned threads = 0;
};

// Fractional disturbance of the final population of the initial level,
// |P_x(tau) - 1|, for the protocol with the qubit starting in |x>.
inline double population_error(const Protocol& pr, int x, const IntegratorConfig& cfg) {
  const HilbertDims& d = pr.params.dims;
  const JointState psi0 =
      tensor_state(basis_state(d.qubit_levels, x), squeezed_coherent_state(pr.cavity, d.cavity_cutoff));
  const auto h = build_interaction_hamiltonian(pr.params, pr.schedule);
  const auto traj = evolve_schrodinger(psi0, h, 0.0, pr.tau, cfg, effective_max_step(cfg, pr.params));
  const auto pops = as_branches(traj.final_state()).rowwise().squaredNorm();
  return std::abs(1.0 - pops(x));
}

// Each sample draws from its own generator seeded by (seed, row, sample), so
// results do not depend on evaluation order.
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t row, std::uint64_t sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(sample)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline std::vector<RobustnessRow> robustness_mc(const Protocol& nominal, const RobustnessSettings& s,
                                                std::uint64_t seed) {
  nominal.validate();
  if (s.samples < 1) throw DomainError("robustness_mc needs at least one sample");
  std::vector<RobustnessRow> rows;
  for (std::size_t r = 0; r < s.sigma_pct.size(); ++r) {
    const double pct = s.sigma_pct[r];
    RobustnessRow row;
    row.sigma_pct = pct;
    const int n = pct == 0.0 ? 1 : s.samples;
    row.samples = n;
    std::vector<double> err(static_cast<std::size_t>(n));
    parallel_for(
        err.size(),
        [&](std::size_t i) {
          std::mt19937_64 rng(sample_seed(seed, r, i));
          std::normal_distribution<double> normal(0.0, 1.0);
          Protocol p = nominal;
          Envelope& e = p.schedule.envelope;
          const double k = pct / 100.0;
          e.v1 = std::max(1e-3, e.v1 * (1.0 + k * normal(rng)));
          e.t1 = std::max(0.0, e.t1 * (1.0 + k * normal(rng)));
          e.t2 = std::max(e.t1 + 1e-3, e.t2 * (1.0 + k * normal(rng)));
          err[i] = population_error(p, s.initial_level, s.integrator);
        },
        s.threads);
    const double mean = std::accumulate(err.begin(), err.end(), 0.0) / n;
    double var = 0.0;
    for (double v : err) var += (v - mean) * (v - mean);
    row.mean_error = mean;
    row.std_error = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    row.standard_error = n > 1 ? row.std_error / std::sqrt(double(n)) : 0.0;
    row.flagged = n > 1 && row.standard_error > 0.1 * mean;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qnd
