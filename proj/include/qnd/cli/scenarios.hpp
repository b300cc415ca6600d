#pragma once

// Built-in scenarios. Each one reads a ScenarioConfig, runs its simulations
// and writes CSV tables plus a JSON report through Artifacts.

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qnd/cli/config.hpp"
#include "qnd/cli/output.hpp"
#include "qnd/metrics.hpp"
#include "qnd/search.hpp"

namespace qnd::cli {

template <class T>
T opt(const json& options, const char* key, T fallback) {
  return options.contains(key) ? options[key].get<T>() : fallback;
}

inline ReadoutOptions readout_options(const ScenarioConfig& sc) {
  ReadoutOptions o;
  o.engine = sc.engine;
  o.dynamics = sc.dynamics;
  o.integrator = sc.integrator;
  o.open_system = opt(sc.options, "open_system", false);
  return o;
}

struct LabeledProtocol {
  std::string label;
  Protocol protocol;
};

// options.protocols: [{"label": ..., "patch": {...}}]; each patch is merged
// onto the base configuration.
inline std::vector<LabeledProtocol> protocol_variants(const ScenarioConfig& sc) {
  std::vector<LabeledProtocol> out;
  if (!sc.options.contains("protocols")) {
    out.push_back({"base", sc.protocol});
    return out;
  }
  for (const auto& v : sc.options["protocols"]) {
    const std::string label = v.value("label", "p" + std::to_string(out.size()));
    out.push_back({label, build_variant(sc.source, v.value("patch", json::object()), sc.override_bounds)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Search space and optimizer settings from a config

inline int search_index(const std::string& name) {
  for (int i = 0; i < kSearchDims; ++i)
    if (name == kSearchVarNames[i]) return i;
  throw ConfigError("unknown search variable " + name);
}

inline SearchSpace search_space_for(const ScenarioConfig& sc, const Protocol& pr) {
  SearchSpace s = SearchSpace::for_tau(pr.tau);
  s.g_max_mhz = units::to_mhz(pr.params.g_max);
  if (sc.override_bounds) s.max_g_max_mhz = std::max(s.max_g_max_mhz, s.g_max_mhz);
  s.cavity = pr.cavity;
  s.qubit_model = pr.params.qubit_model;
  s.qubit_levels = pr.params.dims.qubit_levels;
  s.anharmonicity_mhz = units::to_mhz(pr.params.anharmonicity);
  s.kappa_int_khz = units::to_khz(pr.params.kappa_int);
  s.kappa_ext_mhz = units::to_mhz(pr.params.kappa_ext);
  s.cavity_cutoff = sc.source["system"].value("cavity_cutoff", 0);
  const SearchPoint base = point_from_protocol(pr);
  if (sc.override_bounds)
    for (int i : {int(kFreqQubit), int(kFreqCavity)}) {
      s.bounds[i].lo = std::min(s.bounds[i].lo, base[i]);
      s.bounds[i].hi = std::max(s.bounds[i].hi, base[i]);
    }
  if (sc.options.contains("bounds"))
    for (const auto& [name, b] : sc.options["bounds"].items()) s.bounds[search_index(name)] = {b.at(0), b.at(1)};
  if (sc.options.contains("fix"))
    for (const auto& name : sc.options["fix"]) {
      const int i = search_index(name.get<std::string>());
      s.bounds[i] = {base[i], base[i]};
    }
  return s;
}

inline OptimizeSettings optimize_settings(const ScenarioConfig& sc) {
  OptimizeSettings s;
  const json o = sc.options.value("search", json::object());
  s.objective.d_bound = opt(o, "d_bound", s.objective.d_bound);
  s.objective.penalty = opt(o, "penalty", s.objective.penalty);
  s.objective.edge_tolerance = opt(o, "edge_tolerance", s.objective.edge_tolerance);
  s.de.population = opt(o, "population", s.de.population);
  s.de.generations = opt(o, "generations", s.de.generations);
  s.local.max_evaluations = opt(o, "local_evaluations", s.local.max_evaluations);
  s.local.initial_step = opt(o, "initial_step", s.local.initial_step);
  s.local_starts = opt(o, "local_starts", s.local_starts);
  s.skip_global = opt(o, "skip_global", s.skip_global);
  s.local_integrator.rel_tol = opt(o, "local_rel_tol", s.local_integrator.rel_tol);
  s.local_integrator.abs_tol = opt(o, "local_abs_tol", s.local_integrator.abs_tol);
  s.verify_integrator = sc.integrator;
  s.verify_integrator.samples = 2;
  s.seed = sc.seed;
  return s;
}

// Rescales ramp parameters from one interaction time to another.
inline SearchPoint rescale_point(SearchPoint x, double from_tau, double to_tau) {
  const double f = to_tau / from_tau;
  x[kRampOn] *= f;
  x[kRampOff] *= f;
  x[kRampRate] /= f;
  return x;
}

inline std::vector<Cell> point_cells(const SearchPoint& x) { return {x[0], x[1], x[2], x[3], x[4], x[5]}; }

inline std::vector<std::string> with_point_columns(std::vector<std::string> h) {
  for (const char* n : kSearchVarNames) h.emplace_back(n);
  return h;
}

// ---------------------------------------------------------------------------
// recurrence

inline json run_recurrence(const ScenarioConfig& sc, Artifacts& art) {
  const auto variants = protocol_variants(sc);
  std::vector<ReadoutReport> reports;
  double t_max = 0.0;
  for (const auto& v : variants) {
    reports.push_back(measurement_report(v.protocol, readout_options(sc)));
    t_max = std::max(t_max, v.protocol.tau);
  }
  std::vector<std::string> header{"t_ns"};
  for (const auto& v : variants) header.push_back("P_" + v.label);
  CsvTable trace(header);
  for (double t : qnd::detail::sample_grid(0.0, t_max, sc.integrator.samples)) {
    std::vector<Cell> row{t};
    for (std::size_t k = 0; k < variants.size(); ++k) {
      const auto& b = reports[k].branches[1];
      if (t > b.times.back() * (1.0 + 1e-12)) {
        row.emplace_back(std::string());
        continue;
      }
      const auto it = std::lower_bound(b.times.begin(), b.times.end(), t - 1e-12);
      const std::size_t i = static_cast<std::size_t>(it - b.times.begin());
      double p = b.populations[i](1);
      if (i > 0 && std::abs(b.times[i] - t) > 1e-12) {
        const double w = (t - b.times[i - 1]) / (b.times[i] - b.times[i - 1]);
        p = (1.0 - w) * b.populations[i - 1](1) + w * p;
      }
      row.emplace_back(p);
    }
    trace.add(row);
  }
  art.csv("recurrence.csv", trace);

  CsvTable summary({"label", "tau_ns", "distinguishability", "disturbance", "p0", "p1", "P_final"});
  json out = json::object();
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const auto& r = reports[k];
    summary.add({variants[k].label, variants[k].protocol.tau, r.distinguishability, r.disturbance, r.p0, r.p1,
                 r.branches[1].final_populations(1)});
    out[variants[k].label] = {{"protocol", to_json(variants[k].protocol)}, {"readout", to_json(r)}};
    for (const auto& w : r.warnings()) art.warn(variants[k].label + ": " + w);
  }
  art.csv("recurrence_summary.csv", summary);
  return out;
}

// ---------------------------------------------------------------------------
// fidelity-vs-tau

inline json run_fidelity_vs_tau(const ScenarioConfig& sc, Artifacts& art) {
  const Protocol& base = sc.protocol;
  const auto taus = opt(sc.options, "tau_grid", std::vector<double>{base.tau});
  const bool reoptimize = opt(sc.options, "reoptimize", true);
  const OptimizeSettings settings = optimize_settings(sc);
  CsvTable t(with_point_columns({"tau_ns", "distinguishability", "disturbance", "p0", "p1", "feasible"}));
  json rows = json::array();
  SearchPoint warm = point_from_protocol(base);
  double warm_tau = base.tau;
  for (double tau : taus) {
    SearchSpace sp = search_space_for(sc, base);
    sp.set_tau(tau);
    const SearchPoint x0 = sp.clamp(rescale_point(warm, warm_tau, tau));
    if (reoptimize) {
      const OptimizationResult r = optimize_protocol(sp, settings, {x0});
      auto cells = std::vector<Cell>{tau, r.distinguishability, r.disturbance, r.verification.p0, r.verification.p1,
                                     long(r.feasible)};
      for (auto& c : point_cells(r.best)) cells.push_back(c);
      t.add(cells);
      rows.push_back({{"tau_ns", tau}, {"optimization", to_json(r)}});
      warm = r.best;
      warm_tau = tau;
    } else {
      const Protocol pr = sp.protocol(x0);
      const ReadoutReport r = measurement_report(pr, readout_options(sc));
      const bool feasible = r.disturbance <= settings.objective.d_bound;
      auto cells = std::vector<Cell>{tau, r.distinguishability, r.disturbance, r.p0, r.p1, long(feasible)};
      for (auto& c : point_cells(x0)) cells.push_back(c);
      t.add(cells);
      rows.push_back({{"tau_ns", tau}, {"readout", to_json(r)}});
    }
  }
  art.csv("fidelity_vs_tau.csv", t);
  return {{"rows", rows}};
}

// ---------------------------------------------------------------------------
// time-vs-g

inline json run_time_vs_g(const ScenarioConfig& sc, Artifacts& art) {
  const Protocol& base = sc.protocol;
  TimeToFidelitySettings s;
  s.target = opt(sc.options, "target", s.target);
  s.tau_lo = opt(sc.options, "tau_lo_ns", s.tau_lo);
  s.tau_hi = opt(sc.options, "tau_hi_ns", s.tau_hi);
  s.resolution = opt(sc.options, "resolution_ns", s.resolution);
  s.optimize = optimize_settings(sc);
  const auto grid = opt(sc.options, "g_grid_mhz", std::vector<double>{units::to_mhz(base.params.g_max)});
  SearchSpace sp = search_space_for(sc, base);
  for (double g : grid) sp.max_g_max_mhz = std::max(sp.max_g_max_mhz, sc.override_bounds ? g : sp.max_g_max_mhz);
  const auto rows = time_to_fidelity(sp, grid, s, {point_from_protocol(base)});
  CsvTable t(with_point_columns({"g_mhz", "tau_min_ns", "reachable", "distinguishability", "disturbance"}));
  json out = json::array();
  for (const auto& r : rows) {
    auto cells = std::vector<Cell>{r.g_mhz, r.tau_min, long(r.reachable), r.distinguishability, r.disturbance};
    for (auto& c : point_cells(r.best)) cells.push_back(c);
    t.add(cells);
    out.push_back({{"g_mhz", r.g_mhz}, {"tau_min_ns", r.tau_min}, {"reachable", r.reachable}, {"best", to_json(r.best)}});
    if (!r.reachable) art.warn("target unreachable within tau budget at g=" + std::to_string(r.g_mhz) + " MHz");
  }
  art.csv("time_vs_g.csv", t);
  return {{"target", s.target}, {"rows", out}};
}

// ---------------------------------------------------------------------------
// Dispersive-breakdown sweep (da-distance, da-flip)

struct DaPoint {
  double ratio = 0.0;
  ReadoutReport exact, exact_da, moments, moments_da;
  DispersiveAnalytics analytics;
  double peak_photons = 0.0;
};

inline Protocol da_protocol(const Protocol& base, double ratio, double sign) {
  Protocol pr = base;
  pr.params.omega_q = pr.params.omega_c + sign * ratio * pr.params.g_max;
  return pr;
}

inline std::vector<DaPoint> da_sweep(const ScenarioConfig& sc, bool with_da) {
  const auto ratios = opt(sc.options, "ratios", std::vector<double>{8, 10, 12, 15, 20, 25, 30, 35, 40, 50, 60});
  const double sign = opt(sc.options, "detuning_sign", 1.0) >= 0 ? 1.0 : -1.0;
  std::vector<DaPoint> pts(ratios.size());
  parallel_for(
      ratios.size(),
      [&](std::size_t i) {
        DaPoint& p = pts[i];
        p.ratio = ratios[i];
        const Protocol pr = da_protocol(sc.protocol, ratios[i], sign);
        ReadoutOptions o;
        o.integrator = sc.integrator;
        o.engine = Engine::exact;
        p.exact = measurement_report(pr, o);
        o.engine = Engine::moments;
        p.moments = measurement_report(pr, o);
        if (with_da) {
          o.dynamics = Dynamics::dispersive;
          o.engine = Engine::exact;
          p.exact_da = measurement_report(pr, o);
          o.engine = Engine::moments;
          p.moments_da = measurement_report(pr, o);
        }
        p.analytics = dispersive_analytics(pr.params.g_max, pr.params.detuning(), pr.tau, sc.protocol.cavity.alpha,
                                           pr.schedule);
        for (const auto& b : p.exact.branches)
          p.peak_photons = std::max(p.peak_photons, *std::max_element(b.photons.begin(), b.photons.end()));
      },
      opt(sc.options, "threads", 0u));
  return pts;
}

inline json run_da_distance(const ScenarioConfig& sc, Artifacts& art) {
  const auto pts = da_sweep(sc, true);
  CsvTable t({"delta_over_g", "distance_exact", "distance_da_exact", "distance_moments", "distance_da_moments",
              "lambda_da_analytic", "n_crit", "peak_photons", "da_deviation_pct", "moment_deviation_pct"});
  double exact_s = 0.0, moment_s = 0.0;
  for (const auto& p : pts) {
    const double tau = sc.protocol.tau;
    const double de = centroid_distance(p.exact, tau), dd = centroid_distance(p.exact_da, tau);
    const double dm = centroid_distance(p.moments, tau), dmd = centroid_distance(p.moments_da, tau);
    t.add({p.ratio, de, dd, dm, dmd, p.analytics.lambda, p.analytics.n_crit, p.peak_photons, 100.0 * (dd - de) / de,
           100.0 * (dm - de) / de});
    exact_s += p.exact.wall_seconds;
    moment_s += p.moments.wall_seconds;
    for (const auto& w : p.exact_da.warnings()) art.warn("delta/g=" + std::to_string(p.ratio) + ": " + w);
  }
  art.csv("da_distance.csv", t);
  return {{"exact_seconds", exact_s}, {"moment_seconds", moment_s}, {"points", pts.size()}};
}

inline json run_da_flip(const ScenarioConfig& sc, Artifacts& art) {
  const auto pts = da_sweep(sc, false);
  CsvTable t({"delta_over_g", "p0_exact", "p1_exact", "p0_moments", "p1_moments"});
  for (const auto& p : pts) t.add({p.ratio, p.exact.p0, p.exact.p1, p.moments.p0, p.moments.p1});
  art.csv("da_flip.csv", t);
  return {{"points", pts.size()}};
}

// ---------------------------------------------------------------------------
// Transmon scenarios

inline json run_transmon_phasespace(const ScenarioConfig& sc, Artifacts& art) {
  const Protocol& pr = sc.protocol;
  const int levels = std::min(opt(sc.options, "levels", 4), pr.params.dims.qubit_levels);
  const auto h = qnd::detail::exact_hamiltonian(pr.params, pr.schedule, sc.dynamics);
  std::vector<BranchResult> branches;
  std::vector<CMatrix> factors(static_cast<std::size_t>(levels));
  for (int x = 0; x < levels; ++x) branches.push_back(qnd::detail::exact_pure_branch(pr, h, x, sc.integrator, factors[x]));

  std::vector<std::string> header{"t_ns"};
  for (int x = 0; x < levels; ++x) {
    header.push_back("a_re_" + std::to_string(x));
    header.push_back("a_im_" + std::to_string(x));
  }
  CsvTable paths(header);
  for (std::size_t i = 0; i < branches[0].times.size(); ++i) {
    std::vector<Cell> row{branches[0].times[i]};
    for (const auto& b : branches) {
      row.emplace_back(b.centroid[i].real());
      row.emplace_back(b.centroid[i].imag());
    }
    paths.add(row);
  }
  art.csv("centroids.csv", paths);

  std::vector<double> window;
  if (sc.options.contains("window")) {
    window = sc.options["window"].get<std::vector<double>>();
    if (window.size() != 4) throw ConfigError("options.window must be [x_min, x_max, y_min, y_max]");
  } else {
    double x0 = pr.cavity.alpha.real(), x1 = x0, y0 = pr.cavity.alpha.imag(), y1 = y0;
    for (const auto& b : branches) {
      x0 = std::min(x0, b.centroid.back().real());
      x1 = std::max(x1, b.centroid.back().real());
      y0 = std::min(y0, b.centroid.back().imag());
      y1 = std::max(y1, b.centroid.back().imag());
    }
    window = {x0 - 4.0, x1 + 4.0, y0 - 4.0, y1 + 4.0};
  }
  const int n = opt(sc.options, "grid", 61);
  CsvTable q({"state", "x", "y", "q"});
  auto emit = [&](const std::string& label, const CMatrix& factor) {
    const HusimiGrid g = husimi_q(factor, window[0], window[1], window[2], window[3], n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) q.add({label, g.x[i], g.y[j], g.q(j, i)});
  };
  emit("initial", squeezed_coherent_state(pr.cavity, pr.params.dims.cavity_cutoff));
  for (int x = 0; x < levels; ++x) emit(std::to_string(x), factors[x]);
  art.csv("husimi.csv", q);

  json out = json::array();
  for (const auto& b : branches)
    out.push_back({{"initial_level", b.initial_level},
                   {"final_centroid", cplx_json(b.centroid.back())},
                   {"final_level_population", b.final_populations(b.initial_level)}});
  return {{"branches", out}, {"window", window}};
}

inline json run_transmon_leakage(const ScenarioConfig& sc, Artifacts& art) {
  const Protocol& pr = sc.protocol;
  const int x = opt(sc.options, "initial_level", 1);
  const int levels = pr.params.dims.qubit_levels;
  const auto h = qnd::detail::exact_hamiltonian(pr.params, pr.schedule, sc.dynamics);
  CMatrix factor;
  const BranchResult b = qnd::detail::exact_pure_branch(pr, h, x, sc.integrator, factor);
  std::vector<std::string> header{"t_ns"};
  for (int k = 0; k < levels; ++k) header.push_back("P" + std::to_string(k));
  header.push_back("P_first4");
  CsvTable t(header);
  double min_first4 = 1.0;
  for (std::size_t i = 0; i < b.times.size(); ++i) {
    std::vector<Cell> row{b.times[i]};
    for (int k = 0; k < levels; ++k) row.emplace_back(b.populations[i](k));
    const double s4 = b.populations[i].head(std::min(4, levels)).sum();
    min_first4 = std::min(min_first4, s4);
    row.emplace_back(s4);
    t.add(row);
  }
  art.csv("leakage.csv", t);
  return {{"initial_level", x},
          {"final_initial_population", b.final_populations(x)},
          {"min_first4_population", min_first4}};
}

// ---------------------------------------------------------------------------
// loss-sustain

struct LossCase {
  std::string name;
  Protocol protocol;
};

struct LossRun {
  std::vector<double> times, distinguishability, photons;
  double disturbance = 0.0;
};

inline LossRun run_loss_case(const Protocol& pr, const IntegratorConfig& cfg) {
  const auto h = build_interaction_hamiltonian(pr.params, pr.schedule);
  const HilbertDims& d = pr.params.dims;
  const std::vector<CollapseChannel> ch{{CollapseRole::cavity_annihilation, pr.params.kappa_total()}};
  std::array<MixedTrajectory, 2> traj;
  LossRun out;
  for (int x = 0; x < 2; ++x) {
    const JointState psi0 =
        tensor_state(basis_state(d.qubit_levels, x), squeezed_coherent_state(pr.cavity, d.cavity_cutoff));
    traj[x] = evolve_lindblad(DensityState::from_pure(psi0), h, ch, 0.0, pr.tau, cfg, effective_max_step(cfg, pr.params));
    out.disturbance = std::max(out.disturbance, 1.0 - qnd::detail::level_populations(traj[x].final_state())(x));
  }
  out.times = traj[0].times;
  for (std::size_t i = 0; i < out.times.size(); ++i) {
    const CMatrix r0 = partial_trace(traj[0].states[i], Subsystem::cavity);
    const CMatrix r1 = partial_trace(traj[1].states[i], Subsystem::cavity);
    out.distinguishability.push_back(1.0 - uhlmann_indistinguishability(r0, r1));
    out.photons.push_back(0.5 * (qnd::detail::cavity_moments(traj[0].states[i]).n +
                                 qnd::detail::cavity_moments(traj[1].states[i]).n));
  }
  return out;
}

inline json run_loss_sustain(const ScenarioConfig& sc, Artifacts& art) {
  Protocol sustain = sc.protocol;
  if (!sustain.schedule.sustain) {
    SustainDrive sd;
    sd.amplitude = 0.5 * sustain.params.kappa_total() * std::abs(sustain.cavity.alpha);
    sd.phase = std::arg(sustain.cavity.alpha) + 0.5 * M_PI;
    sd.t_start = 0.0;
    sd.t_end = sustain.tau;
    sustain.schedule.sustain = sd;
  }
  Protocol loss = sustain;
  loss.schedule.sustain.reset();
  Protocol lossless = loss;
  lossless.params.kappa_int = lossless.params.kappa_ext = 0.0;
  const std::vector<LossCase> cases{{"no_loss", lossless}, {"loss", loss}, {"sustain", sustain}};
  std::vector<LossRun> runs;
  for (const auto& c : cases) runs.push_back(run_loss_case(c.protocol, sc.integrator));

  std::vector<std::string> header{"t_ns"};
  for (const auto& c : cases) {
    header.push_back("D_" + c.name);
    header.push_back("n_" + c.name);
  }
  CsvTable trace(header);
  for (std::size_t i = 0; i < runs[0].times.size(); ++i) {
    std::vector<Cell> row{runs[0].times[i]};
    for (const auto& r : runs) {
      row.emplace_back(r.distinguishability[i]);
      row.emplace_back(r.photons[i]);
    }
    trace.add(row);
  }
  art.csv("loss_trace.csv", trace);
  CsvTable summary({"case", "kappa_mhz", "sustain_mhz", "distinguishability", "disturbance", "photons_final"});
  json out = json::object();
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& p = cases[k].protocol;
    const double s = p.schedule.sustain ? units::to_mhz(p.schedule.sustain->amplitude) : 0.0;
    summary.add({cases[k].name, units::to_mhz(p.params.kappa_total()), s, runs[k].distinguishability.back(),
                 runs[k].disturbance, runs[k].photons.back()});
    out[cases[k].name] = {{"distinguishability", runs[k].distinguishability.back()},
                          {"disturbance", runs[k].disturbance},
                          {"photons_final", runs[k].photons.back()}};
  }
  art.csv("loss_summary.csv", summary);
  return out;
}

// ---------------------------------------------------------------------------
// robustness

// Square-envelope baseline: the same protocol with a very fast ramp and its
// own on/off times (options.square).
inline Protocol square_baseline(const Protocol& pr, const json& o) {
  Protocol sq = pr;
  sq.schedule.envelope.v1 = opt(o, "v1_per_ns", 30.0);
  sq.schedule.envelope.t1 = opt(o, "t1_ns", pr.schedule.envelope.t1);
  sq.schedule.envelope.t2 = opt(o, "t2_ns", pr.schedule.envelope.t2);
  return sq;
}

inline json run_robustness(const ScenarioConfig& sc, Artifacts& art) {
  RobustnessSettings s;
  s.sigma_pct = opt(sc.options, "sigma_pct", s.sigma_pct);
  s.samples = opt(sc.options, "samples", s.samples);
  s.initial_level = opt(sc.options, "initial_level", s.initial_level);
  s.threads = opt(sc.options, "threads", 0u);
  s.integrator.rel_tol = sc.integrator.rel_tol;
  s.integrator.abs_tol = sc.integrator.abs_tol;
  if (s.samples < 100) art.warn("fewer than 100 samples per row");
  const Protocol square = square_baseline(sc.protocol, sc.options.value("square", json::object()));
  CsvTable t({"envelope", "sigma_pct", "samples", "mean_error", "std_error", "standard_error", "flagged"});
  json out = json::object();
  for (const auto& [name, pr] : {std::pair<std::string, Protocol>{"erfc", sc.protocol}, {"square", square}}) {
    const auto rows = robustness_mc(pr, s, sc.seed);
    json jr = json::array();
    for (const auto& r : rows) {
      t.add({name, r.sigma_pct, long(r.samples), r.mean_error, r.std_error, r.standard_error, long(r.flagged)});
      jr.push_back({{"sigma_pct", r.sigma_pct}, {"mean_error", r.mean_error}, {"flagged", r.flagged}});
      if (r.flagged) art.warn(name + " row sigma=" + std::to_string(r.sigma_pct) + "% has standard error > 10% of mean");
    }
    out[name] = {{"protocol", to_json(pr)}, {"rows", jr}};
  }
  art.csv("robustness.csv", t);
  return out;
}

// ---------------------------------------------------------------------------
// optimize

inline json run_optimize(const ScenarioConfig& sc, Artifacts& art) {
  const SearchSpace sp = search_space_for(sc, sc.protocol);
  std::vector<SearchPoint> warm{point_from_protocol(sc.protocol)};
  if (sc.options.contains("warm_starts"))
    for (const auto& w : sc.options["warm_starts"]) {
      SearchPoint x = warm.front();
      for (const auto& [k, v] : w.items()) x[search_index(k)] = v.get<double>();
      warm.push_back(x);
    }
  const OptimizationResult r = optimize_protocol(sp, optimize_settings(sc), warm);
  CsvTable t(with_point_columns({"start", "objective", "distinguishability", "disturbance", "edge", "feasible"}));
  for (std::size_t i = 0; i < r.local_results.size(); ++i) {
    const auto& e = r.local_results[i];
    auto cells = std::vector<Cell>{long(i), e.objective, e.distinguishability, e.disturbance, e.edge, long(e.feasible)};
    for (auto& c : point_cells(e.x)) cells.push_back(c);
    t.add(cells);
  }
  art.csv("optimize_candidates.csv", t);
  art.json_file("best_protocol.json", to_json(r.protocol));
  if (!r.feasible) art.warn("no candidate met the disturbance bound; best effort reported");
  json out = to_json(r);
  out["delta_over_g"] = r.protocol.params.detuning() / r.protocol.params.g_max;
  return out;
}

// ---------------------------------------------------------------------------
// Registry and runner

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::function<json(const ScenarioConfig&, Artifacts&)> run;
};

inline const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> list{
      {"recurrence", "excited-state population during the interaction for one or more protocols", run_recurrence},
      {"fidelity-vs-tau", "distinguishability against interaction time", run_fidelity_vs_tau},
      {"time-vs-g", "minimum interaction time for a target distinguishability against coupling", run_time_vs_g},
      {"da-distance", "final centroid distance with and without the dispersive approximation", run_da_distance},
      {"da-flip", "qubit flip probability against detuning", run_da_flip},
      {"transmon-phasespace", "Husimi Q of final cavity states for the lowest transmon levels",
       run_transmon_phasespace},
      {"transmon-leakage", "transmon level populations during the interaction", run_transmon_leakage},
      {"loss-sustain", "cavity loss with and without a sustain drive", run_loss_sustain},
      {"robustness", "Monte-Carlo sensitivity to ramp parameter errors, smooth vs square envelope", run_robustness},
      {"optimize", "protocol optimization at fixed interaction time", run_optimize},
  };
  return list;
}

inline const ScenarioInfo* find_scenario(const std::string& name) {
  for (const auto& s : scenarios())
    if (s.name == name) return &s;
  return nullptr;
}

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSimulation = 3 };

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::string> files;
};

inline json manifest(const ScenarioConfig& sc, const Artifacts& art, double wall_seconds) {
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"scenario", sc.scenario},
          {"seed", sc.seed},
          {"engine", to_string(sc.engine)},
          {"config_hash", hex64(fnv1a(sc.source.dump()))},
          {"config", sc.source},
          {"files", art.files()},
          {"warnings", art.warnings()},
          {"wall_seconds", wall_seconds},
          {"timestamp", utc_timestamp()}};
}

inline RunResult run_scenario(const std::string& name, const json& config, const FlagOverrides& flags = {}) {
  RunResult res;
  const ScenarioInfo* info = find_scenario(name);
  if (!info) {
    res.exit_code = kExitConfig;
    res.message = "unknown scenario: " + name;
    return res;
  }
  ScenarioConfig sc;
  try {
    sc = load_scenario(config, name, flags);
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
    return res;
  } catch (const Error& e) {
    res.exit_code = kExitConfig;
    res.message = std::string("invalid configuration: ") + e.what();
    return res;
  } catch (const json::exception& e) {
    res.exit_code = kExitConfig;
    res.message = std::string("invalid configuration: ") + e.what();
    return res;
  }
  Artifacts art(sc.output_dir);
  const auto start = std::chrono::steady_clock::now();
  try {
    const json report = info->run(sc, art);
    art.json_file("report.json", report);
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
    return res;
  } catch (const json::exception& e) {
    res.exit_code = kExitConfig;
    res.message = std::string("invalid scenario options: ") + e.what();
    return res;
  } catch (const std::exception& e) {
    res.exit_code = kExitSimulation;
    res.message = std::string("simulation failed: ") + e.what();
    return res;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  art.json_file("manifest.json", manifest(sc, art, wall));
  res.files = art.files();
  return res;
}

}  // namespace qnd::cli
