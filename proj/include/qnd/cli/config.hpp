#pragma once

// Run configuration: JSON file -> validated ScenarioConfig.
//
// All frequencies in files are plain-cycle (GHz, MHz, kHz); they are
// converted to angular units when the protocol is built.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnd/errors.hpp"
#include "qnd/integrate.hpp"
#include "qnd/metrics.hpp"
#include "qnd/units.hpp"

namespace qnd::cli {

using json = nlohmann::json;

struct Violation {
  std::string path;
  std::string message;
};

inline std::string format_violations(const std::vector<Violation>& v) {
  std::string out;
  for (const auto& x : v) out += "  " + x.path + ": " + x.message + "\n";
  return out;
}

struct ConfigInvalid : ConfigError {
  std::vector<Violation> violations;
  explicit ConfigInvalid(std::vector<Violation> v)
      : ConfigError("invalid configuration:\n" + format_violations(v)), violations(std::move(v)) {}
};

// Search box applied to physical fields unless bounds are overridden.
struct PhysicalBounds {
  double f_q_lo = 3.0, f_q_hi = 7.0;    // GHz
  double f_c_lo = 8.0, f_c_hi = 11.0;   // GHz
  double g_max_hi = 100.0;              // MHz
};

struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  Engine engine = Engine::exact;
  Dynamics dynamics = Dynamics::rabi;
  std::string output_dir = "out";
  bool override_bounds = false;
  Protocol protocol;
  IntegratorConfig integrator;
  json options = json::object();
  json source = json::object();  // effective configuration after flag overrides
};

// ---------------------------------------------------------------------------
// Parsing

inline json parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  try {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line and column.
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " + e.what());
  }
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

class Checker {
 public:
  explicit Checker(const json& root) : root_(root) {}

  const json* find(const std::string& path) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (start <= path.size()) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(key)) return nullptr;
      node = &(*node)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return node;
  }

  std::optional<double> number(const std::string& path, bool required) {
    const json* n = find(path);
    if (!n) {
      if (required) add(path, "required field missing");
      return std::nullopt;
    }
    if (!n->is_number()) {
      add(path, "must be a number");
      return std::nullopt;
    }
    return n->get<double>();
  }

  std::optional<std::string> string(const std::string& path, bool required) {
    const json* n = find(path);
    if (!n) {
      if (required) add(path, "required field missing");
      return std::nullopt;
    }
    if (!n->is_string()) {
      add(path, "must be a string");
      return std::nullopt;
    }
    return n->get<std::string>();
  }

  void add(std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); }

  std::vector<Violation> out;

 private:
  const json& root_;
};

}  // namespace detail

inline std::vector<Violation> validate_config(const json& cfg, bool override_bounds = false,
                                              const PhysicalBounds& b = {}) {
  detail::Checker c(cfg);
  if (!cfg.is_object()) {
    c.add("$", "configuration must be a JSON object");
    return c.out;
  }
  if (const json* o = c.find("override_bounds"); o && o->is_boolean() && o->get<bool>()) override_bounds = true;

  const auto fc = c.number("system.f_c_ghz", true);
  const auto fq = c.number("system.f_q_ghz", true);
  const auto g = c.number("system.g_max_mhz", true);
  if (fc && *fc < 0) c.add("system.f_c_ghz", "must be >= 0");
  if (fq && *fq < 0) c.add("system.f_q_ghz", "must be >= 0");
  if (g && *g < 0) c.add("system.g_max_mhz", "must be >= 0");
  if (!override_bounds) {
    if (fq && *fq >= 0 && (*fq < b.f_q_lo || *fq > b.f_q_hi))
      c.add("system.f_q_ghz", "outside bound [" + std::to_string(b.f_q_lo) + ", " + std::to_string(b.f_q_hi) +
                                  "] GHz (use override_bounds)");
    if (fc && *fc >= 0 && (*fc < b.f_c_lo || *fc > b.f_c_hi))
      c.add("system.f_c_ghz", "outside bound [" + std::to_string(b.f_c_lo) + ", " + std::to_string(b.f_c_hi) +
                                  "] GHz (use override_bounds)");
    if (g && *g > b.g_max_hi)
      c.add("system.g_max_mhz", "above bound " + std::to_string(b.g_max_hi) + " MHz (use override_bounds)");
  }
  for (const char* k : {"system.anharmonicity_mhz", "system.kappa_int_khz", "system.kappa_ext_mhz"})
    if (const auto v = c.number(k, false); v && *v < 0) c.add(k, "must be >= 0");

  const auto model = c.string("system.qubit_model", false);
  if (model && *model != "ideal" && *model != "transmon") c.add("system.qubit_model", "must be ideal or transmon");
  if (const auto lv = c.number("system.qubit_levels", false)) {
    if (*lv != std::floor(*lv) || *lv < 2) c.add("system.qubit_levels", "must be an integer >= 2");
    else if (model.value_or("ideal") == "ideal" && *lv != 2) c.add("system.qubit_levels", "ideal qubit has 2 levels");
    else if (model.value_or("ideal") == "transmon" && *lv < 4) c.add("system.qubit_levels", "transmon needs >= 4 levels");
  }
  if (const auto n = c.number("system.cavity_cutoff", false); n && (*n != std::floor(*n) || (*n != 0 && *n < 2)))
    c.add("system.cavity_cutoff", "must be 0 (automatic) or an integer >= 2");

  const auto shape = c.string("pulse.envelope.shape", true);
  if (shape) {
    if (*shape != "erfc" && *shape != "square" && *shape != "constant") {
      c.add("pulse.envelope.shape", "must be erfc, square or constant");
    } else if (*shape != "constant") {
      const auto t1 = c.number("pulse.envelope.t1_ns", true);
      const auto t2 = c.number("pulse.envelope.t2_ns", true);
      if (t1 && *t1 < 0) c.add("pulse.envelope.t1_ns", "must be >= 0");
      if (t1 && t2 && !(*t2 > *t1)) c.add("pulse.envelope.t2_ns", "must exceed t1_ns");
      if (*shape == "erfc") {
        const auto v1 = c.number("pulse.envelope.v1_per_ns", true);
        if (v1 && !(*v1 > 0)) c.add("pulse.envelope.v1_per_ns", "must be > 0");
      }
    }
  }
  if (c.find("pulse.drive")) {
    c.number("pulse.drive.g_d_mhz", true);
    const auto s = c.number("pulse.drive.sigma_ns", true);
    if (s && !(*s > 0)) c.add("pulse.drive.sigma_ns", "must be > 0");
    c.number("pulse.drive.t1_ns", true);
  }
  if (const json* s = c.find("pulse.sustain")) {
    const bool auto_amp = s->is_object() && s->contains("amplitude_mhz") && (*s)["amplitude_mhz"].is_string();
    if (auto_amp) {
      if ((*s)["amplitude_mhz"].get<std::string>() != "auto")
        c.add("pulse.sustain.amplitude_mhz", "must be a number or \"auto\"");
    } else {
      c.number("pulse.sustain.amplitude_mhz", true);
    }
    const auto a = c.number("pulse.sustain.t_start_ns", false);
    const auto e = c.number("pulse.sustain.t_end_ns", false);
    if (a && e && *e < *a) c.add("pulse.sustain.t_end_ns", "must not precede t_start_ns");
  }

  const json* alpha = c.find("cavity.alpha");
  if (!alpha) c.add("cavity.alpha", "required field missing");
  else if (!alpha->is_number() && !(alpha->is_object() && alpha->contains("re")))
    c.add("cavity.alpha", "must be a number or {\"re\": x, \"im\": y}");
  if (const auto r = c.number("cavity.r", false); r && *r < 0) c.add("cavity.r", "must be >= 0");
  c.number("cavity.theta_rad", false);

  const auto tau = c.number("tau_ns", true);
  if (tau && !(*tau > 0)) c.add("tau_ns", "must be > 0");

  if (const auto m = c.string("integrator.method", false); m && *m != "adaptive_rk" && *m != "fixed_rk4")
    c.add("integrator.method", "must be adaptive_rk or fixed_rk4");
  for (const char* k : {"integrator.rel_tol", "integrator.abs_tol", "integrator.norm_check_interval_ns"})
    if (const auto v = c.number(k, false); v && !(*v > 0)) c.add(k, "must be > 0");
  if (const auto v = c.number("integrator.max_step_ns", false); v && *v < 0)
    c.add("integrator.max_step_ns", "must be >= 0");
  if (const auto v = c.number("integrator.samples", false); v && (*v < 2 || *v != std::floor(*v)))
    c.add("integrator.samples", "must be an integer >= 2");

  if (const auto e = c.string("engine", false); e && *e != "exact" && *e != "moments")
    c.add("engine", "must be exact or moments");
  if (const auto d = c.string("dynamics", false); d && *d != "rabi" && *d != "rwa" && *d != "dispersive")
    c.add("dynamics", "must be rabi, rwa or dispersive");
  if (const json* s = c.find("seed"); s && !s->is_number_unsigned()) c.add("seed", "must be a non-negative integer");
  return c.out;
}

// ---------------------------------------------------------------------------
// Building

inline double get_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j[key].get<double>() : fallback;
}

inline cplx parse_alpha(const json& a) {
  if (a.is_number()) return {a.get<double>(), 0.0};
  return {a.value("re", 0.0), a.value("im", 0.0)};
}

inline Engine parse_engine(const std::string& s) {
  if (s == "exact") return Engine::exact;
  if (s == "moments") return Engine::moments;
  throw ConfigError("unknown engine " + s);
}

inline Dynamics parse_dynamics(const std::string& s) {
  if (s == "rabi") return Dynamics::rabi;
  if (s == "rwa") return Dynamics::rwa;
  if (s == "dispersive") return Dynamics::dispersive;
  throw ConfigError("unknown dynamics " + s);
}

// Builds the protocol from an already validated config. An "auto" sustain
// amplitude is resolved to kappa |alpha| / 2 with phase arg(alpha) + pi/2,
// which holds a coherent amplitude against loss while the coupler is off.
inline Protocol build_protocol(const json& cfg) {
  Protocol pr;
  const json& sys = cfg.at("system");
  SystemParams& p = pr.params;
  p.omega_c = units::from_ghz(sys.at("f_c_ghz").get<double>());
  p.omega_q = units::from_ghz(sys.at("f_q_ghz").get<double>());
  p.g_max = units::from_mhz(sys.at("g_max_mhz").get<double>());
  p.anharmonicity = units::from_mhz(get_or(sys, "anharmonicity_mhz", 200.0));
  p.kappa_int = units::from_khz(get_or(sys, "kappa_int_khz", 0.0));
  p.kappa_ext = units::from_mhz(get_or(sys, "kappa_ext_mhz", 0.0));
  p.qubit_model = sys.value("qubit_model", std::string("ideal")) == "transmon" ? QubitModel::transmon : QubitModel::ideal;
  const int levels = static_cast<int>(get_or(sys, "qubit_levels", p.qubit_model == QubitModel::ideal ? 2 : 6));

  const json& cav = cfg.at("cavity");
  pr.cavity.alpha = parse_alpha(cav.at("alpha"));
  pr.cavity.r = get_or(cav, "r", 0.0);
  pr.cavity.theta = get_or(cav, "theta_rad", 0.0);
  const int cutoff_cfg = static_cast<int>(get_or(sys, "cavity_cutoff", 0.0));
  pr.tau = cfg.at("tau_ns").get<double>();

  const json& env = cfg.at("pulse").at("envelope");
  const std::string shape = env.at("shape").get<std::string>();
  Envelope& e = pr.schedule.envelope;
  e.shape = shape == "erfc" ? EnvelopeShape::erfc : shape == "square" ? EnvelopeShape::square : EnvelopeShape::constant;
  e.v1 = get_or(env, "v1_per_ns", 1.0);
  e.t1 = get_or(env, "t1_ns", 0.0);
  e.t2 = get_or(env, "t2_ns", pr.tau);
  const json& pulse = cfg.at("pulse");
  if (pulse.contains("drive")) {
    const json& d = pulse["drive"];
    pr.schedule.drive = GaussianDrive{units::from_mhz(d.at("g_d_mhz").get<double>()), d.at("sigma_ns").get<double>(),
                                      d.at("t1_ns").get<double>()};
  }
  if (pulse.contains("sustain")) {
    const json& s = pulse["sustain"];
    SustainDrive sd;
    if (s.at("amplitude_mhz").is_string()) {
      sd.amplitude = 0.5 * p.kappa_total() * std::abs(pr.cavity.alpha);
      sd.phase = std::arg(pr.cavity.alpha) + 0.5 * M_PI;
    } else {
      sd.amplitude = units::from_mhz(s["amplitude_mhz"].get<double>());
      sd.phase = get_or(s, "phase_rad", std::arg(pr.cavity.alpha) + 0.5 * M_PI);
    }
    sd.t_start = get_or(s, "t_start_ns", 0.0);
    sd.t_end = get_or(s, "t_end_ns", pr.tau);
    pr.schedule.sustain = sd;
  }
  // A cavity drive adds photons beyond the initial state; size for the
  // larger of the two.
  CavityStateSpec sizing = pr.cavity;
  if (pr.schedule.drive) {
    const auto& d = *pr.schedule.drive;
    const double area = d.amplitude * d.sigma * std::sqrt(2.0 * M_PI);
    sizing.alpha = std::abs(pr.cavity.alpha) + area;
  }
  const int cutoff = cutoff_cfg > 0 ? cutoff_cfg
                     : sizing.alpha != pr.cavity.alpha ? default_cavity_cutoff(sizing)
                                                       : fitting_cavity_cutoff(pr.cavity);
  p.dims = {p.qubit_model == QubitModel::ideal ? 2 : levels, cutoff};
  return pr;
}

inline IntegratorConfig build_integrator(const json& cfg) {
  IntegratorConfig ic;
  if (!cfg.contains("integrator")) return ic;
  const json& j = cfg["integrator"];
  if (j.value("method", std::string("adaptive_rk")) == "fixed_rk4") ic.method = IntegratorMethod::fixed_rk4;
  ic.rel_tol = get_or(j, "rel_tol", ic.rel_tol);
  ic.abs_tol = get_or(j, "abs_tol", ic.abs_tol);
  ic.max_step = get_or(j, "max_step_ns", ic.max_step);
  ic.norm_check_interval = get_or(j, "norm_check_interval_ns", ic.norm_check_interval);
  ic.samples = static_cast<int>(get_or(j, "samples", ic.samples));
  ic.truncation_tolerance = get_or(j, "truncation_tolerance", ic.truncation_tolerance);
  return ic;
}

struct FlagOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> engine;
  bool override_bounds = false;
};

// Precedence: command-line flags > config file > built-in defaults.
inline ScenarioConfig load_scenario(json cfg, const std::string& scenario, const FlagOverrides& flags) {
  if (!cfg.is_object()) cfg = json::object();
  if (flags.output_dir) cfg["output_dir"] = *flags.output_dir;
  if (flags.seed) cfg["seed"] = *flags.seed;
  if (flags.engine) cfg["engine"] = *flags.engine;
  if (flags.override_bounds) cfg["override_bounds"] = true;
  cfg["scenario"] = scenario;
  const auto violations = validate_config(cfg);
  if (!violations.empty()) throw ConfigInvalid(violations);
  ScenarioConfig sc;
  sc.scenario = scenario;
  sc.seed = cfg.value("seed", std::uint64_t{1});
  sc.engine = parse_engine(cfg.value("engine", std::string("exact")));
  sc.dynamics = parse_dynamics(cfg.value("dynamics", std::string("rabi")));
  sc.output_dir = cfg.value("output_dir", std::string("out"));
  sc.override_bounds = cfg.value("override_bounds", false);
  sc.protocol = build_protocol(cfg);
  sc.integrator = build_integrator(cfg);
  sc.options = cfg.value("options", json::object());
  sc.source = cfg;
  return sc;
}

// A variant of the base configuration given by an RFC 7386 merge patch.
inline json apply_patch(const json& base, const json& patch) {
  json out = base;
  out.merge_patch(patch);
  return out;
}

inline Protocol build_variant(const json& base, const json& patch, bool override_bounds) {
  const json cfg = apply_patch(base, patch);
  const auto v = validate_config(cfg, override_bounds);
  if (!v.empty()) throw ConfigInvalid(v);
  return build_protocol(cfg);
}

}  // namespace qnd::cli
