#pragma once

// CSV tables, JSON reports and the run manifest.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qnd/errors.hpp"
#include "qnd/metrics.hpp"
#include "qnd/search.hpp"

namespace qnd::cli {

using json = nlohmann::json;

inline constexpr const char* kToolName = "qndsim";
inline constexpr const char* kToolVersion = "0.1.0";

using Cell = std::variant<double, long, std::string>;

inline std::string format_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", *d);
    return buf;
  }
  if (const long* i = std::get_if<long>(&c)) return std::to_string(*i);
  const std::string& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != header_.size())
      throw Error("csv row has " + std::to_string(row.size()) + " cells, header has " + std::to_string(header_.size()));
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + format_cell(header_[i]);
    out += "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_cell(r[i]);
      out += "\n";
    }
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

// Collects everything a scenario writes, then flushes it in one place.
class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void csv(const std::string& name, const CsvTable& t) { write(name, t.str()); }
  void json_file(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  void warn(std::string w) { warnings_.push_back(std::move(w)); }

  const std::vector<std::string>& files() const { return files_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void write(const std::string& name, const std::string& body) {
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << body;
    files_.push_back(name);
  }

  std::filesystem::path dir_;
  std::vector<std::string> files_;
  std::vector<std::string> warnings_;
};

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON views of library results

inline json cplx_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

inline json to_json(const Protocol& pr) {
  const auto& p = pr.params;
  const auto& e = pr.schedule.envelope;
  json j = {
      {"system",
       {{"f_c_ghz", units::to_ghz(p.omega_c)},
        {"f_q_ghz", units::to_ghz(p.omega_q)},
        {"g_max_mhz", units::to_mhz(p.g_max)},
        {"anharmonicity_mhz", units::to_mhz(p.anharmonicity)},
        {"kappa_int_khz", units::to_khz(p.kappa_int)},
        {"kappa_ext_mhz", units::to_mhz(p.kappa_ext)},
        {"qubit_model", to_string(p.qubit_model)},
        {"qubit_levels", p.dims.qubit_levels},
        {"cavity_cutoff", p.dims.cavity_cutoff}}},
      {"pulse", {{"envelope", {{"shape", to_string(e.shape)}, {"v1_per_ns", e.v1}, {"t1_ns", e.t1}, {"t2_ns", e.t2}}}}},
      {"cavity", {{"alpha", cplx_json(pr.cavity.alpha)}, {"r", pr.cavity.r}, {"theta_rad", pr.cavity.theta}}},
      {"tau_ns", pr.tau}};
  if (pr.schedule.drive) {
    const auto& d = *pr.schedule.drive;
    j["pulse"]["drive"] = {{"g_d_mhz", units::to_mhz(d.amplitude)}, {"sigma_ns", d.sigma}, {"t1_ns", d.center}};
  }
  if (pr.schedule.sustain) {
    const auto& s = *pr.schedule.sustain;
    j["pulse"]["sustain"] = {{"amplitude_mhz", units::to_mhz(s.amplitude)},
                             {"phase_rad", s.phase},
                             {"t_start_ns", s.t_start},
                             {"t_end_ns", s.t_end}};
  }
  return j;
}

inline json to_json(const ReadoutReport& r) {
  json branches = json::array();
  for (const auto& b : r.branches) {
    json jb = {{"initial_level", b.initial_level},
               {"flip_probability", b.flip_probability},
               {"final_centroid", b.centroid.empty() ? json(nullptr) : cplx_json(b.centroid.back())},
               {"final_photons", b.photons.empty() ? 0.0 : b.photons.back()},
               {"final_populations", std::vector<double>(b.final_populations.data(),
                                                         b.final_populations.data() + b.final_populations.size())},
               {"steps_accepted", b.stats.accepted},
               {"steps_rejected", b.stats.rejected}};
    if (b.schmidt) {
      jb["schmidt"] = {{"epsilon", b.schmidt->epsilon}, {"q", b.schmidt->q}};
    }
    branches.push_back(jb);
  }
  return {{"engine", to_string(r.engine)},
          {"dynamics", to_string(r.dynamics)},
          {"distinguishability", r.distinguishability},
          {"indistinguishability", r.indistinguishability},
          {"p0", r.p0},
          {"p1", r.p1},
          {"disturbance", r.disturbance},
          {"cavity_cutoff", r.cavity_cutoff},
          {"wall_seconds", r.wall_seconds},
          {"branches", branches},
          {"warnings", r.warnings()}};
}

inline json to_json(const SearchPoint& x) {
  json j = json::object();
  for (int i = 0; i < kSearchDims; ++i) j[kSearchVarNames[i]] = x[i];
  return j;
}

inline json to_json(const Evaluation& e) {
  return {{"x", to_json(e.x)},       {"objective", e.objective}, {"distinguishability", e.distinguishability},
          {"disturbance", e.disturbance}, {"edge", e.edge},       {"feasible", e.feasible},
          {"failed", e.failed},      {"diagnostic", e.diagnostic}};
}

inline json to_json(const OptimizationResult& r) {
  json locals = json::array();
  for (const auto& e : r.local_results) locals.push_back(to_json(e));
  return {{"best", to_json(r.best)},
          {"distinguishability", r.distinguishability},
          {"disturbance", r.disturbance},
          {"surrogate_distinguishability", r.surrogate_distinguishability},
          {"surrogate_disturbance", r.surrogate_disturbance},
          {"verification_gap", std::abs(r.surrogate_distinguishability - r.distinguishability)},
          {"feasible", r.feasible},
          {"global_engine", r.global_engine},
          {"local_engine", r.local_engine},
          {"surrogate_evaluations", r.surrogate_evaluations},
          {"exact_evaluations", r.exact_evaluations},
          {"penalty_inversions", r.penalty_inversions},
          {"seed", r.seed},
          {"local_results", locals},
          {"protocol", to_json(r.protocol)},
          {"verification", to_json(r.verification)}};
}

}  // namespace qnd::cli
