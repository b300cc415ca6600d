#pragma once

// Readout figures of merit for one protocol: distinguishability of the two
// qubit-conditioned cavity states, qubit flip probabilities, and dispersive
// analytics.

#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qnd/fidelity.hpp"
#include "qnd/integrate.hpp"
#include "qnd/models.hpp"
#include "qnd/moments.hpp"

namespace qnd {

struct Protocol {
  SystemParams params;
  PulseSchedule schedule;
  CavityStateSpec cavity;
  double tau = 6.0;  // ns

  void validate() const {
    params.validate();
    schedule.validate();
    if (!(tau > 0.0)) throw DomainError("tau must be > 0");
  }
};

enum class Engine { exact, moments };

inline std::string to_string(Engine e) { return e == Engine::exact ? "exact" : "moments"; }

// Which Hamiltonian the exact engine integrates.
enum class Dynamics { rabi, rwa, dispersive };

inline std::string to_string(Dynamics d) {
  switch (d) {
    case Dynamics::rabi: return "rabi";
    case Dynamics::rwa: return "rwa";
    case Dynamics::dispersive: return "dispersive";
  }
  return "?";
}

struct ReadoutOptions {
  Engine engine = Engine::exact;
  Dynamics dynamics = Dynamics::rabi;
  IntegratorConfig integrator;
  // Integrate the Lindblad equation when the cavity has loss; otherwise
  // loss is ignored by the exact engine.
  bool open_system = false;
};

struct BranchResult {
  int initial_level = 0;
  std::vector<double> times;
  std::vector<cplx> centroid;             // <a>(t), cavity rotating frame
  std::vector<double> photons;            // <a^dag a>(t)
  std::vector<Eigen::VectorXd> populations;  // qubit level populations (t)
  Eigen::VectorXd final_populations;
  double flip_probability = 0.0;
  std::optional<SchmidtDecomposition> schmidt;
  ode::Stats stats;
  std::vector<std::string> warnings;
};

struct ReadoutReport {
  Engine engine = Engine::exact;
  Dynamics dynamics = Dynamics::rabi;
  double indistinguishability = 1.0;
  double distinguishability = 0.0;
  double p0 = 0.0, p1 = 0.0;
  double disturbance = 0.0;
  std::array<BranchResult, 2> branches;
  double wall_seconds = 0.0;
  int cavity_cutoff = 0;
  // Final conditional cavity states, kept for phase-space output.
  std::array<CMatrix, 2> cavity_factors;          // exact pure engine
  std::array<CMatrix, 2> cavity_density;          // exact open-system engine
  std::array<GaussianMode, 2> cavity_gaussians;   // moment engine

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    for (const auto& b : branches) out.insert(out.end(), b.warnings.begin(), b.warnings.end());
    return out;
  }
};

namespace detail {

inline TimeDependentHamiltonian exact_hamiltonian(const SystemParams& p, const PulseSchedule& s, Dynamics d) {
  switch (d) {
    case Dynamics::rabi: return build_interaction_hamiltonian(p, s);
    case Dynamics::rwa: return build_rwa_hamiltonian(p, s);
    case Dynamics::dispersive: return build_dispersive_hamiltonian(p, s);
  }
  throw DomainError("unknown dynamics");
}

inline void dispersive_photon_warning(const SystemParams& p, double peak_photons, std::vector<std::string>& w) {
  if (p.detuning() == 0.0 || p.g_max == 0.0) return;
  const double ncrit = critical_photon_number(p.g_max, p.detuning());
  if (peak_photons > 0.1 * ncrit)
    w.push_back("photon number " + std::to_string(peak_photons) + " exceeds n_crit/10 = " +
                std::to_string(0.1 * ncrit) + " under the dispersive model");
}

inline BranchResult exact_pure_branch(const Protocol& pr, const TimeDependentHamiltonian& h, int x,
                                      const IntegratorConfig& cfg, CMatrix& factor) {
  const HilbertDims& d = pr.params.dims;
  const JointState psi0 =
      tensor_state(basis_state(d.qubit_levels, x), squeezed_coherent_state(pr.cavity, d.cavity_cutoff));
  check_truncation(psi0, cfg.truncation_tolerance);
  const auto traj = evolve_schrodinger(psi0, h, 0.0, pr.tau, cfg, effective_max_step(cfg, pr.params));
  BranchResult b;
  b.initial_level = x;
  b.stats = traj.stats;
  b.times = traj.times;
  for (const auto& s : traj.states) {
    const auto cm = cavity_moments(s);
    b.centroid.push_back(cm.a);
    b.photons.push_back(cm.n);
    b.populations.push_back(level_populations(s));
  }
  const JointState& fin = traj.final_state();
  b.final_populations = b.populations.back();
  b.flip_probability = 1.0 - b.final_populations(x);
  if (d.qubit_levels == 2) {
    b.schmidt = schmidt_disturbance(fin, x);
    b.flip_probability = b.schmidt->flip_probability;
  }
  factor = cavity_factor(fin);
  return b;
}

inline BranchResult exact_open_branch(const Protocol& pr, const TimeDependentHamiltonian& h, int x,
                                      const IntegratorConfig& cfg, CMatrix& cavity_rho) {
  const HilbertDims& d = pr.params.dims;
  const JointState psi0 =
      tensor_state(basis_state(d.qubit_levels, x), squeezed_coherent_state(pr.cavity, d.cavity_cutoff));
  check_truncation(psi0, cfg.truncation_tolerance);
  const std::vector<CollapseChannel> channels{{CollapseRole::cavity_annihilation, pr.params.kappa_total()}};
  const auto traj = evolve_lindblad(DensityState::from_pure(psi0), h, channels, 0.0, pr.tau, cfg,
                                    effective_max_step(cfg, pr.params));
  BranchResult b;
  b.initial_level = x;
  b.stats = traj.stats;
  b.times = traj.times;
  for (const auto& s : traj.states) {
    const auto cm = cavity_moments(s);
    b.centroid.push_back(cm.a);
    b.photons.push_back(cm.n);
    b.populations.push_back(level_populations(s));
  }
  b.final_populations = b.populations.back();
  b.flip_probability = 1.0 - b.final_populations(x);
  cavity_rho = partial_trace(traj.final_state(), Subsystem::cavity);
  return b;
}

inline MomentModel moment_model_for(const SystemParams& p, Dynamics d) {
  if (p.qubit_model == QubitModel::transmon) {
    if (d != Dynamics::rabi) throw DomainError("transmon moment engine supports only the full coupling");
    return MomentModel::transmon;
  }
  if (d == Dynamics::dispersive) return MomentModel::dispersive;
  if (d == Dynamics::rwa) throw DomainError("moment engine has no RWA variant");
  return MomentModel::rabi;
}

// Initial moments of |x> (x) D(alpha)S(xi)|0>, computed in closed form.
inline MomentState initial_moments(const CavityStateSpec& c, int x, MomentModel model) {
  const double ch = std::cosh(c.r), sh = std::sinh(c.r);
  const cplx squeeze = -std::polar(ch * sh, c.theta);  // <a^2> - <a>^2
  const cplx a = c.alpha;
  const cplx a2 = a * a + squeeze;
  const double n = std::norm(a) + sh * sh;
  MomentState m;
  m.model = model;
  if (model == MomentModel::transmon) {
    TransmonMoments t;
    t.a = a;
    t.a2 = a2;
    t.na = n;
    t.nb = x;
    m.v = t.pack();
    return m;
  }
  QubitMoments q;
  const double sz = x == 1 ? 1.0 : -1.0;
  q.a = a;
  q.a2 = a2;
  q.n = n;
  q.sz = sz;
  q.a_sz = sz * a;
  m.v = q.pack();
  return m;
}

inline BranchResult moment_branch(const Protocol& pr, MomentModel model, int x, const IntegratorConfig& cfg,
                                  GaussianMode& final_mode) {
  const MomentState m0 = initial_moments(pr.cavity, x, model);
  const double max_step = model == MomentModel::dispersive ? 0.05 : effective_max_step(cfg, pr.params);
  const auto traj = evolve_moments(m0, pr.params, pr.schedule, 0.0, pr.tau, cfg, max_step);
  BranchResult b;
  b.initial_level = x;
  b.stats = traj.stats;
  b.times = traj.times;
  b.warnings = traj.warnings;
  for (const auto& s : traj.states) {
    const auto g = s.cavity_gaussian();
    b.centroid.push_back(g.mean);
    b.photons.push_back(g.n);
    Eigen::VectorXd pops(2);
    const double p1 = model == MomentModel::transmon ? TransmonMoments::unpack(s.v).nb : 0.5 * (1.0 + s.sigma_z());
    pops << 1.0 - p1, p1;
    b.populations.push_back(pops);
  }
  b.final_populations = b.populations.back();
  const double p1 = b.final_populations(1);
  b.flip_probability = std::clamp(x == 1 ? 1.0 - p1 : p1, 0.0, 1.0);
  if (model == MomentModel::transmon) b.flip_probability = std::clamp(std::abs(p1 - x), 0.0, 1.0);
  final_mode = traj.final_state().cavity_gaussian();
  return b;
}

}  // namespace detail

// Runs both initial qubit levels through the protocol and compares the final
// cavity states.
inline ReadoutReport measurement_report(const Protocol& pr, const ReadoutOptions& opt = {}) {
  pr.validate();
  const auto start = std::chrono::steady_clock::now();
  ReadoutReport r;
  r.engine = opt.engine;
  r.dynamics = opt.dynamics;
  r.cavity_cutoff = pr.params.dims.cavity_cutoff;
  if (opt.engine == Engine::exact) {
    const auto h = detail::exact_hamiltonian(pr.params, pr.schedule, opt.dynamics);
    const bool open = opt.open_system && pr.params.kappa_total() > 0.0;
    for (int x = 0; x < 2; ++x) {
      r.branches[x] = open ? detail::exact_open_branch(pr, h, x, opt.integrator, r.cavity_density[x])
                           : detail::exact_pure_branch(pr, h, x, opt.integrator, r.cavity_factors[x]);
    }
    r.indistinguishability = open ? uhlmann_indistinguishability(r.cavity_density[0], r.cavity_density[1])
                                  : uhlmann_from_factors(r.cavity_factors[0], r.cavity_factors[1]);
  } else {
    const MomentModel model = detail::moment_model_for(pr.params, opt.dynamics);
    for (int x = 0; x < 2; ++x)
      r.branches[x] = detail::moment_branch(pr, model, x, opt.integrator, r.cavity_gaussians[x]);
    r.indistinguishability = gaussian_uhlmann(r.cavity_gaussians[0], r.cavity_gaussians[1]);
  }
  if (opt.dynamics == Dynamics::dispersive) {
    for (auto& b : r.branches) {
      const double peak = *std::max_element(b.photons.begin(), b.photons.end());
      detail::dispersive_photon_warning(pr.params, peak, b.warnings);
    }
  }
  r.distinguishability = 1.0 - r.indistinguishability;
  r.p0 = r.branches[0].flip_probability;
  r.p1 = r.branches[1].flip_probability;
  r.disturbance = std::max(r.p0, r.p1);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------------------
// Dispersive analytics

struct DispersiveAnalytics {
  double phi = 0.0;     // rad
  double lambda = 0.0;  // centroid separation
  double n_crit = 0.0;
};

inline double integrated_dispersive_phase(const PulseSchedule& s, double g_max, double delta, double tau) {
  if (delta == 0.0) throw DomainError("dispersive phase requires nonzero detuning");
  auto f = [&](double t) {
    const double g = envelope_value(s, g_max, t);
    return g * g / delta;
  };
  std::vector<double> cuts{0.0};
  if (s.envelope.shape != EnvelopeShape::constant)
    for (double c : {s.envelope.t1, s.envelope.t2})
      if (c > 0.0 && c < tau) cuts.push_back(c);
  cuts.push_back(tau);
  std::sort(cuts.begin(), cuts.end());
  double phi = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    phi += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13);
  return phi;
}

inline DispersiveAnalytics dispersive_analytics(double g_max, double delta, double tau, cplx alpha,
                                                const PulseSchedule& s) {
  if (delta == 0.0) throw DomainError("dispersive analytics requires nonzero detuning");
  DispersiveAnalytics out;
  out.phi = integrated_dispersive_phase(s, g_max, delta, tau);
  out.lambda = 2.0 * std::abs(alpha) * std::abs(std::sin(out.phi));
  out.n_crit = g_max > 0.0 ? critical_photon_number(g_max, delta) : std::numeric_limits<double>::infinity();
  return out;
}

// |<a>_0(t) - <a>_1(t)|, interpolating linearly when the grids differ.
inline cplx interpolate_centroid(const std::vector<double>& ts, const std::vector<cplx>& a, double t) {
  if (ts.empty() || ts.size() != a.size()) throw DomainError("centroid series malformed");
  if (t <= ts.front()) return a.front();
  if (t >= ts.back()) return a.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - ts.begin());
  const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
  return (1.0 - w) * a[i - 1] + w * a[i];
}

inline double centroid_distance(const BranchResult& b0, const BranchResult& b1, double t) {
  return std::abs(interpolate_centroid(b0.times, b0.centroid, t) - interpolate_centroid(b1.times, b1.centroid, t));
}

inline double centroid_distance(const ReadoutReport& r, double t) {
  return centroid_distance(r.branches[0], r.branches[1], t);
}

// ---------------------------------------------------------------------------
// Closure error: moment engine against the exact engine on one protocol.

struct ClosureError {
  double max_centroid_deviation = 0.0;
  double rms_centroid_deviation = 0.0;
  double exact_final_distance = 0.0;
  double moment_final_distance = 0.0;
  double relative_distance_error = 0.0;
  double exact_seconds = 0.0, moment_seconds = 0.0;
};

inline ClosureError closure_error_report(const Protocol& pr, const ReadoutOptions& base = {}) {
  ReadoutOptions ex = base, mo = base;
  ex.engine = Engine::exact;
  mo.engine = Engine::moments;
  const auto re = measurement_report(pr, ex);
  const auto rm = measurement_report(pr, mo);
  ClosureError out;
  double sq = 0.0;
  std::size_t count = 0;
  for (int x = 0; x < 2; ++x) {
    const auto& be = re.branches[x];
    for (std::size_t i = 0; i < be.times.size(); ++i) {
      const double dev = std::abs(be.centroid[i] - interpolate_centroid(rm.branches[x].times, rm.branches[x].centroid,
                                                                        be.times[i]));
      out.max_centroid_deviation = std::max(out.max_centroid_deviation, dev);
      sq += dev * dev;
      ++count;
    }
  }
  out.rms_centroid_deviation = std::sqrt(sq / static_cast<double>(std::max<std::size_t>(count, 1)));
  out.exact_final_distance = centroid_distance(re, pr.tau);
  out.moment_final_distance = centroid_distance(rm, pr.tau);
  out.relative_distance_error = out.exact_final_distance > 0.0
                                    ? std::abs(out.moment_final_distance - out.exact_final_distance) /
                                          out.exact_final_distance
                                    : std::abs(out.moment_final_distance);
  out.exact_seconds = re.wall_seconds;
  out.moment_seconds = rm.wall_seconds;
  return out;
}

// ---------------------------------------------------------------------------
// Husimi Q function Q(beta) = <beta| rho |beta> / pi of a cavity state given
// as a factor V (rho = V V^dag), on a square grid of quadrature values
// x = Re beta, y = Im beta.

struct HusimiGrid {
  std::vector<double> x, y;
  Eigen::MatrixXd q;  // q(iy, ix)
};

inline HusimiGrid husimi_q(const CMatrix& factor, double x_min, double x_max, double y_min, double y_max, int nx,
                           int ny) {
  if (nx < 2 || ny < 2) throw DomainError("husimi grid needs at least 2 points per axis");
  HusimiGrid g;
  g.q.resize(ny, nx);
  for (int i = 0; i < nx; ++i) g.x.push_back(x_min + (x_max - x_min) * i / (nx - 1));
  for (int j = 0; j < ny; ++j) g.y.push_back(y_min + (y_max - y_min) * j / (ny - 1));
  const int n = static_cast<int>(factor.rows());
  CVector bra(n);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const cplx beta(g.x[i], g.y[j]);
      // <beta|n> = e^{-|beta|^2/2} conj(beta)^n / sqrt(n!)
      bra(0) = std::exp(-0.5 * std::norm(beta));
      for (int k = 1; k < n; ++k) bra(k) = bra(k - 1) * std::conj(beta) / std::sqrt(double(k));
      const Eigen::RowVectorXcd proj = bra.transpose() * factor;
      g.q(j, i) = proj.squaredNorm() / M_PI;
    }
  }
  return g;
}

inline HusimiGrid husimi_q_density(const CMatrix& rho, double x_min, double x_max, double y_min, double y_max,
                                   int nx, int ny) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()));
  const Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return husimi_q(es.eigenvectors() * w.asDiagonal(), x_min, x_max, y_min, y_max, nx, ny);
}

}  // namespace qnd
