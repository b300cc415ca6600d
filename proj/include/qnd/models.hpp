#pragma once

// Hamiltonian builders for the transverse qubit-cavity interaction.
//
// A time-dependent Hamiltonian is held as a list of constant sparse
// operators, each multiplied by a scalar source (coupling envelope, drive,
// ...) and a phase e^{i w t}. Hermiticity is carried by listing each
// off-diagonal term together with its adjoint.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qnd/errors.hpp"
#include "qnd/hilbert.hpp"
#include "qnd/units.hpp"

namespace qnd {

enum class QubitModel { ideal, transmon };

inline std::string to_string(QubitModel m) { return m == QubitModel::ideal ? "ideal" : "transmon"; }

struct SystemParams {
  double omega_c = units::from_ghz(8.0);  // cavity angular frequency
  double omega_q = units::from_ghz(7.0);  // qubit |0>-|1> angular frequency
  double anharmonicity = units::from_mhz(200.0);  // transmon epsilon = w_q0 - w_q1
  double g_max = units::from_mhz(100.0);
  double kappa_int = 0.0;
  double kappa_ext = 0.0;
  QubitModel qubit_model = QubitModel::ideal;
  HilbertDims dims{2, 64};

  double detuning() const { return omega_q - omega_c; }
  double kappa_total() const { return kappa_int + kappa_ext; }

  void validate() const {
    dims.validate();
    if (omega_c < 0 || omega_q < 0 || anharmonicity < 0 || g_max < 0 || kappa_int < 0 || kappa_ext < 0)
      throw DomainError("system rates must be non-negative");
    if (qubit_model == QubitModel::ideal && dims.qubit_levels != 2)
      throw DomainError("ideal qubit requires qubit_levels == 2");
  }
};

enum class EnvelopeShape { erfc, square, constant };

inline std::string to_string(EnvelopeShape s) {
  switch (s) {
    case EnvelopeShape::erfc: return "erfc";
    case EnvelopeShape::square: return "square";
    case EnvelopeShape::constant: return "constant";
  }
  return "?";
}

struct Envelope {
  EnvelopeShape shape = EnvelopeShape::erfc;
  double v1 = 1.0;  // ns^-1
  double t1 = 1.0;  // ns
  double t2 = 5.0;  // ns
};

// Resonant cavity drive e^{-(t-center)^2 / 2 sigma^2} with peak amplitude
// `amplitude` (rad/ns).
struct GaussianDrive {
  double amplitude = 0.0;
  double sigma = 1.0;
  double center = 0.0;
};

// Constant resonant drive on [t_start, t_end]; `phase` sets the direction it
// pushes the cavity field: d<a>/dt gains -i * amplitude * e^{i phase}.
struct SustainDrive {
  double amplitude = 0.0;
  double phase = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct PulseSchedule {
  Envelope envelope;
  std::optional<GaussianDrive> drive;
  std::optional<SustainDrive> sustain;

  void validate() const {
    if (envelope.shape != EnvelopeShape::constant) {
      if (!(envelope.t1 >= 0.0)) throw DomainError("envelope t1 must be >= 0");
      if (!(envelope.t2 > envelope.t1)) throw DomainError("envelope t2 must exceed t1");
    }
    if (envelope.shape == EnvelopeShape::erfc && !(envelope.v1 > 0.0))
      throw DomainError("envelope v1 must be > 0");
    if (drive && !(drive->sigma > 0.0)) throw DomainError("drive sigma must be > 0");
    if (sustain && sustain->t_end < sustain->t_start) throw DomainError("sustain window reversed");
  }
};

// g(t) = (g_max / 4) erfc(-v1 (t - t1)) erfc(v1 (t - t2)) for the erfc shape.
inline double envelope_value(const PulseSchedule& schedule, double g_max, double t) {
  const Envelope& e = schedule.envelope;
  switch (e.shape) {
    case EnvelopeShape::erfc:
      return 0.25 * g_max * std::erfc(-e.v1 * (t - e.t1)) * std::erfc(e.v1 * (t - e.t2));
    case EnvelopeShape::square:
      return (t >= e.t1 && t <= e.t2) ? g_max : 0.0;
    case EnvelopeShape::constant:
      return g_max;
  }
  return 0.0;
}

// Complex cavity-drive coefficient c(t) in the frame rotating at omega_c:
// H_drive = c(t) a^dag + conj(c(t)) a.
inline cplx drive_value(const PulseSchedule& schedule, double t) {
  cplx c = 0.0;
  if (schedule.drive) {
    const auto& d = *schedule.drive;
    const double z = (t - d.center) / d.sigma;
    c += d.amplitude * std::exp(-0.5 * z * z);
  }
  if (schedule.sustain) {
    const auto& s = *schedule.sustain;
    if (t >= s.t_start && t <= s.t_end) c += std::polar(s.amplitude, s.phase);
  }
  return c;
}

// Bare qubit energies: +-w_q/2 for the ideal qubit, inverted Duffing ladder
// w_q n - (eps/2) n (n - 1) for the transmon.
inline std::vector<double> qubit_energies(const SystemParams& p) {
  const int levels = p.dims.qubit_levels;
  std::vector<double> e(static_cast<std::size_t>(levels));
  if (p.qubit_model == QubitModel::ideal) {
    if (levels != 2) throw DomainError("ideal qubit requires qubit_levels == 2");
    e[0] = -0.5 * p.omega_q;
    e[1] = 0.5 * p.omega_q;
  } else {
    for (int n = 0; n < levels; ++n) e[n] = p.omega_q * n - 0.5 * p.anharmonicity * n * (n - 1.0);
  }
  return e;
}

// Photon number above which the dispersive expansion fails.
inline double critical_photon_number(double g, double delta) { return delta * delta / (4.0 * g * g); }

enum class Source { one, coupling, dispersive_shift, drive, drive_conj };

struct HamiltonianTerm {
  SparseMatrix op;
  double frequency = 0.0;
  Source source = Source::one;
};

class TimeDependentHamiltonian {
 public:
  TimeDependentHamiltonian(HilbertDims dims, PulseSchedule schedule, double g_max, double detuning = 0.0)
      : dims_(dims), schedule_(std::move(schedule)), g_max_(g_max), detuning_(detuning) {}

  void add(SparseMatrix op, double frequency, Source source) {
    op.makeCompressed();
    terms_.push_back({std::move(op), frequency, source});
  }

  const HilbertDims& dims() const { return dims_; }
  const std::vector<HamiltonianTerm>& terms() const { return terms_; }
  const PulseSchedule& schedule() const { return schedule_; }
  double g_max() const { return g_max_; }

  double coupling(double t) const { return envelope_value(schedule_, g_max_, t); }

  std::vector<cplx> coefficients(double t) const {
    const double g = coupling(t);
    const cplx c = drive_value(schedule_, t);
    std::array<cplx, 5> src{cplx(1.0), cplx(g), cplx(0.0), c, std::conj(c)};
    if (detuning_ != 0.0) src[2] = g * g / detuning_;
    std::vector<cplx> out;
    out.reserve(terms_.size());
    for (const auto& term : terms_) {
      cplx k = src[static_cast<std::size_t>(term.source)];
      if (term.frequency != 0.0) k *= std::polar(1.0, term.frequency * t);
      out.push_back(k);
    }
    return out;
  }

  SparseMatrix at(double t) const {
    SparseMatrix h(dims_.joint(), dims_.joint());
    const auto k = coefficients(t);
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (k[i] != cplx(0.0)) h += k[i] * terms_[i].op;
    h.makeCompressed();
    return h;
  }

  // out = H(t) x for a state vector.
  void apply(double t, const CVector& x, CVector& out) const {
    out.setZero(x.size());
    const auto k = coefficients(t);
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (k[i] == cplx(0.0)) continue;
      const SparseMatrix& op = terms_[i].op;
      const cplx* val = op.valuePtr();
      const int* inner = op.innerIndexPtr();
      const int* outer = op.outerIndexPtr();
      for (int r = 0; r < op.outerSize(); ++r) {
        cplx acc = 0.0;
        for (int j = outer[r]; j < outer[r + 1]; ++j) acc += val[j] * x(inner[j]);
        out(r) += k[i] * acc;
      }
    }
  }

  // out = H(t) X for a dense matrix (density-matrix evolution).
  void apply(double t, const CMatrix& x, CMatrix& out) const {
    out.setZero(x.rows(), x.cols());
    const auto k = coefficients(t);
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (k[i] != cplx(0.0)) out.noalias() += k[i] * (terms_[i].op * x);
  }

 private:
  HilbertDims dims_;
  PulseSchedule schedule_;
  double g_max_;
  double detuning_;
  std::vector<HamiltonianTerm> terms_;
};

namespace detail {

inline SparseMatrix qubit_raising(int levels, int n) {
  SparseMatrix p(levels, levels);
  p.insert(n + 1, n) = std::sqrt(static_cast<double>(n + 1));
  p.makeCompressed();
  return p;
}

inline SparseMatrix diagonal(const std::vector<double>& d) {
  SparseMatrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m.insert(int(i), int(i)) = d[i];
  m.makeCompressed();
  return m;
}

inline void add_cavity_drive(TimeDependentHamiltonian& h, const HilbertDims& dims, double carrier) {
  const SparseMatrix a = ladder(dims.cavity_cutoff);
  const SparseMatrix ad = SparseMatrix(a.adjoint());
  h.add(embed(ad, dims, Subsystem::cavity), -carrier, Source::drive);
  h.add(embed(a, dims, Subsystem::cavity), carrier, Source::drive_conj);
}

}  // namespace detail

// Lab frame: w_c a^dag a + H_q + g(t) B (a + a^dag) + resonant drive at w_c.
inline TimeDependentHamiltonian build_lab_hamiltonian(const SystemParams& p, const PulseSchedule& s) {
  p.validate();
  const HilbertDims& d = p.dims;
  TimeDependentHamiltonian h(d, s, p.g_max);
  const SparseMatrix a = ladder(d.cavity_cutoff);
  const SparseMatrix b = ladder(d.qubit_levels);
  const SparseMatrix bare = SparseMatrix(kron(identity(d.qubit_levels), number_op(d.cavity_cutoff)) * p.omega_c) +
                            kron(detail::diagonal(qubit_energies(p)), identity(d.cavity_cutoff));
  h.add(bare, 0.0, Source::one);
  const SparseMatrix bx = b + SparseMatrix(b.adjoint());
  const SparseMatrix ax = a + SparseMatrix(a.adjoint());
  h.add(kron(bx, ax), 0.0, Source::coupling);
  detail::add_cavity_drive(h, d, p.omega_c);
  return h;
}

// Interaction picture with respect to w_c a^dag a + H_q, counter-rotating
// terms retained. Each qubit ladder element |n+1><n| carries its own
// transition frequency, so the same builder covers the ideal qubit and the
// transmon.
inline TimeDependentHamiltonian build_interaction_hamiltonian(const SystemParams& p, const PulseSchedule& s,
                                                              bool rotating_wave = false) {
  p.validate();
  const HilbertDims& d = p.dims;
  TimeDependentHamiltonian h(d, s, p.g_max);
  const SparseMatrix a = ladder(d.cavity_cutoff);
  const SparseMatrix ad = SparseMatrix(a.adjoint());
  const auto e = qubit_energies(p);
  for (int n = 0; n + 1 < d.qubit_levels; ++n) {
    const double wn = e[n + 1] - e[n];
    const SparseMatrix up = detail::qubit_raising(d.qubit_levels, n);
    const SparseMatrix down = SparseMatrix(up.adjoint());
    h.add(kron(up, a), wn - p.omega_c, Source::coupling);
    h.add(kron(down, ad), -(wn - p.omega_c), Source::coupling);
    if (!rotating_wave) {
      h.add(kron(up, ad), wn + p.omega_c, Source::coupling);
      h.add(kron(down, a), -(wn + p.omega_c), Source::coupling);
    }
  }
  detail::add_cavity_drive(h, d, 0.0);
  return h;
}

inline TimeDependentHamiltonian build_rwa_hamiltonian(const SystemParams& p, const PulseSchedule& s) {
  return build_interaction_hamiltonian(p, s, true);
}

// (g(t)^2 / Delta) sigma_z a^dag a, ideal qubit only.
inline TimeDependentHamiltonian build_dispersive_hamiltonian(const SystemParams& p, const PulseSchedule& s) {
  p.validate();
  if (p.qubit_model != QubitModel::ideal) throw DomainError("dispersive model requires the ideal qubit");
  if (p.detuning() == 0.0) throw DomainError("dispersive model requires nonzero detuning");
  const HilbertDims& d = p.dims;
  TimeDependentHamiltonian h(d, s, p.g_max, p.detuning());
  h.add(kron(detail::diagonal({-1.0, 1.0}), number_op(d.cavity_cutoff)), 0.0, Source::dispersive_shift);
  detail::add_cavity_drive(h, d, 0.0);
  return h;
}

inline SparseMatrix hamiltonian_lab(const SystemParams& p, const PulseSchedule& s, double t) {
  return build_lab_hamiltonian(p, s).at(t);
}
inline SparseMatrix hamiltonian_rabi_interaction(const SystemParams& p, const PulseSchedule& s, double t) {
  return build_interaction_hamiltonian(p, s).at(t);
}
inline SparseMatrix hamiltonian_rwa(const SystemParams& p, const PulseSchedule& s, double t) {
  return build_rwa_hamiltonian(p, s).at(t);
}
inline SparseMatrix hamiltonian_dispersive(const SystemParams& p, const PulseSchedule& s, double t) {
  return build_dispersive_hamiltonian(p, s).at(t);
}

// Diagonal of exp(-i H0 t), H0 = w_c a^dag a + H_q: maps interaction-picture
// states to the lab frame.
inline CVector frame_phases(const SystemParams& p, double t) {
  const auto e = qubit_energies(p);
  const HilbertDims& d = p.dims;
  CVector ph(d.joint());
  for (int q = 0; q < d.qubit_levels; ++q)
    for (int n = 0; n < d.cavity_cutoff; ++n) ph(d.index(q, n)) = std::polar(1.0, -(e[q] + p.omega_c * n) * t);
  return ph;
}

}  // namespace qnd
