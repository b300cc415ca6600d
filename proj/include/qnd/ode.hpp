#pragma once

// Explicit Runge-Kutta steppers over Eigen vector/matrix states.
//
// `Rhs` is callable as rhs(t, y, dydt) and must fully overwrite dydt.

#include <algorithm>
#include <cmath>
#include <string>

#include "qnd/errors.hpp"

namespace qnd::ode {

struct Options {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = 1e-2;
  long max_steps = 50'000'000;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

template <class State>
double scaled_error(const State& err, const State& y0, const State& y1, double atol, double rtol) {
  const auto sc = atol + rtol * y0.array().abs().max(y1.array().abs());
  return std::sqrt((err.array().abs() / sc).square().mean());
}

// Adaptive Dormand-Prince 5(4). Advances (t, y) to exactly t_end. `h` is the
// step-size hint carried between calls.
template <class State, class Rhs>
class DormandPrince {
 public:
  explicit DormandPrince(Options opt) : opt_(opt) {}

  void advance(Rhs& rhs, double& t, State& y, double t_end, double& h) {
    if (t_end <= t) return;
    if (!fsal_valid_) {
      k1_ = y;
      rhs(t, y, k1_);
      ++stats_.rhs_evals;
      fsal_valid_ = true;
    }
    if (!(h > 0.0)) h = std::min(opt_.max_step, 1e-3 * (t_end - t));
    while (t < t_end) {
      if (stats_.accepted + stats_.rejected > opt_.max_steps)
        throw IntegrationError("step budget exhausted at t=" + std::to_string(t));
      h = std::min(h, opt_.max_step);
      bool last = false;
      double step = h;
      // Snap to t_end rather than leave a sliver below rounding level.
      if (t + step >= t_end - 1e-12 * std::max(1.0, std::abs(t_end))) {
        step = t_end - t;
        last = true;
      }
      if (step < 1e-15 * std::max(1.0, std::abs(t)))
        throw IntegrationError("step size underflow at t=" + std::to_string(t));

      tmp_ = y + step * (a21 * k1_);
      rhs(t + c2 * step, tmp_, k2_);
      tmp_ = y + step * (a31 * k1_ + a32 * k2_);
      rhs(t + c3 * step, tmp_, k3_);
      tmp_ = y + step * (a41 * k1_ + a42 * k2_ + a43 * k3_);
      rhs(t + c4 * step, tmp_, k4_);
      tmp_ = y + step * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
      rhs(t + c5 * step, tmp_, k5_);
      tmp_ = y + step * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
      rhs(t + step, tmp_, k6_);
      ynew_ = y + step * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
      rhs(t + step, ynew_, k7_);
      stats_.rhs_evals += 6;
      err_ = step * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
      const double en = scaled_error(err_, y, ynew_, opt_.abs_tol, opt_.rel_tol);

      if (en <= 1.0) {
        t = last ? t_end : t + step;
        y.swap(ynew_);
        k1_.swap(k7_);
        ++stats_.accepted;
        const double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
        const double grown = step * std::clamp(fac, 0.2, 5.0);
        // A truncated final step says nothing about the natural step size.
        h = last ? std::max(h, grown) : grown;
      } else {
        ++stats_.rejected;
        h = step * std::max(0.2, 0.9 * std::pow(en, -0.2));
      }
    }
  }

  // Call after the RHS changes discontinuously or the state is edited.
  void reset() { fsal_valid_ = false; }
  const Stats& stats() const { return stats_; }

 private:
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  Options opt_;
  Stats stats_;
  bool fsal_valid_ = false;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, err_;
};

// Classical RK4 with uniform steps no larger than max_step.
template <class State, class Rhs>
class FixedRk4 {
 public:
  explicit FixedRk4(Options opt) : opt_(opt) {}

  void advance(Rhs& rhs, double& t, State& y, double t_end, double& /*h*/) {
    if (t_end <= t) return;
    const long n = std::max(1L, static_cast<long>(std::ceil((t_end - t) / opt_.max_step - 1e-12)));
    const double h = (t_end - t) / static_cast<double>(n);
    const double t0 = t;
    for (long i = 0; i < n; ++i) {
      const double ti = t0 + i * h;
      rhs(ti, y, k1_);
      tmp_ = y + (0.5 * h) * k1_;
      rhs(ti + 0.5 * h, tmp_, k2_);
      tmp_ = y + (0.5 * h) * k2_;
      rhs(ti + 0.5 * h, tmp_, k3_);
      tmp_ = y + h * k3_;
      rhs(ti + h, tmp_, k4_);
      y += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
      stats_.rhs_evals += 4;
      ++stats_.accepted;
    }
    t = t_end;
  }

  void reset() {}
  const Stats& stats() const { return stats_; }

 private:
  Options opt_;
  Stats stats_;
  State k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace qnd::ode
