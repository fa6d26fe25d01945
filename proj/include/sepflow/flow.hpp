#pragma once

// Closed-form integration of one control leg, an RK4 cross-check, and
// whole-schedule simulation with classification certificates.
//
// Along a leg x(t) = x0 + phi(t) w, so s = a.x + b obeys s' = c g(s) with
// c = a.w. g is piecewise linear, hence s is affine or exponential between
// breakpoints and every breakpoint crossing has a closed-form time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "sepflow/geometry.hpp"
#include "sepflow/precision.hpp"
#include "sepflow/schedule.hpp"

namespace sepflow {

inline constexpr double kDwellGuard = 1e-14;

// One closed-form piece: on [t0, t1], g(s) = alpha s + beta.
template <class S>
struct FlowPiece {
  S t0, t1, s_start, phi_start, alpha, beta;
};

namespace detail {

inline const std::vector<double>& breakpoints(Activation a) {
  static const std::vector<double> relu{0.0}, trun{0.0, 1.0}, fem{-1.0, 0.0, 1.0};
  return a == Activation::relu ? relu : (a == Activation::truncated ? trun : fem);
}

// Linear coefficients of g on the piece entered when leaving s in direction
// dir (+1 or -1).
template <class S>
void piece_coeffs(Activation act, const S& s, int dir, int& alpha, int& beta) {
  auto side = [&](double bp) { return s > bp || (s == bp && dir > 0); };
  switch (act) {
    case Activation::relu:
      if (side(0.0)) alpha = 1, beta = 0; else alpha = 0, beta = 0;
      return;
    case Activation::truncated:
      if (side(1.0)) alpha = 0, beta = 1;
      else if (side(0.0)) alpha = 1, beta = 0;
      else alpha = 0, beta = 0;
      return;
    default:
      if (side(1.0)) alpha = 0, beta = 0;
      else if (side(0.0)) alpha = -1, beta = 1;
      else if (side(-1.0)) alpha = 1, beta = 1;
      else alpha = 0, beta = 0;
  }
}

// expm1(x)/x, continuous at 0.
template <class S>
S expm1_ratio(const S& x) {
  using std::abs;
  using std::expm1;
  if (abs(x) < S(1e-300)) return S(1);
  if constexpr (!std::is_floating_point_v<S>) {
    // c tau is usually of order 1e-13 here; the series is far cheaper than
    // an MPFR expm1 and stops once a term no longer changes the sum.
    if (abs(x) < S(1e-3)) {
      S sum = 1, term = 1;
      for (int k = 2; k < 400; ++k) {
        term *= x;
        term /= k;
        const S next = sum + term;
        if (next == sum) break;
        sum = next;
      }
      return sum;
    }
  }
  return S(expm1(x) / x);
}

}  // namespace detail

// Solves s' = c g(s), s(0) = s0 on [0, tau]; returns phi(tau) = integral of
// g(s(u)). Pieces are appended when requested.
template <class S>
S solve_scalar_leg(const S& s0, const S& c, const S& tau, Activation act, std::vector<FlowPiece<S>>* pieces = nullptr) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::log1p;
  S t = 0, s = s0, phi = 0;
  if (c == 0) {
    const S g = eval_activation(act, s0);
    if (pieces) pieces->push_back({S(0), tau, s0, S(0), S(0), g});
    return S(tau * g);
  }
  const int dir = c > 0 ? 1 : -1;
  const auto& bps = detail::breakpoints(act);
  for (int guard = 0; guard < 8; ++guard) {
    const S remaining = tau - t;
    const S g = eval_activation(act, s);
    if (g == 0 || !(remaining > 0)) {
      if (pieces && remaining > 0) pieces->push_back({t, tau, s, phi, S(0), S(0)});
      return phi;
    }
    int ai = 0, bi = 0;
    detail::piece_coeffs(act, s, dir, ai, bi);
    const S alpha = ai, beta = bi;
    std::optional<double> next;
    if (dir > 0) {
      for (double bp : bps)
        if (s < bp) { next = bp; break; }
    } else {
      for (auto it = bps.rbegin(); it != bps.rend(); ++it)
        if (s > *it) { next = *it; break; }
    }
    std::optional<S> hit;
    if (next) {
      const S B = *next;
      if (ai == 0) {
        hit = S((B - s) / (c * beta));
      } else {
        const S star = -beta / alpha;
        const S ratio = (B - s) / (s - star);  // e^{c alpha t} - 1 at the hit
        if (ratio > -1) {
          const S th = S(log1p(ratio) / (c * alpha));
          if (th > 0) hit = th;
        }
      }
    }
    const bool crosses = hit && !(*hit > remaining);
    const S dt = crosses ? S(*hit < S(kDwellGuard) ? S(0) : *hit) : remaining;
    const S dphi = ai == 0 ? S(beta * dt) : S(g * dt * detail::expm1_ratio(S(c * alpha * dt)));
    if (pieces) pieces->push_back({t, S(t + dt), s, phi, alpha, beta});
    phi += dphi;
    t += dt;
    if (!crosses) return phi;
    s = S(*next);
  }
  return phi;
}

// Closed-form displacement profile of one leg started at x0.
struct LegFlowSolution {
  Point x0;
  Eigen::VectorXd w;
  double s0 = 0.0, c = 0.0, tau = 0.0;
  Activation activation = Activation::relu;
  std::vector<FlowPiece<double>> pieces;
  double phi_end = 0.0;

  double phi(double t) const {
    using std::expm1;
    if (t <= 0) return 0.0;
    t = std::min(t, tau);
    for (const auto& p : pieces) {
      if (t > p.t1 && &p != &pieces.back()) continue;
      const double dt = std::min(t, p.t1) - p.t0;
      if (p.alpha == 0) return p.phi_start + p.beta * dt;
      const double g = p.alpha * p.s_start + p.beta;
      return p.phi_start + g * dt * detail::expm1_ratio(c * p.alpha * dt);
    }
    return phi_end;
  }
  Point position(double t) const { return x0 + phi(t) * w; }
};

inline LegFlowSolution solve_leg(const Point& x0, const ControlLeg& leg) {
  LegFlowSolution sol;
  sol.x0 = x0;
  sol.w = leg.w;
  sol.s0 = leg.a.dot(x0) + leg.b;
  sol.c = leg.a.dot(leg.w);
  sol.tau = leg.tau;
  sol.activation = leg.activation;
  sol.phi_end = solve_scalar_leg<double>(sol.s0, sol.c, leg.tau, leg.activation, &sol.pieces);
  return sol;
}

inline Point flow_leg_exact(const Point& x0, const ControlLeg& leg) {
  const double s0 = leg.a.dot(x0) + leg.b;
  return x0 + solve_scalar_leg<double>(s0, leg.a.dot(leg.w), leg.tau, leg.activation) * leg.w;
}

// Same closed form on a coordinate vector of any scalar type; zero entries
// of a and w are skipped.
template <class S>
void flow_leg_exact_inplace(std::vector<S>& x, const ControlLeg& leg) {
  const auto d = static_cast<Eigen::Index>(x.size());
  S s0 = leg.b, c = 0;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (leg.a[k] == 0) continue;
    s0 += leg.a[k] * x[static_cast<std::size_t>(k)];
    if (leg.w[k] != 0) c += S(leg.a[k]) * leg.w[k];
  }
  const S phi = solve_scalar_leg<S>(s0, c, S(leg.tau), leg.activation);
  if (phi == 0) return;
  for (Eigen::Index k = 0; k < d; ++k)
    if (leg.w[k] != 0) x[static_cast<std::size_t>(k)] += phi * leg.w[k];
}

// Classical fixed-step RK4 on x' = w g(a.x + b).
inline constexpr double kMaxRk4Steps = 1e9;

inline Point flow_leg_rk4(const Point& x0, const ControlLeg& leg, double step) {
  if (!(step > 0)) throw ValidationError("step must be positive");
  if (leg.tau / step > kMaxRk4Steps) throw ValidationError("leg too long for fixed-step integration");
  const auto n = static_cast<std::size_t>(std::ceil(leg.tau / step));
  if (n == 0) return x0;
  const double h = leg.tau / static_cast<double>(n);
  auto f = [&](const Point& x) -> Point { return eval_activation(leg.activation, leg.a.dot(x) + leg.b) * leg.w; };
  Point x = x0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point k1 = f(x);
    const Point k2 = f(x + 0.5 * h * k1);
    const Point k3 = f(x + 0.5 * h * k2);
    const Point k4 = f(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

enum class FlowMode { exact, rk4 };

inline std::vector<Point> simulate(const std::vector<Point>& points, const ControlSchedule& schedule,
                                   FlowMode mode = FlowMode::exact, double step = 1e-4) {
  std::vector<Point> out = points;
  for (const auto& leg : schedule.legs)
    for (auto& x : out) {
      if (x.size() != leg.a.size()) throw ValidationError("point and control dimensions differ");
      x = mode == FlowMode::exact ? flow_leg_exact(x, leg) : flow_leg_rk4(x, leg, step);
    }
  return out;
}

struct SimulationResult {
  std::vector<Point> finals;  // reds first, then blues
  bool red_in_TR = false;
  bool blue_in_TB = false;
  double max_blue_net_displacement = 0.0;
  double max_red_net_displacement = 0.0;
  std::size_t target_axis = 0;
  bool targets_swapped = false;
  unsigned precision_bits = 53;          // mantissa bits of the arithmetic used
  double min_margin_to_threshold = 0.0;  // min over points of |x_t - 1|
  std::optional<std::vector<std::vector<Point>>> per_leg_snapshots;

  bool classified() const { return red_in_TR && blue_in_TB; }
};

struct CertifyOptions {
  FlowMode mode = FlowMode::exact;
  double step = 1e-4;
  bool record_legs = false;
  // Largest coordinate disagreement between the double and extended runs
  // for which the extended result is accepted.
  long double agreement_tolerance = 1e-11L;
};

namespace detail {

template <class S>
struct Run {
  std::vector<std::vector<S>> x;
  double log2_max = 0.0;
};

template <class S>
Run<S> simulate_scalar(const std::vector<Point>& pts, const ControlSchedule& sch,
                       std::vector<std::vector<Point>>* snaps) {
  using std::abs;
  Run<S> r;
  r.x.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (Eigen::Index k = 0; k < pts[i].size(); ++k) r.x[i].push_back(S(pts[i][k]));
  for (const auto& leg : sch.legs) {
    for (auto& x : r.x) {
      flow_leg_exact_inplace(x, leg);
      for (const auto& v : x) {
        const double m = static_cast<double>(abs(v));
        if (m > 1) r.log2_max = std::max(r.log2_max, std::log2(m));
      }
    }
    if (snaps) {
      std::vector<Point> snap;
      for (const auto& x : r.x) {
        Point p(static_cast<Eigen::Index>(x.size()));
        for (std::size_t k = 0; k < x.size(); ++k) p[static_cast<Eigen::Index>(k)] = static_cast<double>(x[k]);
        snap.push_back(std::move(p));
      }
      snaps->push_back(std::move(snap));
    }
  }
  return r;
}

}  // namespace detail

// Flows every point of the pair through the schedule and checks the target
// strips {x_t > 1} (red) and {x_t <= 1} (blue), exchanged when the schedule
// records swapped targets. Exact mode escalates to variable precision when
// the double rounding estimate exceeds the budget.
inline SimulationResult certify(const LabeledPair& pair, const ControlSchedule& schedule, const CertifyOptions& opt = {}) {
  schedule.validate(pair.dim());
  if (schedule.target_axis >= pair.dim()) throw ValidationError("target axis out of range");
  std::vector<Point> pts = pair.reds();
  pts.insert(pts.end(), pair.blues().begin(), pair.blues().end());
  const std::size_t nr = pair.reds().size();
  const auto t = static_cast<Eigen::Index>(schedule.target_axis);

  SimulationResult res;
  res.target_axis = schedule.target_axis;
  res.targets_swapped = schedule.targets_swapped;
  std::vector<bool> above(pts.size());
  std::vector<double> gap(pts.size());
  std::vector<std::vector<Point>> snaps;
  auto* snap_ptr = opt.record_legs ? &snaps : nullptr;

  if (opt.mode == FlowMode::rk4) {
    res.finals = pts;
    for (const auto& leg : schedule.legs) {
      for (auto& x : res.finals) x = flow_leg_rk4(x, leg, opt.step);
      if (snap_ptr) snaps.push_back(res.finals);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      above[i] = res.finals[i][t] > 1.0;
      gap[i] = std::abs(res.finals[i][t] - 1.0);
    }
  } else {
    // Double and extended runs must agree; otherwise rerun in variable
    // precision sized to the largest magnitude seen.
    auto run = detail::simulate_scalar<double>(pts, schedule, nullptr);
    std::vector<std::vector<Point>> ext_snaps;
    auto ext = detail::simulate_scalar<long double>(pts, schedule, snap_ptr ? &ext_snaps : nullptr);
    long double diff = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t k = 0; k < run.x[i].size(); ++k)
        diff = std::max(diff, std::abs(static_cast<long double>(run.x[i][k]) - ext.x[i][k]));
    res.finals.resize(pts.size());
    if (diff <= opt.agreement_tolerance) {
      res.precision_bits = std::numeric_limits<long double>::digits;
      if (snap_ptr) snaps = std::move(ext_snaps);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        Point p(static_cast<Eigen::Index>(ext.x[i].size()));
        for (std::size_t k = 0; k < ext.x[i].size(); ++k) p[static_cast<Eigen::Index>(k)] = static_cast<double>(ext.x[i][k]);
        res.finals[i] = p;
        const long double xt = ext.x[i][static_cast<std::size_t>(t)];
        above[i] = xt > 1;
        gap[i] = static_cast<double>(std::abs(xt - 1));
      }
    } else {
      // The diverged runs may have blown up far beyond the true magnitudes,
      // so size from the variable-precision run itself.
      unsigned bits = bits_for(0.0);
      for (;;) {
        PrecisionScope scope(bits);
        if (snap_ptr) snaps.clear();
        auto hp = detail::simulate_scalar<HighFloat>(pts, schedule, snap_ptr);
        if (hp.log2_max + 96 > bits) {
          bits = bits_for(hp.log2_max);
          continue;
        }
        res.precision_bits = bits;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          Point p(static_cast<Eigen::Index>(hp.x[i].size()));
          for (std::size_t k = 0; k < hp.x[i].size(); ++k) p[static_cast<Eigen::Index>(k)] = static_cast<double>(hp.x[i][k]);
          res.finals[i] = p;
          const HighFloat& xt = hp.x[i][static_cast<std::size_t>(t)];
          above[i] = xt > 1;
          gap[i] = static_cast<double>(HighFloat(abs(xt - 1)));
        }
        break;
      }
    }
  }
  if (snap_ptr) res.per_leg_snapshots = std::move(snaps);

  res.red_in_TR = res.blue_in_TB = true;
  res.min_margin_to_threshold = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const bool red = i < nr;
    const bool wants_above = red != schedule.targets_swapped;
    const bool ok = above[i] == wants_above;
    (red ? res.red_in_TR : res.blue_in_TB) &= ok;
    res.min_margin_to_threshold = std::min(res.min_margin_to_threshold, gap[i]);
    const double disp = (res.finals[i] - pts[i]).norm();
    double& slot = red ? res.max_red_net_displacement : res.max_blue_net_displacement;
    slot = std::max(slot, disp);
  }
  return res;
}

// CSV rows point_id,leg,t,x1..xd sampled at `samples_per_leg` + 1 instants
// per leg (t is global time). Uses double-precision closed forms.
inline void write_trajectories(std::ostream& os, const std::vector<Point>& points, const ControlSchedule& schedule,
                               std::size_t samples_per_leg = 20) {
  if (points.empty()) return;
  const auto d = points.front().size();
  os << "point_id,leg,t";
  for (Eigen::Index k = 1; k <= d; ++k) os << ",x" << k;
  os << "\n";
  os.precision(17);
  for (std::size_t id = 0; id < points.size(); ++id) {
    Point x = points[id];
    double t0 = 0.0;
    for (std::size_t l = 0; l < schedule.legs.size(); ++l) {
      const auto sol = solve_leg(x, schedule.legs[l]);
      for (std::size_t j = 0; j <= samples_per_leg; ++j) {
        const double tl = sol.tau * static_cast<double>(j) / static_cast<double>(samples_per_leg);
        const Point p = sol.position(tl);
        os << id << "," << l << "," << (t0 + tl);
        for (Eigen::Index k = 0; k < d; ++k) os << "," << p[k];
        os << "\n";
      }
      x = x + sol.phi_end * sol.w;
      t0 += sol.tau;
    }
  }
}

}  // namespace sepflow
