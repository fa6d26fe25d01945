#pragma once

// Control synthesis. Every synthesizer returns a schedule that flows the
// pair into the target strips {x_t > 1} / {x_t <= 1} with a fixed number of
// switches:
//   canonical          z_sep - 1       (ReLU, axis-aligned legs)
//   truncated          2K - 1          (push and undo per cluster)
//   fem                K - 1           (one leg per cluster)
//   relu-decomposed    4K - 2          (ReLU legs equivalent to truncated)
// where K is the number of linear components of the clustered color.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sepflow/clustering.hpp"
#include "sepflow/error.hpp"
#include "sepflow/flow.hpp"
#include "sepflow/geometry.hpp"
#include "sepflow/precision.hpp"
#include "sepflow/schedule.hpp"
#include "sepflow/separability.hpp"

namespace sepflow {

inline constexpr double kClearance = 0.1;
inline constexpr double kSafetyTime = 1e-3;
inline constexpr double kSaturationMargin = 2.0;

struct AxisChoice {
  std::size_t separating;
  std::size_t target;
};

// Separating axis = z_perp argmin and target = smallest other axis. A fixed
// target that coincides with the argmin moves separation to the best of the
// remaining axes.
inline AxisChoice choose_axes(const LabeledPair& pair, std::optional<std::size_t> target) {
  const std::size_t d = pair.dim();
  if (d < 2) throw ValidationError("synthesis needs d >= 2");
  if (target) {
    if (*target >= d) throw ValidationError("target axis out of range");
    return {z_perp_excluding(pair, *target).axis, *target};
  }
  const std::size_t sep = z_perp(pair).axis;
  return {sep, sep == 0 ? std::size_t{1} : std::size_t{0}};
}

inline std::vector<Point> all_points(const LabeledPair& pair) {
  std::vector<Point> pts = pair.reds();
  pts.insert(pts.end(), pair.blues().begin(), pair.blues().end());
  return pts;
}

// One ReLU leg per gap of the separating axis, lowest gap first. Leg m acts
// on everything beyond gap m and alternately lifts and lowers it along the
// target axis so that the group just past gap m lands in its strip. The
// group below the first gap never moves, so when it is red the roles of the
// strips are exchanged.
//
// Displacements of the later groups grow geometrically with the number of
// gaps; positions are therefore tracked in variable precision and every
// duration is rounded up, which only pushes its own group deeper.
inline ControlSchedule synth_canonical(const LabeledPair& pair, std::optional<std::size_t> target_axis = std::nullopt) {
  const AxisChoice ax = choose_axes(pair, target_axis);
  const SeparatingFamily fam = axis_family(pair, ax.separating);
  const auto pts = all_points(pair);
  const std::size_t nr = pair.reds().size();
  const auto sa = static_cast<Eigen::Index>(ax.separating);
  const auto ta = static_cast<Eigen::Index>(ax.target);
  const std::size_t z = fam.planes.size();
  std::vector<double> cut(z);
  for (std::size_t m = 0; m < z; ++m) cut[m] = -fam.planes[m].offset;
  std::vector<std::size_t> group(pts.size());
  std::size_t lowest = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    group[i] = static_cast<std::size_t>(std::lower_bound(cut.begin(), cut.end(), pts[i][sa]) - cut.begin());
    if (pts[i][sa] < pts[lowest][sa]) lowest = i;
  }

  ControlSchedule sch;
  sch.activation = Activation::relu;
  sch.target_axis = ax.target;
  sch.targets_swapped = lowest < nr;
  const Eigen::VectorXd a = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(pair.dim()), sa);
  const Eigen::VectorXd up = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(pair.dim()), ta);

  // Leg l moves everything beyond cut l by sigma_l tau_l (x_s - cut_l), so
  // before leg m a point still in play sits at x_t + A_m x_s - B_m with
  // A_m = sum sigma_l tau_l and B_m = sum sigma_l tau_l cut_l over l < m.
  std::vector<std::vector<std::size_t>> members(z + 1);
  for (std::size_t i = 0; i < pts.size(); ++i) members[group[i]].push_back(i);
  unsigned bits = 192;
  for (;;) {
    PrecisionScope scope(bits);
    std::vector<double> taus;
    double log2_max = 0.0;
    const HighFloat hi(1.0 + kClearance), lo(1.0 - kClearance);
    HighFloat A = 0, B = 0, pos, need;
    for (std::size_t m = 0; m < z; ++m) {
      const bool lift = m % 2 == 0;
      HighFloat need_time = 0;
      for (auto i : members[m + 1]) {
        pos = A * pts[i][sa];
        pos += pts[i][ta];
        pos -= B;
        need = lift ? HighFloat(hi - pos) : HighFloat(pos - lo);
        need /= HighFloat(pts[i][sa]) - cut[m];
        if (need > need_time) need_time = need;
      }
      const double tau = round_up(HighFloat(need_time + kSafetyTime));
      if (!std::isfinite(tau)) throw ValidationError("canonical durations overflow double range");
      taus.push_back(tau);
      if (lift) {
        A += tau;
        B += HighFloat(tau) * cut[m];
      } else {
        A -= tau;
        B -= HighFloat(tau) * cut[m];
      }
      log2_max = std::max(log2_max, magnitude_log2(HighFloat(abs(A) + abs(B) + 2)));
    }
    if (log2_max + 96 > bits) {
      bits = bits_for(log2_max);
      continue;
    }
    for (std::size_t m = 0; m < z; ++m) sch.push(a, -cut[m], m % 2 == 0 ? up : Eigen::VectorXd(-up), taus[m]);
    break;
  }
  return sch;
}

namespace detail {

// Smallest activation value over the points strictly inside {u.x + h > 0},
// capped at 1 (1 when that half-space holds no point), divided by
// kSaturationMargin so that every such point saturates with room to spare.
inline double half_space_floor(const std::vector<Point>& x, const Eigen::VectorXd& u, double h) {
  double m = 1.0;
  for (const auto& p : x) {
    const double s = u.dot(p) + h;
    if (s > 0) m = std::min(m, s);
  }
  return m / kSaturationMargin;
}

// Time for every non-padded member to move from its current position to
// x_t >= 1 + clearance (or x_t > 1 + clearance for the pushed color) when
// its speed along `dir` is `speed(p)`.
template <class Speed>
double lift_time(const std::vector<Point>& x, const std::vector<std::size_t>& combined, const std::vector<bool>& padded,
                 const Eigen::VectorXd& dir, std::size_t target, Speed speed) {
  const auto t = static_cast<Eigen::Index>(target);
  double tau = 0.0;
  for (std::size_t k = 0; k < combined.size(); ++k) {
    if (padded[k]) continue;
    const Point& p = x[combined[k]];
    const double v = speed(p) * dir[t];
    if (!(v > 0)) throw std::logic_error("cluster member has no upward speed");
    tau = std::max(tau, (1.0 + kClearance - p[t]) / v);
  }
  return tau + kSafetyTime;
}

// Positions of every point while a schedule is being built. ReLU legs can
// swing far points out to |x| ~ 1e7 and back, and a.x + b recomputed out
// there in double loses everything below 1e-3. Double and long double run
// side by side; once they disagree the whole history is replayed in
// variable precision sized to the largest coordinate, as certify does.
class Tracker {
 public:
  explicit Tracker(std::vector<Point> start) : start_(std::move(start)), view_(start_) {
    for (const auto& p : start_) {
      d_.emplace_back(p.data(), p.data() + p.size());
      ld_.emplace_back(p.data(), p.data() + p.size());
    }
  }

  const std::vector<Point>& points() const { return view_; }

  void apply(const ControlLeg& leg) {
    legs_.push_back(leg);
    if (bits_ == 0) {
      long double diff = 0;
      for (std::size_t i = 0; i < d_.size(); ++i) {
        flow_leg_exact_inplace(d_[i], leg);
        flow_leg_exact_inplace(ld_[i], leg);
        for (std::size_t k = 0; k < d_[i].size(); ++k) diff = std::max(diff, std::abs(d_[i][k] - ld_[i][k]));
      }
      if (diff <= kAgreement) {
        for (std::size_t i = 0; i < ld_.size(); ++i)
          for (std::size_t k = 0; k < ld_[i].size(); ++k) view_[i][static_cast<Eigen::Index>(k)] = static_cast<double>(ld_[i][k]);
        return;
      }
      bits_ = 192;
      replay();
    } else {
      {
        PrecisionScope scope(bits_);
        for (auto& x : hp_) flow_leg_exact_inplace(x, leg);
      }
      if (log2_max() + 96 > bits_) replay(); else refresh();
    }
    // Back near the unit cube the excursion is over: rebase on the current
    // positions and continue cheaply.
    if (log2_max() < kRebaseLog2) rebase();
  }

 private:
  static constexpr long double kAgreement = 1e-11L;
  static constexpr double kRebaseLog2 = 4.0;

  void rebase() {
    start_ = view_;
    legs_.clear();
    hp_.clear();
    bits_ = 0;
    for (std::size_t i = 0; i < start_.size(); ++i) {
      const auto& p = start_[i];
      d_[i].assign(p.data(), p.data() + p.size());
      ld_[i].assign(p.data(), p.data() + p.size());
    }
  }

  double log2_max() const {
    double m = 0.0;
    // Coordinates stay far inside double range; the double image is enough
    // to size the precision and much cheaper than an MPFR log.
    for (const auto& x : hp_)
      for (const auto& v : x) m = std::max(m, std::abs(static_cast<double>(v)));
    return m > 1 ? std::log2(m) : 0.0;
  }

  void replay() {
    for (;;) {
      PrecisionScope scope(bits_);
      hp_.clear();
      double m = 0.0;
      for (const auto& p : start_) {
        std::vector<HighFloat> x;
        for (Eigen::Index k = 0; k < p.size(); ++k) x.emplace_back(p[k]);
        hp_.push_back(std::move(x));
      }
      for (const auto& leg : legs_) {
        for (auto& x : hp_) flow_leg_exact_inplace(x, leg);
        m = std::max(m, log2_max());
      }
      if (m + 96 <= bits_) break;
      bits_ = bits_for(m);
    }
    refresh();
  }

  void refresh() {
    for (std::size_t i = 0; i < hp_.size(); ++i)
      for (std::size_t k = 0; k < hp_[i].size(); ++k) view_[i][static_cast<Eigen::Index>(k)] = static_cast<double>(hp_[i][k]);
  }

  std::vector<Point> start_, view_;
  std::vector<ControlLeg> legs_;
  std::vector<std::vector<double>> d_;
  std::vector<std::vector<long double>> ld_;
  std::vector<std::vector<HighFloat>> hp_;
  unsigned bits_ = 0;  // 0 while double and long double agree
};

inline std::vector<std::size_t> combined_members(const LabeledPair& pair, const ClusterFamily& fam, const Cluster& c) {
  std::vector<std::size_t> out;
  for (auto i : c.members) out.push_back(combined_index(pair, fam.color, i));
  return out;
}

// Rounding leaves a.w of order eps |a| even when a is built orthogonal to w.
// That residue makes a.x + b drift along a leg by c times the excursion,
// and ReLU legs swing points far out, so the drift shows up in the net
// displacement. Shifting two components of a by a few hundred ulps brings
// the exact dot product down by several orders of magnitude.
inline Eigen::VectorXd tighten_orthogonality(Eigen::VectorXd a, const Eigen::VectorXd& w) {
  const Eigen::Index d = a.size();
  if (d < 2) return a;
  Eigen::Index k = 0, p = -1;
  for (Eigen::Index i = 1; i < d; ++i)
    if (std::abs(w[i]) > std::abs(w[k])) k = i;
  for (Eigen::Index i = 0; i < d; ++i)
    if (i != k && (p < 0 || std::abs(w[i]) > std::abs(w[p]))) p = i;
  if (a[k] == 0 || a[p] == 0 || w[k] == 0 || w[p] == 0) return a;

  PrecisionScope scope(320);
  auto exact = [&](const Eigen::VectorXd& v) {
    HighFloat c = 0;
    for (Eigen::Index i = 0; i < d; ++i) c += HighFloat(v[i]) * w[i];
    return c;
  };
  const HighFloat c0 = exact(a);
  if (c0 == 0) return a;
  auto ulp = [](double x) { return std::nextafter(std::abs(x), HUGE_VAL) - std::abs(x); };
  const double up = ulp(a[p]), uk = ulp(a[k]);
  const double A = up * w[p], B = uk * w[k];
  const double r0 = static_cast<double>(c0);
  constexpr long kReach = 1L << 14;
  long best_p = 0;
  double best_k = std::nearbyint(-r0 / B), best = std::abs(r0 + best_k * B);
  for (long n = -kReach; n <= kReach; ++n) {
    const double r = r0 + static_cast<double>(n) * A;
    const double m = std::nearbyint(-r / B);
    const double res = std::abs(r + m * B);
    if (res < best) best = res, best_p = n, best_k = m;
  }
  Eigen::VectorXd out = a;
  out[p] += static_cast<double>(best_p) * up;
  out[k] += best_k * uk;
  return abs(exact(out)) < abs(c0) ? out : a;
}

inline void assert_orthogonal(const ControlLeg& leg) {
  if (std::abs(leg.a.dot(leg.w)) > 1e-12 * std::max(1.0, leg.a.norm()))
    throw std::logic_error("synthesized leg with a.w != 0");
}

}  // namespace detail

struct ClusteredSynthesis {
  ControlSchedule schedule;
  ClusterFamily family;
};

inline ClusteredSynthesis synth_truncated_with_family(const LabeledPair& pair, std::size_t target_axis,
                                                      ClusterColor color = ClusterColor::automatic) {
  ClusteredSynthesis out{{}, linear_components(pair, target_axis, color)};
  auto& sch = out.schedule;
  sch.activation = Activation::truncated;
  sch.target_axis = target_axis;
  sch.targets_swapped = out.family.color == Color::blue;
  detail::Tracker x(all_points(pair));
  for (const auto& c : out.family.clusters) {
    const auto& u = c.base.normal;
    const double d_hi = detail::half_space_floor(x.points(), u, c.margin_hi);
    const Eigen::VectorXd a_hi = detail::tighten_orthogonality(u / d_hi, c.direction);
    const double b_hi = c.margin_hi / d_hi;
    const double tau = detail::lift_time(x.points(), detail::combined_members(pair, out.family, c), c.padded, c.direction,
                                         target_axis, [&](const Point& p) {
                                           return eval_activation(Activation::truncated, a_hi.dot(p) + b_hi);
                                         });
    sch.push(a_hi, b_hi, c.direction, tau);
    x.apply(sch.legs.back());
    const double d_lo = detail::half_space_floor(x.points(), u, c.margin_lo);
    sch.push(detail::tighten_orthogonality(u / d_lo, c.direction), c.margin_lo / d_lo, -c.direction, tau);
    x.apply(sch.legs.back());
  }
  for (const auto& l : sch.legs) detail::assert_orthogonal(l);
  return out;
}

// Per cluster: a push leg saturating every point of {u.x + h' > 0} along v,
// then an undo leg cancelling it on {u.x + h'' > 0}. Only the strip between
// the two margin planes keeps a net displacement.
inline ControlSchedule synth_truncated(const LabeledPair& pair, std::size_t target_axis,
                                       ClusterColor color = ClusterColor::automatic) {
  return synth_truncated_with_family(pair, target_axis, color).schedule;
}

// One hat-activation leg per cluster whose support is exactly the
// cluster's strip.
inline ControlSchedule synth_fem(const LabeledPair& pair, std::size_t target_axis, ClusterColor color = ClusterColor::automatic) {
  const ClusterFamily fam = linear_components(pair, target_axis, color);
  ControlSchedule sch;
  sch.activation = Activation::fem;
  sch.target_axis = target_axis;
  sch.targets_swapped = fam.color == Color::blue;
  detail::Tracker x(all_points(pair));
  for (const auto& c : fam.clusters) {
    const Eigen::VectorXd a = detail::tighten_orthogonality(c.base.normal / c.margin, c.direction);
    const double b = c.base.offset / c.margin;
    const double tau = detail::lift_time(x.points(), detail::combined_members(pair, fam, c), c.padded, c.direction, target_axis,
                                         [&](const Point& p) { return eval_activation(Activation::fem, a.dot(p) + b); });
    sch.push(a, b, c.direction, tau);
    x.apply(sch.legs.back());
  }
  for (const auto& l : sch.legs) detail::assert_orthogonal(l);
  return sch;
}

// ReLU is positively homogeneous, so (a/2^e, b/2^e, w, 2^e tau) has the same
// flow as (a, b, w, tau). Picks the smallest e >= 0 with |a_k|, |b| <= 1;
// power-of-two factors leave every product, and so a.w, exactly as it was.
inline ControlSchedule balance_relu_scale(ControlSchedule sch) {
  if (sch.activation != Activation::relu) throw ValidationError("rescaling needs a ReLU schedule");
  for (auto& l : sch.legs) {
    const double m = std::max(l.a.cwiseAbs().maxCoeff(), std::abs(l.b));
    if (!(m > 1.0)) continue;
    int e = 0;
    std::frexp(m, &e);  // m < 2^e
    l.a = l.a.unaryExpr([e](double v) { return std::ldexp(v, -e); });
    l.b = std::ldexp(l.b, -e);
    l.tau = std::ldexp(l.tau, e);
  }
  return sch;
}

// Which clusters use the fused three-leg ReLU form instead of four legs.
enum class Fusion { none, first_cluster, all_clusters };

// Each truncated leg (a, b, w, tau) becomes the ReLU pair (a, b, w, tau),
// (a, b - 1, -w, tau), valid because a.w = 0 keeps a.x + b fixed along the
// leg. A fused cluster instead uses
//   (u/m, h/m + 1, v, T), (u/m, h/m, -v, 2T), (u/m, h/m - 1, v, T)
// whose rate profile relu(z) - 2 relu(z-1) + relu(z-2), z = s/m + 1, is 1 on
// the base and vanishes at distance >= m from it. Every point outside the
// cluster sits at distance >= 2m, so it never sees the hat. Fusing only the
// first cluster gives 4K - 2 switches.
inline ControlSchedule synth_relu_decomposed(const LabeledPair& pair, std::size_t target_axis,
                                             ClusterColor color = ClusterColor::automatic,
                                             Fusion fusion = Fusion::first_cluster) {
  const ClusterFamily fam = linear_components(pair, target_axis, color);
  ControlSchedule sch;
  sch.activation = Activation::relu;
  sch.target_axis = target_axis;
  sch.targets_swapped = fam.color == Color::blue;
  detail::Tracker x(all_points(pair));
  auto emit = [&](Eigen::VectorXd a, double b, Eigen::VectorXd w, double tau) {
    sch.push(std::move(a), b, std::move(w), tau);
    x.apply(sch.legs.back());
  };
  for (std::size_t j = 0; j < fam.clusters.size(); ++j) {
    const auto& c = fam.clusters[j];
    const auto& u = c.base.normal;
    const auto& v = c.direction;
    const auto members = detail::combined_members(pair, fam, c);
    const bool fuse = fusion == Fusion::all_clusters || (fusion == Fusion::first_cluster && j == 0);
    if (fuse) {
      const Eigen::VectorXd a = detail::tighten_orthogonality(u / c.margin, v);
      const double b = c.base.offset / c.margin + 1.0;
      const double tau = detail::lift_time(x.points(), members, c.padded, v, target_axis,
                                           [&](const Point& p) { return eval_activation(Activation::relu, a.dot(p) + b); });
      emit(a, b, v, tau);
      emit(a, b - 1.0, -v, 2.0 * tau);
      emit(a, b - 2.0, v, tau);
      continue;
    }
    const double d_hi = detail::half_space_floor(x.points(), u, c.margin_hi);
    const Eigen::VectorXd a_hi = detail::tighten_orthogonality(u / d_hi, v);
    const double b_hi = c.margin_hi / d_hi;
    const double tau = detail::lift_time(x.points(), members, c.padded, v, target_axis, [&](const Point& p) {
      return eval_activation(Activation::truncated, a_hi.dot(p) + b_hi);
    });
    emit(a_hi, b_hi, v, tau);
    emit(a_hi, b_hi - 1.0, -v, tau);
    const double d_lo = detail::half_space_floor(x.points(), u, c.margin_lo);
    const Eigen::VectorXd a_lo = detail::tighten_orthogonality(u / d_lo, v);
    const double b_lo = c.margin_lo / d_lo;
    emit(a_lo, b_lo, -v, tau);
    emit(a_lo, b_lo - 1.0, v, tau);
  }
  for (const auto& l : sch.legs) detail::assert_orthogonal(l);
  return balance_relu_scale(std::move(sch));
}

// Replaces every leg of a truncated-activation schedule by its two ReLU legs.
inline ControlSchedule decompose_truncated(const ControlSchedule& trunc) {
  if (trunc.activation != Activation::truncated) throw ValidationError("decomposition needs a truncated schedule");
  ControlSchedule out = trunc;
  out.activation = Activation::relu;
  out.legs.clear();
  for (const auto& l : trunc.legs) {
    detail::assert_orthogonal(l);
    out.push(l.a, l.b, l.w, l.tau);
    out.push(l.a, l.b - 1.0, -l.w, l.tau);
  }
  return out;
}

// Sum over switches of the Euclidean norm of the jump in (a, b, w).
inline double tv_seminorm(const ControlSchedule& sch) {
  double tv = 0.0;
  for (std::size_t k = 1; k < sch.legs.size(); ++k) {
    const auto& p = sch.legs[k - 1];
    const auto& q = sch.legs[k];
    const double db = q.b - p.b;
    tv += std::sqrt((q.a - p.a).squaredNorm() + db * db + (q.w - p.w).squaredNorm());
  }
  return tv;
}

struct TvReport {
  double value = 0.0;
  double bound = 0.0;        // 2 M sqrt(2 d^2 + d)
  double sup_entry = 0.0;    // max |entry| of (a, b, w) over legs
  bool premise = false;      // sup_entry <= sqrt(2d + 1)
  bool holds = false;        // value <= bound
};

inline TvReport tv_report(const ControlSchedule& sch, std::size_t dim) {
  TvReport r;
  r.value = tv_seminorm(sch);
  const double d = static_cast<double>(dim);
  r.bound = 2.0 * static_cast<double>(sch.switches()) * std::sqrt(2.0 * d * d + d);
  for (const auto& l : sch.legs)
    r.sup_entry = std::max({r.sup_entry, l.a.cwiseAbs().maxCoeff(), std::abs(l.b), l.w.cwiseAbs().maxCoeff()});
  r.premise = r.sup_entry <= std::sqrt(2.0 * d + 1.0);
  r.holds = r.value <= r.bound;
  return r;
}

enum class Algorithm { canonical, truncated, fem, relu_decomposed };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::canonical: return "canonical";
    case Algorithm::truncated: return "truncated";
    case Algorithm::fem: return "fem";
    default: return "relu-decomposed";
  }
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "canonical") return Algorithm::canonical;
  if (s == "truncated") return Algorithm::truncated;
  if (s == "fem") return Algorithm::fem;
  if (s == "relu-decomposed") return Algorithm::relu_decomposed;
  throw ValidationError("unknown algorithm '" + s + "'");
}

inline ControlSchedule synthesize(const LabeledPair& pair, Algorithm algo, std::optional<std::size_t> target_axis,
                                  ClusterColor color = ClusterColor::automatic) {
  if (algo == Algorithm::canonical) return synth_canonical(pair, target_axis);
  const std::size_t t = target_axis.value_or(0);
  switch (algo) {
    case Algorithm::truncated: return synth_truncated(pair, t, color);
    case Algorithm::fem: return synth_fem(pair, t, color);
    default: return synth_relu_decomposed(pair, t, color);
  }
}

}  // namespace sepflow
