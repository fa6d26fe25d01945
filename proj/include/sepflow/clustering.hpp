#pragma once

// Linear-components decomposition. The clustered color is split into groups
// of d points; each group spans a hyperplane (its base) and is isolated from
// every other data point by two parallel margin planes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sepflow/error.hpp"
#include "sepflow/geometry.hpp"
#include "sepflow/separability.hpp"

namespace sepflow {

inline constexpr double kOnBaseTol = 1e-9;
inline constexpr double kOrthogonalTol = 1e-9;

struct Cluster {
  std::vector<std::size_t> members;  // indices into the clustered color's list
  std::vector<bool> padded;          // member reused from another cluster
  Hyperplane base;
  double margin = 0.0;     // half-width of the isolating strip
  double margin_hi = 0.0;  // h' = h + margin
  double margin_lo = 0.0;  // h'' = h - margin
  Eigen::VectorXd direction;

  Hyperplane upper_plane() const { return {base.normal, margin_hi}; }
  Hyperplane lower_plane() const { return {base.normal, margin_lo}; }
  bool in_strip(const Point& x) const {
    const double s = base.normal.dot(x);
    return -margin_hi < s && s < -margin_lo;
  }
};

struct ClusterFamily {
  std::vector<Cluster> clusters;
  std::size_t target_axis = 0;
  Color color = Color::red;
  SeparatingFamily margins;
};

enum class ClusterColor { automatic, red, blue };

inline void canonicalize_sign(Hyperplane& h) {
  for (Eigen::Index i = 0; i < h.normal.size(); ++i) {
    if (std::abs(h.normal[i]) > 1e-15) {
      if (h.normal[i] < 0) {
        h.normal = -h.normal;
        h.offset = -h.offset;
      }
      return;
    }
  }
}

// Unique hyperplane through d affinely independent points of R^d.
inline Hyperplane hyperplane_through(const std::vector<Point>& pts) {
  if (pts.empty()) throw ValidationError("degenerate cluster: no points");
  const auto d = pts.front().size();
  if (static_cast<Eigen::Index>(pts.size()) != d) throw ValidationError("degenerate cluster: need exactly d points");
  std::vector<const Point*> ptrs;
  for (const auto& p : pts) ptrs.push_back(&p);
  if (!affinely_independent(ptrs, kOnBaseTol)) throw ValidationError("degenerate cluster");
  Eigen::MatrixXd A(d, d + 1);
  for (Eigen::Index k = 0; k < d; ++k) {
    A.row(k).head(d) = pts[static_cast<std::size_t>(k)].transpose();
    A(k, d) = 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd null = svd.matrixV().col(d);
  Hyperplane h;
  const double n = null.head(d).norm();
  h.normal = null.head(d) / n;
  h.offset = null[d] / n;
  canonicalize_sign(h);
  return h;
}

namespace detail {

// Some unit normal orthogonal to the affine hull of fewer than d points,
// avoiding e_target and every point outside the group.
inline Hyperplane generic_plane_through(const LabeledPair& pair, const std::vector<std::size_t>& combined_members,
                                        std::size_t target) {
  const auto d = static_cast<Eigen::Index>(pair.dim());
  const auto m = static_cast<Eigen::Index>(combined_members.size());
  const Point& x0 = pair.at(combined_members.front());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(m - 1, 1), d);
  for (Eigen::Index k = 1; k < m; ++k) D.row(k - 1) = (pair.at(combined_members[static_cast<std::size_t>(k)]) - x0).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeFullV);
  const Eigen::Index rank = (m <= 1) ? 0 : m - 1;
  const Eigen::MatrixXd complement = svd.matrixV().rightCols(d - rank);
  static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  for (int attempt = 1; attempt <= 64; ++attempt) {
    Eigen::VectorXd g(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double r = std::sqrt(primes[i % 16] + 0.5 * static_cast<double>(i / 16)) * attempt;
      g[i] = r - std::floor(r) - 0.5;
    }
    Eigen::VectorXd u = complement * (complement.transpose() * g);
    if (u.norm() < 1e-6) continue;
    Hyperplane h{u.normalized(), 0.0};
    h.offset = -h.normal.dot(x0);
    canonicalize_sign(h);
    if (std::abs(h.normal[static_cast<Eigen::Index>(target)]) >= 1.0 - kOrthogonalTol) continue;
    bool clear = true;
    for (std::size_t q = 0; q < pair.size() && clear; ++q) {
      if (std::find(combined_members.begin(), combined_members.end(), q) != combined_members.end()) continue;
      clear = std::abs(h.eval(pair.at(q))) > 1e3 * kOnBaseTol;
    }
    if (clear) return h;
  }
  throw ValidationError("could not place a plane through a small cluster");
}

inline std::size_t combined_index(const LabeledPair& pair, Color c, std::size_t i) {
  return c == Color::red ? i : pair.reds().size() + i;
}

// Base plane and margins from the current member list.
inline void fit_cluster(const LabeledPair& pair, Color color, std::size_t target, Cluster& cl) {
  std::vector<std::size_t> combined;
  std::vector<Point> pts;
  for (auto i : cl.members) {
    combined.push_back(combined_index(pair, color, i));
    pts.push_back(pair.points(color)[i]);
  }
  if (cl.members.size() == pair.dim()) {
    cl.base = hyperplane_through(pts);
  } else {
    std::vector<const Point*> ptrs;
    for (const auto& p : pts) ptrs.push_back(&p);
    if (!affinely_independent(ptrs, kOnBaseTol)) throw ValidationError("degenerate cluster");
    cl.base = generic_plane_through(pair, combined, target);
  }
  for (const auto& p : pts)
    if (std::abs(cl.base.eval(p)) > kOnBaseTol) throw ValidationError("degenerate cluster: member off its base plane");
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < pair.size(); ++q) {
    if (std::find(combined.begin(), combined.end(), q) != combined.end()) continue;
    const double s = std::abs(cl.base.eval(pair.at(q)));
    if (s <= kOnBaseTol) throw ValidationError("not in general position: point " + std::to_string(q) + " lies on a cluster plane");
    closest = std::min(closest, s);
  }
  cl.margin = 0.5 * closest;
  cl.margin_hi = cl.base.offset + cl.margin;
  cl.margin_lo = cl.base.offset - cl.margin;
}

inline bool orthogonal_to(const Cluster& cl, std::size_t target) {
  return std::abs(cl.base.normal[static_cast<Eigen::Index>(target)]) >= 1.0 - kOrthogonalTol;
}

}  // namespace detail

// Unit projection of e_target onto the base plane.
inline Eigen::VectorXd cluster_direction(const Hyperplane& base, std::size_t target) {
  const auto t = static_cast<Eigen::Index>(target);
  if (std::abs(base.normal[t]) >= 1.0 - kOrthogonalTol) throw ValidationError("base plane orthogonal to the target axis");
  // e_t - n_t n, with the t entry written as sum_{k != t} n_k^2 so a normal
  // close to e_t does not cancel it away.
  const Eigen::VectorXd& n = base.normal;
  Eigen::VectorXd v = -n[t] * n;
  v[t] = 0.0;
  for (Eigen::Index k = 0; k < n.size(); ++k)
    if (k != t) v[t] += n[k] * n[k];
  v.normalize();
  v -= v.dot(n) * n;
  return v.normalized();
}

inline Eigen::VectorXd cluster_direction(const Cluster& cl, std::size_t target) { return cluster_direction(cl.base, target); }

// Exchanges representatives between clusters whose base is orthogonal to
// e_target until none is. Several offenders rotate one member each along a
// cycle; a lone offender trades with another cluster.
inline ClusterFamily repair_axis_orthogonality(const LabeledPair& pair, ClusterFamily family) {
  auto& cls = family.clusters;
  const std::size_t K = cls.size();
  const std::size_t t = family.target_axis;
  auto offenders = [&] {
    std::vector<std::size_t> o;
    for (std::size_t j = 0; j < K; ++j)
      if (detail::orthogonal_to(cls[j], t)) o.push_back(j);
    return o;
  };
  auto real_slots = [&](const Cluster& c) {
    std::vector<std::size_t> s;
    for (std::size_t k = 0; k < c.members.size(); ++k)
      if (!c.padded[k]) s.push_back(k);
    return s;
  };
  auto contains = [](const Cluster& c, std::size_t idx) {
    return std::find(c.members.begin(), c.members.end(), idx) != c.members.end();
  };
  const std::size_t limit = 4 * K * pair.dim() + 4;
  for (std::size_t attempt = 0;; ++attempt) {
    const auto off = offenders();
    if (off.empty()) break;
    if (K == 1) throw ValidationError("single cluster orthogonal to the target axis; re-partition required");
    if (attempt >= limit) throw ValidationError("axis repair did not converge");
    std::vector<std::size_t> touched;
    if (off.size() >= 2) {
      std::vector<std::size_t> slot(off.size()), rep(off.size());
      for (std::size_t i = 0; i < off.size(); ++i) {
        const auto s = real_slots(cls[off[i]]);
        slot[i] = s[(attempt + i) % s.size()];
        rep[i] = cls[off[i]].members[slot[i]];
      }
      bool clash = false;
      for (std::size_t i = 0; i < off.size(); ++i) clash = clash || contains(cls[off[i]], rep[(i + 1) % off.size()]);
      if (clash) continue;
      for (std::size_t i = 0; i < off.size(); ++i) cls[off[i]].members[slot[i]] = rep[(i + 1) % off.size()];
      touched = off;
    } else {
      const std::size_t j = off.front();
      const std::size_t p = (j + 1 + attempt % (K - 1)) % K;
      const auto sj = real_slots(cls[j]);
      const auto sp = real_slots(cls[p]);
      const std::size_t a = sj[attempt % sj.size()];
      const std::size_t b = sp[(attempt / sj.size()) % sp.size()];
      if (contains(cls[j], cls[p].members[b]) || contains(cls[p], cls[j].members[a])) continue;
      std::swap(cls[j].members[a], cls[p].members[b]);
      touched = {j, p};
    }
    for (auto j : touched) detail::fit_cluster(pair, family.color, t, cls[j]);
  }
  for (auto& c : cls) c.direction = cluster_direction(c, t);
  return family;
}

// Asserts every documented invariant of the decomposition and certifies the
// margin planes as a separating family.
inline void certify_clusters(const LabeledPair& pair, ClusterFamily& family) {
  const auto t = static_cast<Eigen::Index>(family.target_axis);
  const auto& own = pair.points(family.color);
  for (const auto& c : family.clusters) {
    if (std::abs(c.base.normal.norm() - 1.0) > 1e-12) throw std::logic_error("base normal not unit");
    for (auto i : c.members)
      if (std::abs(c.base.eval(own[i])) > kOnBaseTol) throw std::logic_error("member off base");
    if (std::abs(c.direction.dot(c.base.normal)) > 1e-12 || !(c.direction[t] > 0))
      throw std::logic_error("bad cluster direction");
    if (detail::orthogonal_to(c, family.target_axis)) throw std::logic_error("base orthogonal to target axis");
    if (!(c.margin > 0) || !(c.margin_hi > c.margin_lo)) throw std::logic_error("empty margin");
    const auto& other = pair.points(family.color == Color::red ? Color::blue : Color::red);
    for (const auto& q : other)
      if (c.in_strip(q)) throw std::logic_error("opposite color inside a strip");
  }
  family.margins = SeparatingFamily{};
  family.margins.kind = FamilyKind::oblique;
  for (const auto& c : family.clusters) {
    family.margins.planes.push_back(c.upper_plane());
    family.margins.planes.push_back(c.lower_plane());
  }
  family.margins.certified = verify_family(pair, family.margins);
  if (!family.margins.certified) throw std::logic_error("margin planes do not separate the pair");
}

inline Color resolve_color(const LabeledPair& pair, ClusterColor choice) {
  switch (choice) {
    case ClusterColor::red: return Color::red;
    case ClusterColor::blue: return Color::blue;
    default: return pair.reds().size() <= pair.blues().size() ? Color::red : Color::blue;
  }
}

// Sorts the clustered color along target_axis and chunks it into groups of d.
// A short last chunk borrows the trailing points of the previous chunk.
inline ClusterFamily linear_components(const LabeledPair& pair, std::size_t target_axis,
                                       ClusterColor choice = ClusterColor::automatic) {
  const std::size_t d = pair.dim();
  if (d < 2) throw ValidationError("linear components need d >= 2");
  if (target_axis >= d) throw ValidationError("target axis out of range");
  ClusterFamily fam;
  fam.target_axis = target_axis;
  fam.color = resolve_color(pair, choice);
  const auto& pts = pair.points(fam.color);
  const std::size_t n = pts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto t = static_cast<Eigen::Index>(target_axis);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pts[i][t] < pts[j][t]; });
  const std::size_t K = (n + d - 1) / d;
  for (std::size_t j = 0; j < K; ++j) {
    Cluster c;
    const std::size_t lo = j * d, hi = std::min(n, lo + d);
    for (std::size_t k = lo; k < hi; ++k) {
      c.members.push_back(order[k]);
      c.padded.push_back(false);
    }
    if (hi - lo < d && j > 0) {
      for (std::size_t k = lo - (d - (hi - lo)); k < lo; ++k) {
        c.members.push_back(order[k]);
        c.padded.push_back(true);
      }
    }
    detail::fit_cluster(pair, fam.color, target_axis, c);
    fam.clusters.push_back(std::move(c));
  }
  fam = repair_axis_orthogonality(pair, std::move(fam));
  certify_clusters(pair, fam);
  return fam;
}

}  // namespace sepflow
