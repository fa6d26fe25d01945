#pragma once

// Canonical separability: 1-D gap counts, per-axis counts Z^i, their minimum
// Z^perp, axis-aligned separating families and a sign-vector certificate for
// arbitrary hyperplane families.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sepflow/error.hpp"
#include "sepflow/geometry.hpp"

namespace sepflow {

// {x : normal . x + offset = 0}, |normal| = 1.
struct Hyperplane {
  Eigen::VectorXd normal;
  double offset = 0.0;

  double eval(const Point& x) const { return normal.dot(x) + offset; }

  static Hyperplane axis_aligned(std::size_t dim, std::size_t axis, double coordinate) {
    Hyperplane h;
    h.normal = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(axis));
    h.offset = -coordinate;
    return h;
  }
};

enum class FamilyKind { axis_aligned, oblique };

struct SeparatingFamily {
  std::vector<Hyperplane> planes;
  FamilyKind kind = FamilyKind::oblique;
  std::size_t axis = 0;  // meaningful for axis_aligned only
  bool certified = false;
};

// Points at |u.x + h| <= this are considered on the plane.
inline constexpr double kOnPlaneTol = 1e-12;

// Number of adjacent opposite-color pairs in the merged sorted sequence.
inline std::size_t gaps_1d(const std::vector<double>& reds, const std::vector<double>& blues) {
  if (reds.empty() || blues.empty()) throw ValidationError("gaps_1d needs both colors");
  std::vector<std::pair<double, int>> merged;
  merged.reserve(reds.size() + blues.size());
  for (double r : reds) merged.emplace_back(r, 0);
  for (double b : blues) merged.emplace_back(b, 1);
  std::sort(merged.begin(), merged.end());
  std::size_t changes = 0;
  for (std::size_t i = 1; i < merged.size(); ++i) {
    if (merged[i].second == merged[i - 1].second) continue;
    if (merged[i].first == merged[i - 1].first)
      throw ValidationError("duplicate scalar across colors: " + std::to_string(merged[i].first));
    ++changes;
  }
  return changes;
}

inline std::size_t z_axis(const LabeledPair& pair, std::size_t axis) {
  auto [r, b] = project(pair, axis);
  return gaps_1d(r, b);
}

struct ZPerp {
  std::size_t value;
  std::size_t axis;
};

// Minimum of z_axis over all axes except `excluded` (if given); ties go to
// the smallest axis index.
inline ZPerp z_perp_excluding(const LabeledPair& pair, std::size_t excluded) {
  ZPerp best{std::numeric_limits<std::size_t>::max(), 0};
  for (std::size_t i = 0; i < pair.dim(); ++i) {
    if (i == excluded) continue;
    const std::size_t z = z_axis(pair, i);
    if (z < best.value) best = {z, i};
  }
  if (best.value == std::numeric_limits<std::size_t>::max()) throw ValidationError("no admissible axis");
  return best;
}

inline ZPerp z_perp(const LabeledPair& pair) {
  return z_perp_excluding(pair, std::numeric_limits<std::size_t>::max());
}

// True iff no sign vector (sign(u_j.x + h_j))_j is shared by a red and a blue
// point. Throws if a data point lies on a plane.
inline bool verify_family(const LabeledPair& pair, const SeparatingFamily& family) {
  std::set<std::vector<bool>> red_cells;
  auto signs = [&](const Point& x) {
    std::vector<bool> s(family.planes.size());
    for (std::size_t j = 0; j < family.planes.size(); ++j) {
      const double v = family.planes[j].eval(x);
      if (std::abs(v) <= kOnPlaneTol) throw ValidationError("non-strict separation");
      s[j] = v > 0;
    }
    return s;
  };
  for (const auto& x : pair.reds()) red_cells.insert(signs(x));
  bool ok = true;
  for (const auto& y : pair.blues()) ok = ok && !red_cells.count(signs(y));
  return ok;
}

// One plane x^(axis) = midpoint per opposite-color gap on that axis.
inline SeparatingFamily axis_family(const LabeledPair& pair, std::size_t axis) {
  auto [r, b] = project(pair, axis);
  std::vector<std::pair<double, int>> merged;
  for (double v : r) merged.emplace_back(v, 0);
  for (double v : b) merged.emplace_back(v, 1);
  std::sort(merged.begin(), merged.end());
  SeparatingFamily fam;
  fam.kind = FamilyKind::axis_aligned;
  fam.axis = axis;
  for (std::size_t i = 1; i < merged.size(); ++i) {
    if (merged[i].second != merged[i - 1].second)
      fam.planes.push_back(Hyperplane::axis_aligned(pair.dim(), axis, 0.5 * (merged[i - 1].first + merged[i].first)));
  }
  fam.certified = verify_family(pair, fam);
  if (!fam.certified) throw std::logic_error("axis family failed certification");
  return fam;
}

// True iff all points lie within `tol` of their principal line and the colors
// strictly alternate along it. Unbalanced pairs are never interspersed.
inline bool is_interspersed_collinear(const LabeledPair& pair, double tol = 1e-9) {
  if (!pair.balanced()) return false;
  const std::size_t n = pair.size();
  const auto d = static_cast<Eigen::Index>(pair.dim());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) X.row(static_cast<Eigen::Index>(i)) = pair.at(i).transpose();
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd C = X.rowwise() - mean;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C.transpose() * C);
  const Eigen::VectorXd dir = eig.eigenvectors().col(d - 1);
  const Eigen::VectorXd t = C * dir;
  const double residual = (C - t * dir.transpose()).rowwise().norm().maxCoeff();
  if (residual > tol) return false;
  std::vector<std::pair<double, int>> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = {t[static_cast<Eigen::Index>(i)], pair.color_at(i) == Color::red ? 0 : 1};
  std::sort(order.begin(), order.end());
  for (std::size_t i = 1; i < n; ++i)
    if (order[i].second == order[i - 1].second) return false;
  return true;
}

}  // namespace sepflow
