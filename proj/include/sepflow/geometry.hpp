#pragma once

// Point-cloud data model: labeled red/blue pairs in [0,1]^d, random sampling
// and the two genericity predicates used downstream (distinct coordinates on
// every axis, general position).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <concepts>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sepflow/error.hpp"

namespace sepflow {

using Point = Eigen::VectorXd;

enum class Color { red, blue };

inline const char* to_string(Color c) { return c == Color::red ? "red" : "blue"; }

enum class SamplingLaw { uniform_cube, isotropic_gaussian };

// Standard deviation of the gaussian law (centered at (1/2,...,1/2)) before
// rejection to the unit cube.
inline constexpr double kGaussianSigma = 0.25;
inline constexpr std::size_t kMaxRejections = 1'000'000;

// Red set R and blue set B. Construction validates dimensions, the unit-cube
// bound and pairwise distinctness; afterwards the value is immutable.
class LabeledPair {
 public:
  LabeledPair(std::size_t dim, std::vector<Point> reds, std::vector<Point> blues)
      : dim_(dim), reds_(std::move(reds)), blues_(std::move(blues)) {
    validate();
  }

  std::size_t dim() const { return dim_; }
  const std::vector<Point>& reds() const { return reds_; }
  const std::vector<Point>& blues() const { return blues_; }
  const std::vector<Point>& points(Color c) const { return c == Color::red ? reds_ : blues_; }
  std::size_t size() const { return reds_.size() + blues_.size(); }
  bool balanced() const { return reds_.size() == blues_.size(); }

  // Points of R followed by points of B; indices in reports refer to this order.
  const Point& at(std::size_t combined_index) const {
    return combined_index < reds_.size() ? reds_[combined_index]
                                         : blues_[combined_index - reds_.size()];
  }
  Color color_at(std::size_t combined_index) const {
    return combined_index < reds_.size() ? Color::red : Color::blue;
  }

  // Swaps the roles of the two colors.
  LabeledPair relabeled() const { return LabeledPair(dim_, blues_, reds_); }

 private:
  void validate() const {
    if (dim_ == 0) throw ValidationError("dimension must be positive");
    if (reds_.empty() || blues_.empty()) throw ValidationError("both colors must be nonempty");
    std::vector<std::vector<double>> all;
    all.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const Point& p = at(i);
      if (static_cast<std::size_t>(p.size()) != dim_)
        throw ValidationError("dimension mismatch at point " + std::to_string(i));
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (!(p[k] >= 0.0 && p[k] <= 1.0))
          throw ValidationError("coordinate outside [0,1] at point " + std::to_string(i));
      }
      all.emplace_back(p.data(), p.data() + p.size());
    }
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return all[a] < all[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (all[order[i - 1]] == all[order[i]])
        throw ValidationError("duplicate points " + std::to_string(order[i - 1]) + " and " +
                              std::to_string(order[i]));
    }
  }

  std::size_t dim_;
  std::vector<Point> reds_;
  std::vector<Point> blues_;
};

namespace detail {

// Draws one point of the requested law; gaussian draws outside the cube are
// rejected (the rejection counter is shared across the whole pair).
template <class Engine>
Point draw_point(Engine& rng, std::size_t d, SamplingLaw law, std::size_t& rejections) {
  Point p(static_cast<Eigen::Index>(d));
  if (law == SamplingLaw::uniform_cube) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < d; ++k) p[static_cast<Eigen::Index>(k)] = u(rng);
    return p;
  }
  std::normal_distribution<double> g(0.5, kGaussianSigma);
  for (;;) {
    bool inside = true;
    for (std::size_t k = 0; k < d; ++k) {
      const double v = g(rng);
      p[static_cast<Eigen::Index>(k)] = v;
      inside = inside && v >= 0.0 && v <= 1.0;
    }
    if (inside) return p;
    if (++rejections > kMaxRejections) throw ValidationError("degenerate law");
  }
}

}  // namespace detail

// Samples N_R red and N_B blue points i.i.d. from `law` using the supplied
// engine. A point that repeats any coordinate of an earlier point on the same
// axis is redrawn, so the result always satisfies the distinct-coordinate
// condition exactly.
template <std::uniform_random_bit_generator Engine>
LabeledPair sample_pair(Engine& rng, std::size_t d, std::size_t n_red, std::size_t n_blue,
                        SamplingLaw law = SamplingLaw::uniform_cube) {
  if (d == 0) throw ValidationError("dimension must be positive");
  if (n_red == 0 || n_blue == 0) throw ValidationError("both colors must be nonempty");
  std::vector<std::unordered_set<double>> seen(d);
  std::size_t rejections = 0;
  auto draw_distinct = [&]() {
    for (;;) {
      Point p = detail::draw_point(rng, d, law, rejections);
      bool fresh = true;
      for (std::size_t k = 0; k < d && fresh; ++k) fresh = !seen[k].count(p[static_cast<Eigen::Index>(k)]);
      if (fresh) {
        for (std::size_t k = 0; k < d; ++k) seen[k].insert(p[static_cast<Eigen::Index>(k)]);
        return p;
      }
      if (++rejections > kMaxRejections) throw ValidationError("degenerate law");
    }
  };
  std::vector<Point> reds, blues;
  reds.reserve(n_red);
  blues.reserve(n_blue);
  for (std::size_t i = 0; i < n_red; ++i) reds.push_back(draw_distinct());
  for (std::size_t i = 0; i < n_blue; ++i) blues.push_back(draw_distinct());
  return LabeledPair(d, std::move(reds), std::move(blues));
}

inline LabeledPair sample_pair(std::size_t d, std::size_t n_red, std::size_t n_blue, std::uint64_t seed,
                               SamplingLaw law = SamplingLaw::uniform_cube) {
  std::mt19937_64 rng(seed);
  return sample_pair(rng, d, n_red, n_blue, law);
}

struct GenericityOptions {
  double tol = 1e-9;
  // Exhaustive (d+1)-subset enumeration is used when the cloud has at most
  // `exhaustive_max_points` points and the subset count stays below
  // `exhaustive_max_subsets`; otherwise `spot_checks` random subsets are tested.
  std::size_t exhaustive_max_points = 40;
  std::uint64_t exhaustive_max_subsets = 2'000'000;
  std::size_t spot_checks = 100'000;
  std::uint64_t spot_seed = 0x5eedf10a;
};

struct GenericityReport {
  bool distinct_coords = true;
  bool general_position = true;
  // Combined indices (reds first) of a violating subset: the colliding pair
  // for the distinct-coordinate test, the (d+1)-subset for general position.
  std::optional<std::vector<std::size_t>> coords_witness;
  std::optional<std::vector<std::size_t>> position_witness;
  bool exhaustive = true;
};

// Relative affine-rank test of d+1 points: the smallest singular value of the
// difference matrix (rows x_k - x_0) must exceed tol times its largest row
// norm.
inline bool affinely_independent(const std::vector<const Point*>& pts, double tol) {
  const Eigen::Index d = pts.front()->size();
  const Eigen::Index m = static_cast<Eigen::Index>(pts.size()) - 1;
  if (m == 0) return true;
  Eigen::MatrixXd diff(m, d);
  for (Eigen::Index k = 0; k < m; ++k) diff.row(k) = (*pts[static_cast<std::size_t>(k + 1)] - *pts[0]).transpose();
  const double scale = diff.rowwise().norm().maxCoeff();
  if (scale == 0.0) return false;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
  const auto& sv = svd.singularValues();
  if (sv.size() < m) return false;
  return sv[m - 1] > tol * scale;
}

namespace detail {

inline std::uint64_t binomial_u64(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double r = 1;
  for (std::uint64_t i = 0; i < k; ++i) r = r * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
  return r > 1.8e19L ? UINT64_MAX : static_cast<std::uint64_t>(std::llround(r));
}

}  // namespace detail

inline GenericityReport check_genericity(const LabeledPair& pair, const GenericityOptions& opt = {}) {
  if (!(opt.tol > 0)) throw ValidationError("tolerance must be positive");
  const std::size_t n = pair.size();
  const std::size_t d = pair.dim();
  GenericityReport rep;

  for (std::size_t k = 0; k < d && rep.distinct_coords; ++k) {
    std::vector<std::pair<double, std::size_t>> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = {pair.at(i)[static_cast<Eigen::Index>(k)], i};
    std::sort(vals.begin(), vals.end());
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(vals[i].first - vals[i - 1].first) <= opt.tol) {
        rep.distinct_coords = false;
        rep.coords_witness = std::vector<std::size_t>{std::min(vals[i - 1].second, vals[i].second),
                                               std::max(vals[i - 1].second, vals[i].second)};
        break;
      }
    }
  }

  const std::size_t m = d + 1;
  if (n < m) return rep;  // no (d+1)-subsets: vacuously in general position

  std::vector<const Point*> sub(m);
  auto test_subset = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t j = 0; j < m; ++j) sub[j] = &pair.at(idx[j]);
    return affinely_independent(sub, opt.tol);
  };
  auto fail = [&](std::vector<std::size_t> idx) {
    rep.general_position = false;
    std::sort(idx.begin(), idx.end());
    rep.position_witness = std::move(idx);
  };

  const std::uint64_t count = detail::binomial_u64(n, m);
  rep.exhaustive = n <= opt.exhaustive_max_points && count <= opt.exhaustive_max_subsets;
  if (rep.exhaustive) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
      if (!test_subset(idx)) {
        fail(idx);
        return rep;
      }
      std::size_t j = m;
      while (j > 0 && idx[j - 1] == n - m + (j - 1)) --j;
      if (j == 0) break;
      ++idx[j - 1];
      for (std::size_t t = j; t < m; ++t) idx[t] = idx[t - 1] + 1;
    }
    return rep;
  }

  std::mt19937_64 rng(opt.spot_seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> idx(m);
  for (std::size_t s = 0; s < opt.spot_checks; ++s) {
    // partial Fisher-Yates
    for (std::size_t j = 0; j < m; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, n - 1);
      std::swap(all[j], all[pick(rng)]);
      idx[j] = all[j];
    }
    if (!test_subset(idx)) {
      fail(idx);
      return rep;
    }
  }
  return rep;
}

// Order-preserving extraction of coordinate `axis` (0-based). Throws if two
// points collide on that axis.
inline std::pair<std::vector<double>, std::vector<double>> project(const LabeledPair& pair, std::size_t axis) {
  if (axis >= pair.dim()) throw ValidationError("axis out of range");
  const auto ax = static_cast<Eigen::Index>(axis);
  std::vector<double> r, b;
  r.reserve(pair.reds().size());
  b.reserve(pair.blues().size());
  for (const auto& p : pair.reds()) r.push_back(p[ax]);
  for (const auto& p : pair.blues()) b.push_back(p[ax]);
  std::vector<double> all(r);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw ValidationError("coordinate collision on axis " + std::to_string(axis));
  return {std::move(r), std::move(b)};
}

}  // namespace sepflow
