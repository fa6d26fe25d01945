#pragma once

// Empirical laws of Z^perp (or of canonical switch counts) from uniformly
// sampled pairs, compared to the exact CCDF.
//
// The sample stream is cut into fixed-size blocks, each with its own engine
// seeded from (seed, block index), so the totals do not depend on how blocks
// are spread over workers.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "sepflow/control.hpp"
#include "sepflow/distributions.hpp"
#include "sepflow/geometry.hpp"
#include "sepflow/separability.hpp"

namespace sepflow {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t block_seed(std::uint64_t seed, std::uint64_t block) { return splitmix64(seed ^ splitmix64(block + 1)); }

enum class Statistic {
  z_perp,              // min over axes of the gap count
  canonical_switches,  // switches of synth_canonical plus one
};

struct MonteCarloOptions {
  std::size_t d = 1;
  std::size_t n = 2;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::size_t block_size = 1000;
  Statistic statistic = Statistic::z_perp;
};

struct MonteCarloReport {
  MonteCarloOptions options;
  std::vector<std::uint64_t> counts;  // counts[k] for k = 0..2N-1 (index 0 unused)
  std::vector<double> empirical_ccdf, exact_ccdf, std_error, z_score;  // index k = 1..2N-1
  double max_abs_z = 0.0;
  double chi_square = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  double tv_distance = 0.0;  // between empirical and exact PMF
};

namespace detail {

inline std::size_t statistic_value(const LabeledPair& pair, Statistic st) {
  if (st == Statistic::z_perp) return z_perp(pair).value;
  return synth_canonical(pair).switches() + 1;
}

inline void run_block(const MonteCarloOptions& o, std::size_t block, std::vector<std::uint64_t>& counts) {
  std::mt19937_64 rng(block_seed(o.seed, block));
  const std::size_t begin = block * o.block_size;
  const std::size_t end = std::min(o.samples, begin + o.block_size);
  for (std::size_t s = begin; s < end; ++s) {
    const LabeledPair pair = sample_pair(rng, o.d, o.n, o.n, SamplingLaw::uniform_cube);
    ++counts.at(statistic_value(pair, o.statistic));
  }
}

}  // namespace detail

// Tallies the statistic over o.samples pairs.
inline std::vector<std::uint64_t> montecarlo_counts(const MonteCarloOptions& o) {
  if (o.samples == 0) throw ValidationError("samples must be positive");
  if (o.block_size == 0) throw ValidationError("block size must be positive");
  if (o.statistic == Statistic::canonical_switches && o.d < 2) throw ValidationError("canonical synthesis needs d >= 2");
  const std::size_t blocks = (o.samples + o.block_size - 1) / o.block_size;
  const unsigned workers = std::max(1u, std::min<unsigned>(o.workers, static_cast<unsigned>(blocks)));
  std::vector<std::vector<std::uint64_t>> partial(workers, std::vector<std::uint64_t>(2 * o.n, 0));
  auto work = [&](unsigned w) {
    for (std::size_t b = w; b < blocks; b += workers) detail::run_block(o, b, partial[w]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  std::vector<std::uint64_t> total(2 * o.n, 0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += p[k];
  return total;
}

// Normal deviate with the same one-sided tail probability as `count` under
// Binomial(n, p). Equals the usual (x - np)/sqrt(np(1-p)) for large counts;
// in the far tail, where np << 1, that ratio is not remotely normal and a
// single hit reads as 6 sigma.
inline double binomial_z(std::uint64_t count, std::uint64_t n, double p) {
  if (!(p > 0.0)) return count == 0 ? 0.0 : HUGE_VAL;
  if (!(p < 1.0)) return count == n ? 0.0 : -HUGE_VAL;
  namespace bm = boost::math;
  const bm::binomial_distribution<double> bin(static_cast<double>(n), p);
  const bm::normal_distribution<double> unit;
  const double x = static_cast<double>(count), mean = static_cast<double>(n) * p;
  if (x > mean) {
    const double upper = bm::cdf(bm::complement(bin, x - 1.0));  // P(X >= x)
    return upper >= 0.5 ? 0.0 : bm::quantile(bm::complement(unit, upper));
  }
  const double lower = bm::cdf(bin, x);  // P(X <= x)
  return lower >= 0.5 ? 0.0 : -bm::quantile(bm::complement(unit, lower));
}

// Per-k z-scores of the empirical CCDF, a chi-square test of the PMF with
// adjacent cells pooled until each expects at least 5 samples, and the
// total-variation distance between the PMFs.
inline MonteCarloReport compare_to_exact(const MonteCarloOptions& o, const std::vector<std::uint64_t>& counts) {
  MonteCarloReport r;
  r.options = o;
  r.counts = counts;
  const std::size_t K = 2 * o.n - 1;
  const double n = static_cast<double>(o.samples);
  r.empirical_ccdf.assign(K + 1, 0.0);
  r.exact_ccdf.assign(K + 1, 0.0);
  r.std_error.assign(K + 1, 0.0);
  r.z_score.assign(K + 1, 0.0);
  std::uint64_t tail = 0;
  for (std::size_t k = K; k >= 1; --k) {
    tail += counts[k];
    r.empirical_ccdf[k] = static_cast<double>(tail) / n;
    const double p = to_double(ccdf_zperp(o.d, o.n, k));
    r.exact_ccdf[k] = p;
    r.std_error[k] = std::sqrt(p * (1.0 - p) / n);
    r.z_score[k] = binomial_z(tail, o.samples, p);
    r.max_abs_z = std::max(r.max_abs_z, std::abs(r.z_score[k]));
  }
  std::vector<double> pmf(K + 1, 0.0);
  for (std::size_t k = 1; k <= K; ++k) pmf[k] = to_double(pmf_zperp(o.d, o.n, k));
  for (std::size_t k = 1; k <= K; ++k) r.tv_distance += 0.5 * std::abs(static_cast<double>(counts[k]) / n - pmf[k]);

  std::vector<std::pair<double, double>> cells;  // (observed, expected)
  double obs = 0, expd = 0;
  for (std::size_t k = 1; k <= K; ++k) {
    obs += static_cast<double>(counts[k]);
    expd += n * pmf[k];
    if (expd >= 5.0) {
      cells.emplace_back(obs, expd);
      obs = expd = 0;
    }
  }
  if (expd > 0 || obs > 0) {
    if (cells.empty()) cells.emplace_back(obs, expd);
    else cells.back().first += obs, cells.back().second += expd;
  }
  if (cells.size() >= 2) {
    for (const auto& [ob, ex] : cells) r.chi_square += (ob - ex) * (ob - ex) / ex;
    r.dof = cells.size() - 1;
    boost::math::chi_squared_distribution<double> chi(static_cast<double>(r.dof));
    r.p_value = boost::math::cdf(boost::math::complement(chi, r.chi_square));
  }
  return r;
}

inline MonteCarloReport montecarlo_ccdf(const MonteCarloOptions& o) { return compare_to_exact(o, montecarlo_counts(o)); }

}  // namespace sepflow
