#pragma once

// Exact laws of the canonical separability counts. Z_{1,N} is the number of
// color changes of a uniformly random balanced color sequence of length 2N;
// Z^perp_{d,N} is the minimum of d independent copies. Everything is carried
// as exact rationals; floating point appears only in the asymptotic forms and
// in to_double().

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "sepflow/error.hpp"

namespace sepflow {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline std::string to_string(const Rational& r) {
  return boost::multiprecision::numerator(r).str() + "/" + boost::multiprecision::denominator(r).str();
}

inline Rational parse_rational(const std::string& s) {
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(BigInt(s));
    BigInt num(s.substr(0, slash)), den(s.substr(slash + 1));
    if (den == 0) throw FormatError("zero denominator in '" + s + "'");
    return Rational(num, den);
  } catch (const std::runtime_error& e) {
    throw FormatError("bad rational '" + s + "': " + e.what());
  }
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// C(n, k); zero outside 0 <= k <= n.
inline BigInt binomial(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt c = 1;
  for (std::int64_t i = 0; i < k; ++i) {
    c *= n - i;
    c /= i + 1;
  }
  return c;
}

// Row n of Pascal's triangle.
inline std::vector<BigInt> binomial_row(std::int64_t n) {
  std::vector<BigInt> row(static_cast<std::size_t>(n + 1));
  row[0] = 1;
  for (std::int64_t k = 1; k <= n; ++k) row[static_cast<std::size_t>(k)] = row[static_cast<std::size_t>(k - 1)] * (n - k + 1) / k;
  return row;
}

// Probability mass of Z_{1,N} on k = 1, ..., 2N-1.
class Pmf1D {
 public:
  Pmf1D(std::size_t n, std::vector<Rational> masses) : n_(n), masses_(std::move(masses)) {
    if (masses_.size() != 2 * n_ - 1) throw std::invalid_argument("support must be 1..2N-1");
  }
  std::size_t n() const { return n_; }
  std::size_t max_k() const { return 2 * n_ - 1; }
  const Rational& mass(std::size_t k) const {
    if (k < 1 || k > max_k()) throw std::out_of_range("k outside 1..2N-1");
    return masses_[k - 1];
  }
  Rational total() const {
    Rational s = 0;
    for (const auto& m : masses_) s += m;
    return s;
  }
  friend bool operator==(const Pmf1D& a, const Pmf1D& b) { return a.n_ == b.n_ && a.masses_ == b.masses_; }

 private:
  std::size_t n_;
  std::vector<Rational> masses_;
};

inline void require_n(std::size_t n) {
  if (n == 0) throw ValidationError("N must be positive");
}

// Closed form: P(Z=2p-1) = 2 C(N-1,p-1)^2 / C(2N,N), P(Z=2p) = 2 C(N-1,p) C(N-1,p-1) / C(2N,N).
inline Pmf1D pmf_z1(std::size_t n) {
  require_n(n);
  const auto N = static_cast<std::int64_t>(n);
  const auto row = binomial_row(N - 1);
  auto c = [&](std::int64_t j) -> BigInt { return (j < 0 || j > N - 1) ? BigInt(0) : row[static_cast<std::size_t>(j)]; };
  const BigInt total = binomial(2 * N, N);
  std::vector<Rational> m;
  m.reserve(2 * n - 1);
  for (std::int64_t k = 1; k <= 2 * N - 1; ++k) {
    const std::int64_t p = (k + 1) / 2;
    const BigInt ways = (k % 2 == 1) ? 2 * c(p - 1) * c(p - 1) : 2 * c(p) * c(p - 1);
    m.emplace_back(ways, total);
  }
  return Pmf1D(n, std::move(m));
}

inline constexpr std::size_t kOracleMaxN = 12;

// Brute force: every balanced color sequence of length 2N, counting adjacent
// color changes.
inline Pmf1D pmf_z1_oracle(std::size_t n) {
  require_n(n);
  if (n > kOracleMaxN) throw ValidationError("oracle limited to N <= 12");
  const unsigned len = static_cast<unsigned>(2 * n);
  const std::uint32_t adjacent_mask = (len >= 2) ? ((1u << (len - 1)) - 1u) : 0u;
  std::vector<std::uint64_t> counts(2 * n, 0);
  std::uint64_t sequences = 0;
  // Gosper's hack: all len-bit words with exactly n ones, in increasing order.
  std::uint32_t word = (1u << n) - 1u;
  const std::uint32_t limit = 1u << len;
  while (word < limit) {
    const auto changes = static_cast<std::size_t>(__builtin_popcount((word ^ (word >> 1)) & adjacent_mask));
    ++counts[changes];
    ++sequences;
    const std::uint32_t lowest = word & (~word + 1u);
    const std::uint32_t ripple = word + lowest;
    word = (((ripple ^ word) >> 2) / lowest) | ripple;
  }
  if (counts[0] != 0) throw std::logic_error("balanced sequence without a color change");
  std::vector<Rational> m;
  for (std::size_t k = 1; k <= 2 * n - 1; ++k) m.emplace_back(BigInt(counts[k]), BigInt(sequences));
  return Pmf1D(n, std::move(m));
}

// Hypergeometric mass H(x; M, K, n) = C(K,x) C(M-K,n-x) / C(M,n).
inline Rational hypergeometric(std::int64_t x, std::int64_t M, std::int64_t K, std::int64_t n) {
  if (M < 0 || K < 0 || n < 0 || K > M || n > M) throw ValidationError("invalid hypergeometric parameters");
  return Rational(binomial(K, x) * binomial(M - K, n - x), binomial(M, n));
}

// P(Z_{1,N}=k) through the hypergeometric law: with p = ceil(k/2),
//   odd k:  N/(2N-1)     * H(p-1; 2N-2, N-1, N-1)
//   even k: (N-1)/(2N-1) * H(p-1; 2N-2, N-1, N-2)
inline Rational pmf_z1_hypergeometric(std::size_t n, std::size_t k) {
  require_n(n);
  if (k < 1 || k > 2 * n - 1) throw ValidationError("k outside 1..2N-1");
  const auto N = static_cast<std::int64_t>(n);
  const auto p = static_cast<std::int64_t>((k + 1) / 2);
  if (k % 2 == 1) return Rational(N, 2 * N - 1) * hypergeometric(p - 1, 2 * N - 2, N - 1, N - 1);
  return Rational(N - 1, 2 * N - 1) * hypergeometric(p - 1, 2 * N - 2, N - 1, N - 2);
}

inline Rational pow(const Rational& base, std::size_t e) {
  Rational r = 1, b = base;
  while (e) {
    if (e & 1u) r *= b;
    b *= b;
    e >>= 1u;
  }
  return r;
}

// P(Z_{1,N} >= k) from the two partial sums of the closed form.
inline Rational ccdf_z1(std::size_t n, std::size_t k) {
  require_n(n);
  if (k < 1 || k > 2 * n - 1) throw ValidationError("k outside 1..2N-1");
  const auto N = static_cast<std::int64_t>(n);
  const auto K = static_cast<std::int64_t>(k);
  const auto row = binomial_row(N - 1);
  auto c = [&](std::int64_t j) -> BigInt { return (j < 0 || j > N - 1) ? BigInt(0) : row[static_cast<std::size_t>(j)]; };
  BigInt odd = 0, even = 0;
  for (std::int64_t p = (K + 2) / 2; p <= N; ++p) odd += c(p - 1) * c(p - 1);      // p >= ceil((k+1)/2)
  for (std::int64_t p = (K + 1) / 2; p <= N - 1; ++p) even += c(p) * c(p - 1);     // p >= ceil(k/2)
  return Rational(2 * (odd + even), binomial(2 * N, N));
}

// P(Z^perp_{d,N} >= k) = P(Z_{1,N} >= k)^d.
inline Rational ccdf_zperp(std::size_t d, std::size_t n, std::size_t k) {
  if (d == 0) throw ValidationError("d must be positive");
  return pow(ccdf_z1(n, k), d);
}

// P(Z^perp_{d,N} = k) for k = 1..2N-1.
inline Rational pmf_zperp(std::size_t d, std::size_t n, std::size_t k) {
  const Rational upper = (k == 2 * n - 1) ? Rational(0) : ccdf_zperp(d, n, k + 1);
  return ccdf_zperp(d, n, k) - upper;
}

// P(Z^perp_{d,N} > 1) = (1 - 2/C(2N,N))^d.
inline Rational p_not_linearly_separable(std::size_t d, std::size_t n) {
  require_n(n);
  const auto N = static_cast<std::int64_t>(n);
  return pow(Rational(1) - Rational(BigInt(2), binomial(2 * N, N)), d);
}

// P(Z^perp_{d,N} = 2N-1) = 2^d C(2N,N)^{-d}.
inline Rational p_fully_interspersed(std::size_t d, std::size_t n) {
  require_n(n);
  const auto N = static_cast<std::int64_t>(n);
  return pow(Rational(BigInt(2), binomial(2 * N, N)), d);
}

// log(sqrt(pi N) / 2^(2N-1)), the Stirling form of log P(Z_{1,N} = 1).
inline double log_stirling_endpoint(std::size_t n) {
  const double N = static_cast<double>(n);
  return 0.5 * std::log(M_PI * N) - (2.0 * N - 1.0) * std::log(2.0);
}

// exp(-d sqrt(pi N) / 2^(2N-1)) ~ P(Z^perp > 1).
inline double asymptotic_p_not_linsep(std::size_t d, std::size_t n) {
  require_n(n);
  return std::exp(-static_cast<double>(d) * std::exp(log_stirling_endpoint(n)));
}

// (sqrt(pi N) / 2^(2N-1))^d ~ P(Z^perp = 2N-1).
inline double asymptotic_p_max(std::size_t d, std::size_t n) {
  require_n(n);
  return std::exp(static_cast<double>(d) * log_stirling_endpoint(n));
}

struct LowerBoundRow {
  std::size_t n, d, k;
  Rational lower_bound;  // 1 - P(Z^perp_{d,N} >= k+1) <= P(Z_{d,N} <= k)
};

// Default dimensions of the reproduced lower-bound curves.
inline const std::vector<std::size_t> kFig4Dims{1, 2, 4, 8, 16};

inline std::vector<LowerBoundRow> fig4_lower_bound_table(std::size_t n, const std::vector<std::size_t>& dims) {
  require_n(n);
  std::vector<LowerBoundRow> rows;
  for (std::size_t d : dims) {
    if (d == 0) throw ValidationError("d must be positive");
    for (std::size_t k = 1; k <= 2 * n - 1; ++k) {
      const Rational tail = (k + 1 <= 2 * n - 1) ? ccdf_zperp(d, n, k + 1) : Rational(0);
      rows.push_back({n, d, k, Rational(1) - tail});
    }
  }
  return rows;
}

}  // namespace sepflow
