// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            every criterion
//   acceptance 1 5 9      a subset (9, 10 and 13 share one synthesis sweep)
// Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "sepflow/sepflow.hpp"

using namespace sepflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

BigInt factorial(std::int64_t n) {
  BigInt f = 1;
  for (std::int64_t i = 2; i <= n; ++i) f *= i;
  return f;
}

Outcome c1() {
  const auto t0 = Clock::now();
  for (std::size_t n = 1; n <= 10; ++n)
    if (!(pmf_z1(n) == pmf_z1_oracle(n))) return {false, "mismatch at N=" + std::to_string(n)};
  const double s = seconds_since(t0);
  return {s < 10.0, "N=1..10 exact match in " + std::to_string(s) + " s"};
}

Outcome c2() {
  for (std::size_t n = 1; n <= 500; ++n)
    if (pmf_z1(n).total() != 1) return {false, "total != 1 at N=" + std::to_string(n)};
  return {true, "sum of masses is exactly 1 for N=1..500"};
}

Outcome c3() {
  for (std::int64_t n = 1; n <= 100; ++n) {
    const BigInt fn = factorial(n);
    const Rational want(2 * fn * fn, factorial(2 * n));
    const auto law = pmf_z1(static_cast<std::size_t>(n));
    if (law.mass(1) != want || law.mass(law.max_k()) != want) return {false, "endpoint mismatch at N=" + std::to_string(n)};
  }
  return {true, "P(1) = P(2N-1) = 2(N!)^2/(2N)! for N=1..100"};
}

Outcome c4() {
  std::size_t cells = 0;
  for (std::size_t n = 1; n <= 30; ++n) {
    const auto law = pmf_z1(n);
    for (std::size_t k = 1; k <= law.max_k(); ++k, ++cells)
      if (pmf_z1_hypergeometric(n, k) != law.mass(k))
        return {false, "N=" + std::to_string(n) + " k=" + std::to_string(k)};
  }
  return {true, std::to_string(cells) + " (N,k) cells identical for N<=30"};
}

Outcome c5() {
  for (std::size_t n = 2; n <= 20; ++n) {
    // Tail sums of the one-dimensional law, built here from the PMF.
    const auto law = pmf_z1(n);
    std::vector<Rational> tail(2 * n + 1, Rational(0));
    for (std::size_t k = 2 * n - 1; k >= 1; --k) tail[k] = tail[k + 1] + law.mass(k);
    const BigInt c = binomial(2 * static_cast<std::int64_t>(n), static_cast<std::int64_t>(n));
    for (std::size_t d = 1; d <= 16; ++d) {
      for (std::size_t k = 1; k <= 2 * n - 1; ++k) {
        Rational p = 1;
        for (std::size_t i = 0; i < d; ++i) p *= tail[k];
        if (ccdf_zperp(d, n, k) != p || ccdf_zperp(d, n, k) != pow(ccdf_zperp(1, n, k), d))
          return {false, "power law fails at d=" + std::to_string(d) + " N=" + std::to_string(n)};
      }
      BigInt num = 1, den = 1;
      for (std::size_t i = 0; i < d; ++i) num *= 2, den *= c;
      if (ccdf_zperp(d, n, 2 * n - 1) != Rational(num, den))
        return {false, "endpoint fails at d=" + std::to_string(d) + " N=" + std::to_string(n)};
    }
  }
  return {true, "d=1..16, N=2..20 exact"};
}

Outcome c6() {
  const auto t0 = Clock::now();
  const std::pair<std::size_t, std::size_t> cfg[] = {{1, 5}, {2, 5}, {2, 10}, {4, 10}, {8, 10}};
  std::ostringstream os;
  bool ok = true;
  std::uint64_t seed = 20240601;
  for (auto [d, n] : cfg) {
    MonteCarloOptions o;
    o.d = d, o.n = n, o.samples = 100000, o.seed = seed++;
    const auto r = montecarlo_ccdf(o);
    ok = ok && r.max_abs_z < 4.0 && r.p_value > 1e-3;
    char buf[128];
    std::snprintf(buf, sizeof buf, " (%zu,%zu): max|z|=%.2f p=%.3f;", d, n, r.max_abs_z, r.p_value);
    os << buf;
  }
  const double s = seconds_since(t0);
  os << " " << s << " s";
  return {ok && s < 120.0, os.str()};
}

Outcome c7() {
  double prev = HUGE_VAL, at50 = 0;
  for (std::int64_t n = 5; n <= 60; ++n) {
    const BigInt fn = factorial(n);
    const Rational exact(2 * fn * fn, factorial(2 * n));
    const double approx = std::exp(log_stirling_endpoint(static_cast<std::size_t>(n)));
    const double rel = std::abs(approx - to_double(exact)) / to_double(exact);
    if (!(rel < prev)) return {false, "not decreasing at N=" + std::to_string(n)};
    prev = rel;
    if (n == 50) at50 = rel;
  }
  return {at50 < 0.01, "strictly decreasing on 5..60, " + std::to_string(100 * at50) + "% at N=50"};
}

LabeledPair interspersed_line(std::size_t d, std::size_t n) {
  std::vector<Point> r, b;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(2 * n);
    Point p(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) p[static_cast<Eigen::Index>(k)] = 0.1 + 0.8 * t * (1.0 - 0.05 * static_cast<double>(k));
    (i % 2 == 0 ? r : b).push_back(p);
  }
  return LabeledPair(d, r, b);
}

Outcome c8() {
  std::size_t checked = 0;
  for (std::size_t d : {2u, 3u}) {
    const std::size_t n = 5;
    std::size_t found = 0;
    for (std::uint64_t s = 0; found < 200; ++s) {
      const auto p = sample_pair(d, n, n, 91000 + s);
      const auto g = check_genericity(p);
      if (!(g.distinct_coords && g.general_position)) continue;
      ++found;
      if (z_perp(p).value > 2 * n - 1) return {false, "z_perp above 2N-1"};
    }
    checked += found;
    const auto line = interspersed_line(d, n);
    if (!is_interspersed_collinear(line)) return {false, "construction is not interspersed"};
    for (std::size_t ax = 0; ax < d; ++ax)
      if (z_axis(line, ax) != 2 * n - 1) return {false, "interspersed line: z_axis != 2N-1"};
  }
  return {true, std::to_string(checked) + " generic pairs bounded; interspersed line gives 2N-1 on every axis"};
}

// Criteria 9, 10 and 13 share one sweep.
struct Sweep {
  bool classified = true, counts = true;
  std::map<std::string, double> worst_blue;      // by algorithm
  std::map<std::string, std::size_t> tv_fail;    // by algorithm
  std::map<std::string, double> tv_ratio;        // worst value / bound
  std::size_t schedules = 0;
  std::string first_problem;
  double seconds = 0;
};

const Sweep& sweep() {
  static const Sweep s = [] {
    Sweep w;
    const auto t0 = Clock::now();
    const std::pair<std::size_t, std::size_t> cfg[] = {{2, 10}, {3, 17}, {8, 64}, {10, 200}};
    for (auto [d, n] : cfg) {
      const std::size_t K = (n + d - 1) / d;
      for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto pair = sample_pair(d, n, n, 1000003 * d + seed);
        for (auto algo : {Algorithm::canonical, Algorithm::truncated, Algorithm::fem, Algorithm::relu_decomposed}) {
          const std::string name = to_string(algo);
          const auto sch = synthesize(pair, algo, std::nullopt, ClusterColor::automatic);
          ++w.schedules;
          std::size_t want = 0;
          switch (algo) {
            case Algorithm::canonical: want = z_perp(pair).value - 1; break;
            case Algorithm::truncated: want = 2 * K - 1; break;
            case Algorithm::fem: want = K - 1; break;
            case Algorithm::relu_decomposed: want = 4 * K - 2; break;
          }
          if (sch.switches() != want) {
            w.counts = false;
            if (w.first_problem.empty()) w.first_problem = name + " switch count";
          }
          const auto r = certify(pair, sch);
          if (!r.classified()) {
            w.classified = false;
            if (w.first_problem.empty())
              w.first_problem = name + " not classified (d=" + std::to_string(d) + ", seed " + std::to_string(seed) + ")";
          }
          if (algo != Algorithm::canonical) w.worst_blue[name] = std::max(w.worst_blue[name], r.max_blue_net_displacement);
          const auto tv = tv_report(sch, d);
          w.tv_fail[name] += !tv.holds;
          w.tv_ratio[name] = std::max(w.tv_ratio[name], tv.bound > 0 ? tv.value / tv.bound : (tv.value > 0 ? HUGE_VAL : 0.0));
        }
      }
    }
    w.seconds = seconds_since(t0);
    return w;
  }();
  return s;
}

Outcome c9() {
  const auto& s = sweep();
  std::ostringstream os;
  os << s.schedules << " schedules, " << s.seconds << " s";
  if (!s.first_problem.empty()) os << "; " << s.first_problem;
  return {s.classified && s.counts && s.seconds < 300.0, os.str()};
}

Outcome c10() {
  const auto& s = sweep();
  std::ostringstream os;
  bool ok = true;
  for (const auto& [name, v] : s.worst_blue) {
    os << " " << name << " max " << v << ";";
    ok = ok && v < 1e-9;
  }
  return {ok, os.str()};
}

Outcome c13() {
  const auto& s = sweep();
  std::ostringstream os;
  bool ok = true;
  for (const auto& [name, n] : s.tv_fail) {
    os << " " << name << " " << n << "/800 over bound (worst ratio " << s.tv_ratio.at(name) << ");";
    ok = ok && n == 0;
  }
  return {ok, os.str()};
}

// Random leg with a.w = 0 up to a few ulps.
ControlLeg random_leg(std::mt19937_64& rng, std::size_t d, Activation act, bool orthogonal) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  ControlLeg l;
  l.activation = act;
  l.a = Eigen::VectorXd(static_cast<Eigen::Index>(d));
  l.w = Eigen::VectorXd(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    l.a[static_cast<Eigen::Index>(k)] = g(rng);
    l.w[static_cast<Eigen::Index>(k)] = g(rng);
  }
  l.a *= (0.5 + 2.5 * u(rng)) / l.a.norm();
  if (orthogonal) l.w -= l.w.dot(l.a) / l.a.squaredNorm() * l.a;
  l.w.normalize();
  l.b = -2.0 + 4.0 * u(rng);
  l.tau = 0.1 + 1.9 * u(rng);
  return l;
}

Point random_point(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> u;
  Point p(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) p[static_cast<Eigen::Index>(k)] = u(rng);
  return p;
}

Outcome c11() {
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int j = 0; j < 100; ++j) {
    const std::size_t d = 2 + static_cast<std::size_t>(j % 5);
    const ControlLeg t = random_leg(rng, d, Activation::truncated, true);
    const ControlLeg r1{t.a, t.b, t.w, t.tau, Activation::relu};
    const ControlLeg r2{t.a, t.b - 1.0, -t.w, t.tau, Activation::relu};
    for (int i = 0; i < 1000; ++i) {
      const Point x = random_point(rng, d);
      worst = std::max(worst, (flow_leg_exact(x, t) - flow_leg_exact(flow_leg_exact(x, r1), r2)).cwiseAbs().maxCoeff());
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max deviation %.3e over 1e5 point/leg pairs", worst);
  return {worst <= 1e-12, buf};
}

Outcome c12() {
  std::mt19937_64 rng(12);
  double worst = 0;
  std::size_t coupled = 0;
  const Activation acts[] = {Activation::relu, Activation::truncated, Activation::fem};
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 2 + static_cast<std::size_t>(i % 4);
    const bool orth = i % 2 == 0;
    const ControlLeg l = random_leg(rng, d, acts[i % 3], orth);
    coupled += !orth;
    const Point x = random_point(rng, d);
    worst = std::max(worst, (flow_leg_rk4(x, l, 1e-4) - flow_leg_exact(x, l)).cwiseAbs().maxCoeff());
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max deviation %.3e over 1000 legs (%zu with a.w != 0)", worst, coupled);
  return {worst <= 1e-8, buf};
}

Outcome c14() {
  MonteCarloOptions o;
  o.d = 2, o.n = 5, o.samples = 10000, o.seed = 14, o.statistic = Statistic::canonical_switches;
  const auto r = montecarlo_ccdf(o);
  std::ostringstream os;
  os << "max |z| = " << r.max_abs_z << " over k=1..9";
  return {r.max_abs_z < 3.0, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> all{
      {1, {"exact PMF equals enumeration oracle", c1}},
      {2, {"PMF normalization", c2}},
      {3, {"endpoint law", c3}},
      {4, {"hypergeometric identity", c4}},
      {5, {"power law of the best-axis CCDF", c5}},
      {6, {"Monte Carlo agreement", c6}},
      {7, {"Stirling asymptotics", c7}},
      {8, {"maximum gap count", c8}},
      {9, {"end-to-end classification", c9}},
      {10, {"blue invariance", c10}},
      {11, {"ReLU decomposition equivalence", c11}},
      {12, {"exact vs RK4", c12}},
      {13, {"TV bound", c13}},
      {14, {"canonical switch law", c14}},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, entry] : all) {
    if (!pick.empty() && !pick.count(id)) continue;
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, entry.first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
