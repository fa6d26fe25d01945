// Samples one pair, runs the four synthesizers and prints what each needs.
//   classify_demo [d] [N] [seed]

#include <cstdlib>
#include <iostream>

#include "sepflow/sepflow.hpp"

int main(int argc, char** argv) {
  using namespace sepflow;
  const std::size_t d = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2;
  const std::size_t n = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 10;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 7;

  const auto pair = sample_pair(d, n, n, seed);
  const auto zp = z_perp(pair);
  std::cout << "d=" << d << " N=" << n << " seed=" << seed << "  Z_perp=" << zp.value << " on axis " << zp.axis + 1
            << "\n";
  for (auto algo : {Algorithm::canonical, Algorithm::truncated, Algorithm::fem, Algorithm::relu_decomposed}) {
    const auto sch = synthesize(pair, algo, std::nullopt, ClusterColor::automatic);
    const auto res = certify(pair, sch);
    std::cout << "  " << to_string(algo) << ": M=" << sch.switches() << " classified=" << res.classified()
              << " blue moved " << res.max_blue_net_displacement << " (" << res.precision_bits << " bits)\n";
  }
}
