// sepflow command-line tool. Each subcommand reads/writes the shared JSON
// and CSV formats and defers all numerics to the library.
//
// Exit codes: 0 success, 2 validation failure, 3 IO or format error.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sepflow/sepflow.hpp"

using namespace sepflow;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitFormat = 3;

// Raised after a report has been printed, when the command's gate failed.
struct GateFailure {};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_text_file(path, text);
}

LabeledPair load_pair(const std::string& path) { return pair_from_json(read_json_file(path)); }

SamplingLaw parse_law(const std::string& s) {
  if (s == "uniform") return SamplingLaw::uniform_cube;
  if (s == "gaussian") return SamplingLaw::isotropic_gaussian;
  throw ValidationError("unknown law '" + s + "'");
}

ClusterColor parse_color(const std::string& s) {
  if (s == "auto") return ClusterColor::automatic;
  if (s == "red") return ClusterColor::red;
  if (s == "blue") return ClusterColor::blue;
  throw ValidationError("unknown color '" + s + "'");
}

std::string yes(bool b) { return b ? "true" : "false"; }

void print_genericity(const GenericityReport& g) {
  std::cout << "distinct_coordinates: " << yes(g.distinct_coords) << "\n"
            << "general_position: " << yes(g.general_position) << (g.exhaustive ? "" : " (spot-checked)") << "\n";
  auto witness = [](const char* name, const std::optional<std::vector<std::size_t>>& w) {
    if (!w) return;
    std::cout << name << ":";
    for (auto i : *w) std::cout << " " << i;
    std::cout << "\n";
  };
  witness("coords_witness", g.coords_witness);
  witness("position_witness", g.position_witness);
}

// Optional target axis: CLI11 stores -1 for "not given".
std::optional<std::size_t> axis_arg(long v) {
  if (v < 0) return std::nullopt;
  return static_cast<std::size_t>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Canonical separability laws and neural-ODE control synthesis"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML file");
  std::string save_config;
  app.add_option("--save-config", save_config, "Write the effective options to a TOML file and continue");
  std::function<void()> run;

  std::uint64_t seed = 1;
  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", seed, "RNG seed")->envname("SEPFLOW_SEED")->capture_default_str();
  };

  // generate
  std::size_t g_d = 2, g_n = 10;
  std::optional<std::size_t> g_nr, g_nb;
  std::string g_law = "uniform", g_out;
  bool g_allow = false;
  auto* gen = app.add_subcommand("generate", "Sample a labeled pair in the unit cube");
  gen->add_option("-d,--dim", g_d, "Dimension")->capture_default_str();
  gen->add_option("-n,-N,--points", g_n, "Points per color")->capture_default_str();
  gen->add_option("--n-red", g_nr, "Red count (overrides -n)");
  gen->add_option("--n-blue", g_nb, "Blue count (overrides -n)");
  gen->add_option("--law", g_law, "uniform | gaussian")->capture_default_str();
  gen->add_flag("--allow-degenerate", g_allow, "Emit even if genericity fails");
  gen->add_option("-o,--output", g_out, "Output JSON (stdout if omitted)");
  add_seed(gen);
  gen->callback([&] {
    run = [&] {
      const auto pair = sample_pair(g_d, g_nr.value_or(g_n), g_nb.value_or(g_n), seed, parse_law(g_law));
      const auto g = check_genericity(pair);
      if (!(g.distinct_coords && g.general_position) && !g_allow) {
        print_genericity(g);
        throw ValidationError("sample is not generic (pass --allow-degenerate to keep it)");
      }
      emit(g_out, to_text(to_json(pair)));
    };
  });

  // check
  std::string in_path;
  auto* chk = app.add_subcommand("check", "Genericity report for a dataset");
  chk->add_option("-i,--input", in_path, "Dataset JSON")->required();
  chk->callback([&] {
    run = [&] {
      const auto g = check_genericity(load_pair(in_path));
      print_genericity(g);
      if (!(g.distinct_coords && g.general_position)) throw GateFailure{};
    };
  });

  // separability
  std::string family_out;
  auto* sep = app.add_subcommand("separability", "Per-axis gap counts and the best axis");
  sep->add_option("-i,--input", in_path, "Dataset JSON")->required();
  sep->add_option("--emit-family", family_out, "Write the axis-aligned separating family");
  sep->callback([&] {
    run = [&] {
      const auto pair = load_pair(in_path);
      const auto best = z_perp(pair);
      for (std::size_t i = 0; i < pair.dim(); ++i)
        std::cout << "Z^" << (i + 1) << " = " << z_axis(pair, i) << (i == best.axis ? "  *" : "") << "\n";
      std::cout << "Z_perp = " << best.value << "\naxis = " << (best.axis + 1) << "\n";
      if (!family_out.empty()) write_text_file(family_out, to_text(to_json(axis_family(pair, best.axis))));
    };
  });

  // verify
  std::string family_in;
  auto* ver = app.add_subcommand("verify", "Check that a family strictly separates a dataset");
  ver->add_option("-i,--input", in_path, "Dataset JSON")->required();
  ver->add_option("-f,--family", family_in, "Family JSON")->required();
  ver->callback([&] {
    run = [&] {
      const auto pair = load_pair(in_path);
      const auto fam = family_from_json(read_json_file(family_in), pair.dim());
      const bool ok = verify_family(pair, fam);
      std::cout << "planes: " << fam.planes.size() << "\nverified: " << yes(ok) << "\n";
    };
  });

  // pmf
  std::size_t p_n = 2;
  std::string fmt = "csv", out_path;
  bool p_oracle = false;
  auto* pmf = app.add_subcommand("pmf", "Exact law of the one-dimensional gap count");
  pmf->add_option("-N,--points", p_n, "Points per color")->capture_default_str();
  pmf->add_option("--format", fmt, "csv | json")->capture_default_str();
  pmf->add_flag("--oracle", p_oracle, "Cross-check against brute-force enumeration (N <= 12)");
  pmf->add_option("-o,--output", out_path, "Output file (stdout if omitted)");
  pmf->callback([&] {
    run = [&] {
      const auto law = pmf_z1(p_n);
      if (p_oracle) {
        const auto ref = pmf_z1_oracle(p_n);
        for (std::size_t k = 1; k <= law.max_k(); ++k)
          if (law.mass(k) != ref.mass(k)) {
            std::cerr << "mismatch at k=" << k << ": " << to_string(law.mass(k)) << " vs " << to_string(ref.mass(k)) << "\n";
            throw GateFailure{};
          }
        std::cerr << "oracle: match\n";
      }
      if (fmt == "json") emit(out_path, to_text(pmf_json(law)));
      else if (fmt == "csv") emit(out_path, pmf_csv(law));
      else throw ValidationError("unknown format '" + fmt + "'");
    };
  });

  // ccdf
  std::size_t c_d = 1, c_n = 2;
  bool c_fig4 = false, c_exact = false;
  std::vector<std::size_t> c_dims = kFig4Dims;
  auto* cc = app.add_subcommand("ccdf", "Exact CCDF of the best-axis gap count, or the lower-bound curves");
  cc->add_option("-d,--dim", c_d, "Dimension")->capture_default_str();
  cc->add_option("-N,--points", c_n, "Points per color")->capture_default_str();
  cc->add_flag("--fig4", c_fig4, "Emit 1 - P(Z_perp >= k+1) for every dimension in --dims");
  cc->add_option("--dims", c_dims, "Dimensions of the lower-bound curves")->delimiter(',');
  cc->add_flag("--exact", c_exact, "Add the exact rational column to --fig4 output");
  cc->add_option("-o,--output", out_path, "Output CSV (stdout if omitted)");
  cc->callback([&] {
    run = [&] {
      if (c_fig4) emit(out_path, fig4_csv(fig4_lower_bound_table(c_n, c_dims), c_exact));
      else emit(out_path, ccdf_csv(c_d, c_n));
    };
  });

  // montecarlo
  MonteCarloOptions mc;
  std::string mc_stat = "zperp";
  double mc_zmax = 4.0, mc_pmin = 1e-3;
  auto* mcc = app.add_subcommand("montecarlo", "Empirical law vs the exact CCDF");
  mcc->add_option("-d,--dim", mc.d, "Dimension")->capture_default_str();
  mcc->add_option("-N,--points", mc.n, "Points per color")->capture_default_str();
  mcc->add_option("--samples", mc.samples, "Number of pairs")->capture_default_str();
  mcc->add_option("--workers", mc.workers, "Worker threads")->capture_default_str();
  mcc->add_option("--block-size", mc.block_size, "Samples per seeded block")->capture_default_str();
  mcc->add_option("--statistic", mc_stat, "zperp | canonical-switches")->capture_default_str();
  mcc->add_option("--max-z", mc_zmax, "Gate on max |z|")->capture_default_str();
  mcc->add_option("--min-p", mc_pmin, "Gate on the chi-square p-value")->capture_default_str();
  add_seed(mcc);
  mcc->callback([&] {
    run = [&] {
      mc.seed = seed;
      if (mc_stat == "zperp") mc.statistic = Statistic::z_perp;
      else if (mc_stat == "canonical-switches") mc.statistic = Statistic::canonical_switches;
      else throw ValidationError("unknown statistic '" + mc_stat + "'");
      const auto r = montecarlo_ccdf(mc);
      std::cout << "k,count,empirical_ccdf,exact_ccdf,std_error,z\n" << std::setprecision(6);
      for (std::size_t k = 1; k < r.counts.size(); ++k)
        std::cout << k << "," << r.counts[k] << "," << r.empirical_ccdf[k] << "," << r.exact_ccdf[k] << ","
                  << r.std_error[k] << "," << r.z_score[k] << "\n";
      std::cout << "max_abs_z: " << r.max_abs_z << "\nchi_square: " << r.chi_square << " (dof " << r.dof << ")\n"
                << "p_value: " << r.p_value << "\ntv_distance: " << r.tv_distance << "\n";
      const bool ok = r.max_abs_z < mc_zmax && r.p_value > mc_pmin;
      std::cout << "agreement: " << yes(ok) << "\n";
      if (!ok) throw GateFailure{};
    };
  });

  // cluster
  long target = -1;
  std::string color = "auto";
  auto* cl = app.add_subcommand("cluster", "Linear components of one color");
  cl->add_option("-i,--input", in_path, "Dataset JSON")->required();
  cl->add_option("--target", target, "Target axis, 0-based")->capture_default_str();
  cl->add_option("--color", color, "auto | red | blue")->capture_default_str();
  cl->add_option("-o,--output", out_path, "Output JSON (stdout if omitted)");
  cl->callback([&] {
    run = [&] {
      const auto pair = load_pair(in_path);
      const auto fam = linear_components(pair, axis_arg(target).value_or(0), parse_color(color));
      std::cerr << "clusters: " << fam.clusters.size() << " (" << to_string(fam.color) << ")\n";
      emit(out_path, to_text(to_json(fam)));
    };
  });

  // synthesize
  std::string algo = "canonical";
  auto* syn = app.add_subcommand("synthesize", "Build a classifying control schedule");
  syn->add_option("-i,--input", in_path, "Dataset JSON")->required();
  syn->add_option("--algo", algo, "canonical | truncated | fem | relu-decomposed")->capture_default_str();
  syn->add_option("--target", target, "Target axis, 0-based (default: automatic)");
  syn->add_option("--color", color, "Clustered color: auto | red | blue")->capture_default_str();
  syn->add_option("-o,--output", out_path, "Schedule JSON");
  syn->callback([&] {
    run = [&] {
      const auto pair = load_pair(in_path);
      const auto sch = synthesize(pair, parse_algorithm(algo), axis_arg(target), parse_color(color));
      if (!out_path.empty()) write_text_file(out_path, to_text(to_json(sch)));
      std::cout << "switches: " << sch.switches() << "\n";
    };
  });

  // simulate
  std::string sched_in, mode = "exact", traj_out;
  double step = 1e-4;
  std::size_t traj_samples = 20;
  auto* sim = app.add_subcommand("simulate", "Flow a dataset through a schedule and certify the result");
  sim->add_option("-i,--input", in_path, "Dataset JSON")->required();
  sim->add_option("-s,--schedule", sched_in, "Schedule JSON")->required();
  sim->add_option("--mode", mode, "exact | rk4")->capture_default_str();
  sim->add_option("--step", step, "RK4 step")->capture_default_str();
  sim->add_option("--trajectories", traj_out, "Write sampled trajectories as CSV");
  sim->add_option("--samples-per-leg", traj_samples, "Trajectory samples per leg")->capture_default_str();
  sim->add_option("-o,--output", out_path, "Result JSON");
  sim->callback([&] {
    run = [&] {
      const auto pair = load_pair(in_path);
      const auto sch = schedule_from_json(read_json_file(sched_in));
      CertifyOptions opt;
      if (mode == "rk4") opt.mode = FlowMode::rk4;
      else if (mode != "exact") throw ValidationError("unknown mode '" + mode + "'");
      opt.step = step;
      const auto r = certify(pair, sch, opt);
      std::cout << "classified: " << yes(r.classified()) << "\n"
                << "red_in_TR: " << yes(r.red_in_TR) << "\nblue_in_TB: " << yes(r.blue_in_TB) << "\n"
                << "max_blue_net_displacement: " << r.max_blue_net_displacement << "\n"
                << "min_margin_to_threshold: " << r.min_margin_to_threshold << "\n";
      if (opt.mode == FlowMode::exact) {
        std::cout << "precision_bits: " << r.precision_bits << "\n";
      } else {
        const auto ref = certify(pair, sch);
        double dev = 0;
        for (std::size_t i = 0; i < r.finals.size(); ++i)
          dev = std::max(dev, (r.finals[i] - ref.finals[i]).cwiseAbs().maxCoeff());
        std::cout << "max_deviation_vs_exact: " << dev << "\n";
      }
      if (!out_path.empty()) write_text_file(out_path, to_text(to_json(r, pair.reds().size())));
      if (!traj_out.empty()) {
        std::ostringstream os;
        write_trajectories(os, all_points(pair), sch, traj_samples);
        write_text_file(traj_out, os.str());
      }
      if (!r.classified()) throw GateFailure{};
    };
  });

  // report
  auto* rep = app.add_subcommand("report", "Separability, clustering and all four syntheses for one dataset");
  rep->add_option("-i,--input", in_path, "Dataset JSON")->required();
  rep->callback([&] {
    run = [&] {
      const auto pair = load_pair(in_path);
      std::cout << "dim: " << pair.dim() << "\nreds: " << pair.reds().size() << "\nblues: " << pair.blues().size()
                << "\n";
      const auto g = check_genericity(pair);
      print_genericity(g);
      const auto best = z_perp(pair);
      std::cout << "Z_perp: " << best.value << " (axis " << (best.axis + 1) << ")\n";
      if (best.value > 1)
        std::cout << "P(Z_perp >= " << best.value << "): " << to_double(ccdf_zperp(pair.dim(), pair.reds().size(), best.value))
                  << "\n";
      bool ok = true;
      for (auto a : {Algorithm::canonical, Algorithm::truncated, Algorithm::fem, Algorithm::relu_decomposed}) {
        try {
          const auto sch = synthesize(pair, a, std::nullopt, ClusterColor::automatic);
          const auto r = certify(pair, sch);
          const auto tv = tv_report(sch, pair.dim());
          std::cout << to_string(a) << ": switches " << sch.switches() << ", classified " << yes(r.classified())
                    << ", tv " << tv.value << " (bound " << tv.bound << ")\n";
          ok = ok && r.classified();
        } catch (const ValidationError& e) {
          std::cout << to_string(a) << ": " << e.what() << "\n";
          ok = false;
        }
      }
      if (!ok) throw GateFailure{};
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    // Only the selected subcommand: sections for the others would select them on reload.
    if (!save_config.empty()) {
      const auto* sub = app.get_subcommands().front();
      write_text_file(save_config, "[" + sub->get_name() + "]\n" + sub->config_to_str(true, true));
    }
    run();
  } catch (const GateFailure&) {
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
