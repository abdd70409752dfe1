#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>

#include "stlop/scenario.hpp"

using namespace stlop;

namespace {

struct Common {
  std::string preset;
  std::string config;
  std::string out;
  std::string vf_cache;
  int jobs = 1;
  long long seed = -1;
};

Scenario load(const Common& c) {
  if (c.preset.empty() == c.config.empty()) throw ConfigError("give exactly one of --preset or --config");
  Scenario sc = c.preset.empty() ? load_scenario(c.config) : preset(c.preset);
  if (c.seed >= 0) sc.seed = static_cast<std::uint64_t>(c.seed);
  return sc;
}

void add_common(CLI::App* app, Common& c, bool outputs) {
  app->add_option("--preset", c.preset, "built-in scenario");
  app->add_option("--config", c.config, "scenario file (YAML)");
  app->add_option("--seed", c.seed, "seed recorded with the run");
  if (outputs) {
    app->add_option("--out", c.out, "output directory");
    app->add_option("--vf-cache", c.vf_cache, "value-function cache directory");
    app->add_option("--jobs", c.jobs, "parallel value-function solves")->check(CLI::PositiveNumber);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STL control synthesis with reachability-based operators"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only warnings and errors");

  Common run_c, vf_c, rob_c, ex_c;
  auto* run = app.add_subcommand("run", "simulate a scenario and check it with the robustness oracle");
  add_common(run, run_c, true);
  bool list = false;
  run->add_flag("--list-presets", list, "print the preset names and exit");

  auto* vf = app.add_subcommand("solve-vf", "solve (or load) the value functions of a scenario");
  add_common(vf, vf_c, true);

  auto* rob = app.add_subcommand("robustness", "robustness of a formula over a trace CSV");
  add_common(rob, rob_c, false);
  std::string trace_path, rob_formula;
  double rob_t = 0.0, eps_disc = 0.05;
  rob->add_option("--trace", trace_path, "CSV with columns t and x")->required();
  rob->add_option("--formula", rob_formula, "formula (default: the scenario's)");
  rob->add_option("--t", rob_t, "evaluation time");
  rob->add_option("--eps", eps_disc, "verdict margin");

  auto* ex = app.add_subcommand("explain", "print trees, layout and operator stacks of a formula");
  add_common(ex, ex_c, false);
  std::string ex_formula;
  ex->add_option("--formula", ex_formula, "formula (default: the scenario's)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (run->parsed()) {
      if (list) {
        for (const auto& n : preset_names()) std::cout << n << "\n";
        return 0;
      }
      const Scenario sc = load(run_c);
      RunOptions opt{run_c.out, run_c.vf_cache, run_c.jobs, 0.05};
      const RunResult r = run_scenario(sc, opt);
      std::printf("scenario: %s\n", r.scenario.name.c_str());
      std::printf("complete: %s (t=%.2f)\n", r.trace.complete ? "yes" : "no", r.trace.complete_time);
      if (r.trace.aborted) std::printf("aborted: %s\n", r.trace.diagnostic.c_str());
      if (r.robustness_ok)
        std::printf("robustness: %.6f (%s)\n", r.robustness, to_string(r.verdict));
      else
        std::printf("robustness: unavailable (%s)\n", r.oracle_error.c_str());
      std::printf("slack integral: %.3g, sigma integral: %.3g\n", r.trace.slack_integral, r.trace.sigma_integral);
      for (const auto& [j, label] : r.discharges) std::printf("repetition %d discharged by %s\n", j, label.c_str());
      return r.success() ? 0 : 1;
    }
    if (vf->parsed()) {
      const Scenario sc0 = load(vf_c);
      const Pipeline pipe = Pipeline::build(scenario_formula(sc0));
      const Scenario sc = resolved(sc0, pipe);
      RunOptions opt{vf_c.out, vf_c.vf_cache, vf_c.jobs, 0.05};
      const VfSet set = solve_value_functions(sc, pipe, opt);
      std::printf("value functions: %zu (%d from cache), horizon %.1f s, %.2f s\n", set.unique.size(), set.cache_hits,
                  sc.grid.t_horizon, set.seconds);
      if (!vf_c.out.empty()) {
        write_surfaces(sc, set, vf_c.out);
        std::printf("surfaces written to %s\n", vf_c.out.c_str());
      }
      return 0;
    }
    if (rob->parsed()) {
      const Scenario sc = load(rob_c);
      const Formula f = parse_formula(rob_formula.empty() ? sc.formula : rob_formula, sc.predicates);
      const SampledSignal sig = read_signal_csv(trace_path);
      const double rho = robustness(f, sc.predicates, sig, rob_t);
      std::printf("robustness: %.6f (%s)\n", rho, to_string(verdict_of(rho, eps_disc)));
      return 0;
    }
    if (ex->parsed()) {
      Formula f;
      if (!ex_formula.empty() && ex_c.preset.empty() && ex_c.config.empty()) {
        f = parse_formula(ex_formula);
      } else {
        const Scenario sc = load(ex_c);
        f = parse_formula(ex_formula.empty() ? sc.formula : ex_formula, sc.predicates);
      }
      std::cout << explain(f);
      return 0;
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error at %zu: %s\n", e.position(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
