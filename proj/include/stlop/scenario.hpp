#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stlop/control.hpp"
#include "stlop/oracle.hpp"
#include "stlop/reachability.hpp"

namespace stlop {

struct Scenario {
  std::string name = "custom";
  Dynamics1D dyn;
  PredicateMap predicates;
  std::string formula;
  double x0 = 0.0;
  std::vector<double> tau0;  // empty: midpoint of every slot domain
  ControllerConfig controller;
  GridSpec grid;         // t_horizon <= 0: taken from the formula
  double horizon = 0.0;  // simulation length; <= 0: formula horizon
  std::uint64_t seed = 0;
  bool emit_surfaces = false;

  std::string to_yaml() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& yaml_text);
Scenario preset(const std::string& name);
std::vector<std::string> preset_names();

// Formula parsed against the scenario predicates; throws ParseError.
Formula scenario_formula(const Scenario& sc);
// Checks labels, tau0 and horizon; fills defaults (tau0, grid horizon, norm-control bound).
Scenario resolved(const Scenario& sc, const Pipeline& pipe);

struct RunOptions {
  std::string out_dir;   // empty: no files
  std::string vf_cache;  // empty: no cache
  int jobs = 1;
  double eps_disc = 0.05;
};

struct VfSet {
  std::vector<ValueFunction> unique;  // one per distinct (label, sign)
  std::vector<int> of_leaf;
  int cache_hits = 0;
  double seconds = 0.0;

  std::vector<const ValueFunction*> per_leaf() const;
};

VfSet solve_value_functions(const Scenario& sc, const Pipeline& pipe, const RunOptions& opt);

struct RunResult {
  Scenario scenario;  // resolved
  Trace trace;
  double robustness = 0.0;
  bool robustness_ok = false;  // false when the oracle could not evaluate
  std::string oracle_error;
  Verdict verdict = Verdict::Unsat;
  bool tau_contained = true;
  double max_tau_excursion = 0.0;
  double sim_seconds = 0.0;
  double vf_seconds = 0.0;
  // (repetition index, leaf label) for every disjunct that discharged its
  // disjunction; empty for formulas without one
  std::vector<std::pair<int, std::string>> discharges;

  bool success() const { return !trace.aborted && robustness_ok && verdict == Verdict::Sat; }
};

RunResult run_scenario(const Scenario& sc, const RunOptions& opt);
void write_summary(const RunResult& r, const std::string& path);

// Value-function surface and the G[1,3] operator surface as long-format CSVs.
void write_surfaces(const Scenario& sc, const VfSet& vfs, const std::string& dir);

// Trees, sigma, layout and operator stacks as text.
std::string explain(const Formula& f);

}  // namespace stlop
