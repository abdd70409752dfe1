#include "stlop/scenario.hpp"

#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace stlop {

namespace fs = std::filesystem;

namespace {

const char* dyn_kind_name(Dynamics1D::Kind k) {
  switch (k) {
    case Dynamics1D::Kind::NonAffine:
      return "nonaffine";
    case Dynamics1D::Kind::Affine:
      return "affine";
    case Dynamics1D::Kind::Linear:
      return "linear";
  }
  return "?";
}

template <class T>
void read_opt(const YAML::Node& n, const char* key, T& out) {
  if (n && n[key]) {
    try {
      out = n[key].as<T>();
    } catch (const YAML::Exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const YAML::Node& n, std::initializer_list<const char*> keys, const std::string& where) {
  if (!n) return;
  if (!n.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
      throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

Scenario from_yaml(const YAML::Node& root) {
  if (!root || !root.IsMap()) throw ConfigError("config must be a mapping");
  reject_unknown(root,
                 {"name", "dynamics", "predicates", "formula", "initial", "controller", "u_ref", "grid", "horizon",
                  "seed", "emit_surfaces"},
                 "config");
  Scenario sc;
  read_opt(root, "name", sc.name);

  const auto d = root["dynamics"];
  if (!d) throw ConfigError("config needs a 'dynamics' section");
  reject_unknown(d, {"kind", "a", "b", "u_min", "u_max"}, "dynamics");
  std::string kind = "linear";
  read_opt(d, "kind", kind);
  double a = 2.0, b = 1.5, umin = -0.5, umax = 0.5;
  read_opt(d, "a", a);
  read_opt(d, "b", b);
  read_opt(d, "u_min", umin);
  read_opt(d, "u_max", umax);
  if (kind == "nonaffine")
    sc.dyn = Dynamics1D::non_affine(a, b, umin, umax);
  else if (kind == "affine")
    sc.dyn = Dynamics1D::affine(umin, umax);
  else if (kind == "linear")
    sc.dyn = Dynamics1D::linear(umin, umax);
  else
    throw ConfigError("unknown dynamics kind '" + kind + "'");

  const auto p = root["predicates"];
  if (!p || !p.IsMap() || p.size() == 0) throw ConfigError("config needs a non-empty 'predicates' mapping");
  for (const auto& kv : p) {
    const auto label = kv.first.as<std::string>();
    reject_unknown(kv.second, {"c", "r", "x0"}, "predicate " + label);
    BandPredicate bp;
    bp.label = label;
    read_opt(kv.second, "c", bp.c);
    read_opt(kv.second, "r", bp.r);
    read_opt(kv.second, "x0", bp.x0);
    if (!(bp.c > 0) || !(bp.r > 0)) throw ConfigError("predicate " + label + ": c and r must be positive");
    sc.predicates[label] = bp;
  }
  if (!root["formula"]) throw ConfigError("config needs a 'formula'");
  read_opt(root, "formula", sc.formula);

  const auto ini = root["initial"];
  reject_unknown(ini, {"x", "tau_hat"}, "initial");
  read_opt(ini, "x", sc.x0);
  read_opt(ini, "tau_hat", sc.tau0);

  const auto c = root["controller"];
  reject_unknown(c,
                 {"delta", "k", "kappa_hat", "k_omega", "dt", "slack_weight", "slack_max", "omega_max", "n_u",
                  "eps_sat", "max_dx"},
                 "controller");
  auto& cc = sc.controller;
  read_opt(c, "delta", cc.delta);
  read_opt(c, "k", cc.k);
  read_opt(c, "kappa_hat", cc.kappa_hat);
  read_opt(c, "k_omega", cc.k_omega);
  read_opt(c, "dt", cc.dt);
  read_opt(c, "slack_weight", cc.slack_weight);
  read_opt(c, "slack_max", cc.slack_max);
  read_opt(c, "omega_max", cc.omega_max);
  read_opt(c, "n_u", cc.n_u);
  read_opt(c, "eps_sat", cc.eps_sat);
  cc.max_dx = 0.0;
  read_opt(c, "max_dx", cc.max_dx);

  const auto u = root["u_ref"];
  reject_unknown(u, {"kind", "value", "amplitude", "frequency"}, "u_ref");
  if (u) {
    std::string uk = "zero";
    read_opt(u, "kind", uk);
    if (uk == "zero") {
      cc.u_ref = URef::zero();
    } else if (uk == "const") {
      double v = 0.0;
      read_opt(u, "value", v);
      cc.u_ref = URef::constant(v);
    } else if (uk == "sin") {
      double amp = 1.0, fr = 1.0;
      read_opt(u, "amplitude", amp);
      read_opt(u, "frequency", fr);
      cc.u_ref = URef::sine(amp, fr);
    } else {
      throw ConfigError("unknown u_ref kind '" + uk + "'");
    }
  }

  const auto g = root["grid"];
  reject_unknown(g, {"x_min", "x_max", "n_x", "t_horizon", "n_t", "dt_int"}, "grid");
  sc.grid.t_horizon = 0.0;
  read_opt(g, "x_min", sc.grid.x_min);
  read_opt(g, "x_max", sc.grid.x_max);
  read_opt(g, "n_x", sc.grid.n_x);
  read_opt(g, "t_horizon", sc.grid.t_horizon);
  read_opt(g, "n_t", sc.grid.n_t);
  read_opt(g, "dt_int", sc.grid.dt_int);
  if (!(sc.grid.x_max > sc.grid.x_min) || sc.grid.n_x < 2) throw ConfigError("grid: bad x range");

  read_opt(root, "horizon", sc.horizon);
  read_opt(root, "seed", sc.seed);
  read_opt(root, "emit_surfaces", sc.emit_surfaces);
  return sc;
}

Scenario base(const std::string& name, Dynamics1D dyn) {
  Scenario sc;
  sc.name = name;
  sc.dyn = dyn;
  sc.grid.t_horizon = 0.0;
  sc.controller.max_dx = 0.0;
  return sc;
}

BandPredicate band(const std::string& label, double c, double r, double x0) {
  BandPredicate p;
  p.label = label;
  p.c = c;
  p.r = r;
  p.x0 = x0;
  return p;
}

}  // namespace

std::string Scenario::to_yaml() const {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << name;
  e << YAML::Key << "dynamics" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << dyn_kind_name(dyn.kind);
  if (dyn.kind == Dynamics1D::Kind::NonAffine) {
    e << YAML::Key << "a" << YAML::Value << dyn.a;
    e << YAML::Key << "b" << YAML::Value << dyn.b;
  }
  e << YAML::Key << "u_min" << YAML::Value << dyn.u_min;
  e << YAML::Key << "u_max" << YAML::Value << dyn.u_max;
  e << YAML::EndMap;
  e << YAML::Key << "predicates" << YAML::Value << YAML::BeginMap;
  for (const auto& [label, p] : predicates) {
    e << YAML::Key << label << YAML::Value << YAML::Flow << YAML::BeginMap;
    e << YAML::Key << "c" << YAML::Value << p.c << YAML::Key << "r" << YAML::Value << p.r << YAML::Key << "x0"
      << YAML::Value << p.x0;
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  e << YAML::Key << "formula" << YAML::Value << YAML::DoubleQuoted << formula;
  e << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "x" << YAML::Value << x0;
  if (!tau0.empty()) e << YAML::Key << "tau_hat" << YAML::Value << YAML::Flow << tau0;
  e << YAML::EndMap;
  const auto& c = controller;
  e << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "delta" << YAML::Value << c.delta << YAML::Key << "k" << YAML::Value << c.k;
  e << YAML::Key << "kappa_hat" << YAML::Value << c.kappa_hat << YAML::Key << "k_omega" << YAML::Value << c.k_omega;
  e << YAML::Key << "dt" << YAML::Value << c.dt << YAML::Key << "slack_weight" << YAML::Value << c.slack_weight;
  e << YAML::Key << "slack_max" << YAML::Value << c.slack_max << YAML::Key << "omega_max" << YAML::Value
    << c.omega_max;
  e << YAML::Key << "n_u" << YAML::Value << c.n_u << YAML::Key << "eps_sat" << YAML::Value << c.eps_sat;
  e << YAML::Key << "max_dx" << YAML::Value << c.max_dx;
  e << YAML::EndMap;
  e << YAML::Key << "u_ref" << YAML::Value << YAML::BeginMap;
  switch (c.u_ref.kind) {
    case URef::Kind::Zero:
      e << YAML::Key << "kind" << YAML::Value << "zero";
      break;
    case URef::Kind::Const:
      e << YAML::Key << "kind" << YAML::Value << "const" << YAML::Key << "value" << YAML::Value << c.u_ref.value;
      break;
    case URef::Kind::Sin:
      e << YAML::Key << "kind" << YAML::Value << "sin" << YAML::Key << "amplitude" << YAML::Value << c.u_ref.amplitude
        << YAML::Key << "frequency" << YAML::Value << c.u_ref.frequency;
      break;
  }
  e << YAML::EndMap;
  e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "x_min" << YAML::Value << grid.x_min << YAML::Key << "x_max" << YAML::Value << grid.x_max;
  e << YAML::Key << "n_x" << YAML::Value << grid.n_x << YAML::Key << "t_horizon" << YAML::Value << grid.t_horizon;
  e << YAML::Key << "n_t" << YAML::Value << grid.n_t << YAML::Key << "dt_int" << YAML::Value << grid.dt_int;
  e << YAML::EndMap;
  e << YAML::Key << "horizon" << YAML::Value << horizon;
  e << YAML::Key << "seed" << YAML::Value << seed;
  if (emit_surfaces) e << YAML::Key << "emit_surfaces" << YAML::Value << true;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

Scenario parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  return from_yaml(root);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenario(ss.str());
}

std::vector<std::string> preset_names() {
  return {"nonaffine-case1", "nonaffine-case2-plus", "nonaffine-case2-minus", "nonaffine-case2-sin", "affine-case1",
          "affine-case2",    "affine-case2-b",       "linear",                "fig1"};
}

Scenario preset(const std::string& name) {
  const auto h1 = band("p1", 10, 0.25, 1.0);
  if (name == "nonaffine-case1") {
    Scenario sc = base(name, Dynamics1D::non_affine(2.0, 1.5));
    sc.predicates = {{"p1", h1}, {"p2", band("p2", 10, 0.25, 1.75)}};
    sc.formula = "G[0,25](F[3,4](p1 U[1,2] (F[1,2](p2))))";
    sc.x0 = 0.25;
    return sc;
  }
  if (name.rfind("nonaffine-case2", 0) == 0) {
    Scenario sc = base(name, Dynamics1D::non_affine(2.0, 1.5));
    sc.predicates = {{"p1", h1}, {"p2", band("p2", 10, 0.25, 1.75)}, {"p3", band("p3", 10, 0.2, 1.5)}};
    sc.formula = "G[0,25](F[3,4](p1 U[1,2] (F[1,2](p2 | G[0,1](p3)))))";
    sc.x0 = 0.25;
    // slower pull and a late start for the F[1,2] slot leave time to reach p2
    sc.controller.k_omega = 0.05;
    sc.tau0 = {0.5, 0.5, 1.0};
    if (name == "nonaffine-case2-plus")
      sc.controller.u_ref = URef::constant(1.0);
    else if (name == "nonaffine-case2-minus")
      sc.controller.u_ref = URef::constant(-1.0);
    else if (name == "nonaffine-case2-sin")
      sc.controller.u_ref = URef::sine(1.0, 0.5);
    else
      throw ConfigError("unknown preset '" + name + "'");
    return sc;
  }
  const PredicateMap affine_preds = {
      {"p1", h1}, {"p2", band("p2", 10, 0.25, 0.0)}, {"p3", band("p3", 10, 0.2, -0.75)}};
  const std::string psi1 = "G[0,25](F[3,4](p1 U[1,2] (F[1,2](p2))))";
  const std::string psi2 = "F[10,30](G[0,1](p3))";
  if (name == "affine-case1") {
    Scenario sc = base(name, Dynamics1D::affine());
    sc.predicates = affine_preds;
    sc.formula = psi1 + " & " + psi2;
    sc.x0 = 0.0;
    return sc;
  }
  if (name == "affine-case2" || name == "affine-case2-b") {
    Scenario sc = base(name, Dynamics1D::affine());
    sc.predicates = affine_preds;
    sc.formula = "G[0,100](F[1,3](" + psi1 + " & " + psi2 + "))";
    sc.x0 = name == "affine-case2" ? 0.0 : -1.0;
    return sc;
  }
  if (name == "linear") {
    Scenario sc = base(name, Dynamics1D::linear());
    sc.predicates = affine_preds;
    sc.formula = "G[0,15](F[3,4](p1 U[1,2] (F[1,2](p2)))) & " + psi2;
    sc.x0 = 0.0;
    return sc;
  }
  if (name == "fig1") {
    Scenario sc = base(name, Dynamics1D::non_affine(2.0, 1.5));
    sc.predicates = {{"p1", h1}};
    sc.formula = "G[1,3](p1)";
    sc.x0 = 1.0;
    sc.grid.t_horizon = 10.0;
    sc.emit_surfaces = true;
    return sc;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

Formula scenario_formula(const Scenario& sc) { return parse_formula(sc.formula, sc.predicates); }

Scenario resolved(const Scenario& sc, const Pipeline& pipe) {
  Scenario r = sc;
  for (const auto& l : pipe.logic.leaves)
    if (!sc.predicates.count(l.label)) throw ConfigError("formula label '" + l.label + "' is not declared");
  const int L = pipe.layout.n_independent();
  if (r.tau0.empty()) {
    for (int i = 0; i < L; ++i) r.tau0.push_back(0.5 * (pipe.layout.lb[i] + pipe.layout.ub[i]));
  }
  if (static_cast<int>(r.tau0.size()) != L)
    throw ConfigError("initial tau_hat needs " + std::to_string(L) + " entries");
  if (!pipe.layout.theta.contains(r.tau0, 1e-12)) throw ConfigError("initial tau_hat lies outside its domain");
  const double fh = formula_horizon(pipe.formula);
  if (r.horizon <= 0.0) r.horizon = fh;
  if (r.horizon < fh - 1e-9) throw ConfigError("horizon is shorter than the formula horizon");
  if (r.grid.t_horizon <= 0.0) r.grid.t_horizon = required_vf_horizon(pipe.logic);
  if (r.controller.max_dx <= 0.0) r.controller.max_dx = 0.5 * (r.grid.x_max - r.grid.x_min) / (r.grid.n_x - 1);
  r.dyn.validate();
  r.controller.validate();
  if (r.x0 < r.grid.x_min || r.x0 > r.grid.x_max) throw ConfigError("initial state outside the grid x-range");
  return r;
}

std::vector<const ValueFunction*> VfSet::per_leaf() const {
  std::vector<const ValueFunction*> out;
  for (int i : of_leaf) out.push_back(&unique.at(static_cast<std::size_t>(i)));
  return out;
}

VfSet solve_value_functions(const Scenario& sc, const Pipeline& pipe, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  VfSet set;
  std::vector<BandPredicate> preds;
  std::vector<std::string> keys;
  for (const auto& l : pipe.logic.leaves) {
    const std::string key = (l.negated ? "!" : "") + l.label;
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      BandPredicate p = sc.predicates.at(l.label);
      if (l.negated) p.negated = !p.negated;
      preds.push_back(p);
      set.of_leaf.push_back(static_cast<int>(keys.size()) - 1);
    } else {
      set.of_leaf.push_back(static_cast<int>(it - keys.begin()));
    }
  }
  set.unique.resize(preds.size());
  std::vector<char> hit(preds.size(), 0);
  auto path_for = [&](std::size_t i) {
    std::ostringstream os;
    os << std::hex << cache_key(sc.dyn, preds[i], sc.grid);
    return (fs::path(opt.vf_cache) / ("vf_" + os.str() + ".bin")).string();
  };
  if (!opt.vf_cache.empty()) fs::create_directories(opt.vf_cache);
  auto work = [&](std::size_t i) {
    const auto key = cache_key(sc.dyn, preds[i], sc.grid);
    if (!opt.vf_cache.empty() && load_value_function(path_for(i), key, preds[i], sc.grid, set.unique[i])) {
      hit[i] = 1;
      return;
    }
    set.unique[i] = solve_value_function(sc.dyn, preds[i], sc.grid);
    if (!opt.vf_cache.empty() && !save_value_function(set.unique[i], path_for(i), key))
      spdlog::warn("could not write value-function cache {}", path_for(i));
  };
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, opt.jobs));
  if (jobs == 1 || preds.size() == 1) {
    for (std::size_t i = 0; i < preds.size(); ++i) work(i);
  } else {
    std::vector<std::exception_ptr> errs(preds.size());
    for (std::size_t start = 0; start < preds.size(); start += jobs) {
      std::vector<std::thread> pool;
      for (std::size_t i = start; i < std::min(preds.size(), start + jobs); ++i)
        pool.emplace_back([&, i] {
          try {
            work(i);
          } catch (...) {
            errs[i] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
    }
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  set.cache_hits = static_cast<int>(std::count(hit.begin(), hit.end(), 1));
  set.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return set;
}

namespace {

void write_bands(const Scenario& sc, const std::string& path) {
  std::ofstream os(path);
  os << "label,lower,upper\n";
  for (const auto& [label, p] : sc.predicates) os << label << "," << p.x0 - p.r << "," << p.x0 + p.r << "\n";
}

void write_events(const Trace& tr, const std::string& path) {
  std::ofstream os(path);
  os << std::setprecision(10) << "t,type,leaf,vertex,j,alpha,beta\n";
  for (const auto& e : tr.events) {
    const char* type = e.type == TraceEvent::Type::Elapse ? "elapse" : e.type == TraceEvent::Type::Fail ? "fail" : "repeat";
    os << e.t << "," << type << "," << (e.leaf >= 0 ? tr.leaf_labels[e.leaf] : "") << "," << e.vertex << "," << e.j
       << "," << e.alpha << "," << e.beta << "\n";
  }
}

}  // namespace

RunResult run_scenario(const Scenario& sc_in, const RunOptions& opt) {
  const Formula f = scenario_formula(sc_in);
  const Pipeline pipe = Pipeline::build(f);
  RunResult res;
  res.scenario = resolved(sc_in, pipe);
  const Scenario& sc = res.scenario;
  spdlog::info("scenario {}: {} leaves, {} slots, sigma = {}", sc.name, pipe.logic.leaves.size(),
               pipe.layout.n_independent(), pipe.fold.expr.to_string());

  const VfSet vfs = solve_value_functions(sc, pipe, opt);
  res.vf_seconds = vfs.seconds;
  spdlog::info("value functions: {} solved, {} from cache, {:.2f} s", vfs.unique.size() - vfs.cache_hits,
               vfs.cache_hits, vfs.seconds);

  SimulationSetup setup;
  setup.dyn = sc.dyn;
  setup.predicates = sc.predicates;
  setup.vfs = vfs.per_leaf();
  setup.x0 = sc.x0;
  setup.tau0 = sc.tau0;
  setup.t_end = sc.horizon;
  setup.cfg = sc.controller;
  const auto t0 = std::chrono::steady_clock::now();
  res.trace = simulate(pipe, setup);
  res.sim_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (res.trace.aborted) spdlog::error("run aborted: {}", res.trace.diagnostic);

  // parameter containment with one step of slack
  const double slack = sc.controller.dt * sc.controller.omega_max;
  for (const auto& r : res.trace.records)
    for (int i = 0; i < pipe.layout.n_independent(); ++i) {
      const double ex = std::max(pipe.layout.lb[i] - r.tau_hat[i], r.tau_hat[i] - pipe.layout.ub[i]);
      res.max_tau_excursion = std::max(res.max_tau_excursion, ex);
      if (ex > slack) res.tau_contained = false;
    }

  // disjunct discharges
  for (const auto& e : res.trace.events) {
    if (e.type != TraceEvent::Type::Elapse) continue;
    const int v = pipe.logic.leaves[e.leaf].stl_vertex;
    int u = pipe.stl.vertices[v].parent;
    while (u >= 0 && pipe.stl.vertices[u].type == StlVertex::Type::Temporal) u = pipe.stl.vertices[u].parent;
    if (u >= 0 && pipe.stl.vertices[u].kind == NodeKind::Or) res.discharges.emplace_back(e.j, res.trace.leaf_labels[e.leaf]);
  }

  if (res.trace.records.size() >= 2) {
    try {
      const SampledSignal sig(res.trace.times(), res.trace.states());
      res.robustness = robustness(f, sc.predicates, sig, 0.0);
      res.robustness_ok = true;
      res.verdict = verdict_of(res.robustness, opt.eps_disc);
    } catch (const std::exception& e) {
      res.oracle_error = e.what();
    }
  } else {
    res.oracle_error = "trace too short";
  }

  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    res.trace.write_csv((out / "trace.csv").string());
    write_events(res.trace, (out / "events.csv").string());
    write_bands(sc, (out / "bands.csv").string());
    write_summary(res, (out / "summary.yaml").string());
    std::ofstream((out / "scenario.yaml").string()) << sc.to_yaml();
    if (sc.emit_surfaces) write_surfaces(sc, vfs, opt.out_dir);
  }
  return res;
}

void write_summary(const RunResult& r, const std::string& path) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "scenario" << YAML::Value << r.scenario.name;
  e << YAML::Key << "formula" << YAML::Value << YAML::DoubleQuoted << r.scenario.formula;
  e << YAML::Key << "seed" << YAML::Value << r.scenario.seed;
  e << YAML::Key << "complete" << YAML::Value << r.trace.complete;
  e << YAML::Key << "complete_time" << YAML::Value << r.trace.complete_time;
  e << YAML::Key << "aborted" << YAML::Value << r.trace.aborted;
  if (r.trace.aborted) e << YAML::Key << "diagnostic" << YAML::Value << r.trace.diagnostic;
  e << YAML::Key << "robustness" << YAML::Value;
  if (r.robustness_ok)
    e << r.robustness;
  else
    e << YAML::Null;
  if (!r.oracle_error.empty()) e << YAML::Key << "oracle_error" << YAML::Value << r.oracle_error;
  e << YAML::Key << "verdict" << YAML::Value << (r.robustness_ok ? to_string(r.verdict) : "unknown");
  e << YAML::Key << "tau_contained" << YAML::Value << r.tau_contained;
  e << YAML::Key << "max_tau_excursion" << YAML::Value << r.max_tau_excursion;
  e << YAML::Key << "slack_integral" << YAML::Value << r.trace.slack_integral;
  e << YAML::Key << "sigma_integral" << YAML::Value << r.trace.sigma_integral;
  e << YAML::Key << "slack_steps" << YAML::Value << r.trace.slack_steps;
  e << YAML::Key << "steps" << YAML::Value << r.trace.records.size();
  e << YAML::Key << "qp_iterations" << YAML::Value << r.trace.qp_iterations;
  e << YAML::Key << "vf_seconds" << YAML::Value << r.vf_seconds;
  e << YAML::Key << "sim_seconds" << YAML::Value << r.sim_seconds;
  e << YAML::Key << "repetitions" << YAML::Value << YAML::BeginSeq;
  for (const auto& ev : r.trace.events)
    if (ev.type == TraceEvent::Type::Repeat) {
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "t" << YAML::Value << ev.t << YAML::Key << "vertex"
        << YAML::Value << ev.vertex << YAML::Key << "j" << YAML::Value << ev.j << YAML::EndMap;
    }
  e << YAML::EndSeq;
  e << YAML::Key << "discharges" << YAML::Value << YAML::BeginSeq;
  for (const auto& [j, label] : r.discharges)
    e << YAML::Flow << YAML::BeginMap << YAML::Key << "j" << YAML::Value << j << YAML::Key << "leaf" << YAML::Value
      << label << YAML::EndMap;
  e << YAML::EndSeq;
  e << YAML::EndMap;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << e.c_str() << "\n";
}

void write_surfaces(const Scenario& sc, const VfSet& vfs, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t u = 0; u < vfs.unique.size(); ++u) {
    const auto& v = vfs.unique[u];
    const std::string label = v.predicate().label;
    {
      std::ofstream os((fs::path(dir) / ("surface_V_" + label + ".csv")).string());
      os << std::setprecision(8) << "x,t,V\n";
      for (int i = 0; i < v.n_x(); i += 4)
        for (int k = 0; k < v.n_t(); k += 2) os << v.x_at(i) << "," << v.t_at(k) << "," << v.node(i, k) << "\n";
    }
    {
      // G[1,3] operator surface over t in [0, 3]
      const NestedOperator op(layer_always(1.0, 3.0));
      std::ofstream os((fs::path(dir) / ("surface_T13_" + label + ".csv")).string());
      os << std::setprecision(8) << "x,t,TV\n";
      const std::vector<double> none;
      for (int i = 0; i < v.n_x(); i += 4)
        for (int k = 0; k <= 60; ++k) {
          const double t = 0.05 * k;
          os << v.x_at(i) << "," << t << "," << op.value(v, v.x_at(i), t, none) << "\n";
        }
    }
  }
  (void)sc;
}

std::string explain(const Formula& f) {
  const Pipeline p = Pipeline::build(f);
  std::ostringstream os;
  os << "formula: " << to_string(f) << "\n";
  os << "normalized: " << to_string(p.stl.formula) << "\n\n";
  os << "# operator tree\n" << p.stl.to_dot() << "\n";
  os << "# logic tree\n" << p.logic.to_dot() << "\n";
  os << "sigma: " << p.fold.expr.to_string() << "\n";
  for (std::size_t s = 0; s < p.fold.steps.size(); ++s) {
    os << "  step " << s + 1 << ": group {";
    for (std::size_t i = 0; i < p.fold.steps[s].size(); ++i) os << (i ? ", " : "") << "V" << p.fold.steps[s][i] + 1;
    os << "}\n";
  }
  os << "\nstacked slots: " << p.layout.n_stacked() << ", independent: " << p.layout.n_independent() << "\n";
  os << "A =\n" << p.layout.A << "\n";
  os << "A_hat =\n" << p.layout.A_hat << "\n";
  os << "domains:";
  for (int i = 0; i < p.layout.n_independent(); ++i)
    os << " tau_hat" << i + 1 << " in [" << p.layout.lb[i] << ", " << p.layout.ub[i] << "]";
  os << "\nvalue-function horizon: " << required_vf_horizon(p.logic) << "\n\n";
  for (std::size_t k = 0; k < p.logic.leaves.size(); ++k) {
    const auto& l = p.logic.leaves[k];
    os << "V" << k + 1 << " (" << (l.negated ? "!" : "") << l.label << ")\n" << l.op.dump();
  }
  return os.str();
}

}  // namespace stlop
