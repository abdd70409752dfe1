#include "stlop/control.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "stlop/qp.hpp"

namespace stlop {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double URef::operator()(double t) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::Const:
      return value;
    case Kind::Sin:
      return amplitude * std::sin(frequency * t);
  }
  return 0.0;
}

std::string URef::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Zero:
      os << "zero";
      break;
    case Kind::Const:
      os << "const(" << value << ")";
      break;
    case Kind::Sin:
      os << "sin(" << amplitude << ", " << frequency << ")";
      break;
  }
  return os.str();
}

void ControllerConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("controller: delta must lie in (0,1)");
  if (!(dt > 0.0)) throw std::invalid_argument("controller: dt must be positive");
  if (!(k > 0.0) || !(kappa_hat > 0.0)) throw std::invalid_argument("controller: class-K gains must be positive");
  if (!(k_omega >= 0.0)) throw std::invalid_argument("controller: k_omega must be nonnegative");
  if (!(slack_weight > 0.0) || !(slack_max > 0.0)) throw std::invalid_argument("controller: bad slack settings");
  if (!(omega_max > 0.0)) throw std::invalid_argument("controller: omega_max must be positive");
  if (n_u < 2) throw std::invalid_argument("controller: n_u must be at least 2");
  if (!(max_dx > 0.0)) throw std::invalid_argument("controller: max_dx must be positive");
}

double barrier_rate(const OperatorPartials& p, double f, std::span<const double> omega) {
  double r = p.d_t + p.d_x * f;
  for (const auto& [s, d] : p.d_tau) r += d * omega[s];
  return r;
}

double slot_barrier(double tau, double lb, double ub) { return -(tau - lb) * (tau - ub); }

namespace {

double leaf_margin(const LeafTerm& l, double sigma, double k) {
  const double v = l.p.value;
  const double gap = std::isfinite(sigma) ? std::abs(v - sigma) : 0.0;
  return k * (v + gap);
}

}  // namespace

std::vector<double> constraint_residuals(const Dynamics1D& dyn, const StepInput& in, const ControllerConfig& cfg,
                                         double u, std::span<const double> omega, double s) {
  std::vector<double> r;
  const double f = dyn.f(in.x, u);
  for (const auto& l : in.leaves) r.push_back(barrier_rate(l.p, f, omega) + leaf_margin(l, in.sigma, cfg.k) + s);
  for (std::size_t i = 0; i < in.tau.size(); ++i) {
    if (in.frozen[i]) continue;
    r.push_back(-(2 * in.tau[i] - in.lb[i] - in.ub[i]) * omega[i] +
                cfg.kappa_hat * slot_barrier(in.tau[i], in.lb[i], in.ub[i]));
  }
  return r;
}

std::vector<double> omega_reference(const StepInput& in, const ControllerConfig& cfg) {
  std::vector<double> w(in.tau.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = in.frozen[i] ? 0.0 : -cfg.k_omega * in.tau[i];
  return w;
}

namespace {

struct Candidate {
  double u = 0.0;
  Eigen::VectorXd omega;
  double s = 0.0;
  double cost = kInf;
  int iters = 0;
};

// QP in (u?, omega, s); u is a variable when `fixed_u` is NaN.
Candidate solve_for(const Dynamics1D& dyn, const StepInput& in, const ControllerConfig& cfg, double u_ref,
                    const std::vector<double>& w_ref, double fixed_u) {
  const bool free_u = std::isnan(fixed_u);
  const int L = static_cast<int>(in.tau.size());
  const int off = free_u ? 1 : 0;
  const int n = off + L + 1;
  const int is = n - 1;
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(n, n);
  qp.g = Eigen::VectorXd::Zero(n);
  qp.lb = Eigen::VectorXd(n);
  qp.ub = Eigen::VectorXd(n);
  if (free_u) {
    qp.H(0, 0) = 2 * cfg.delta;
    qp.g[0] = -2 * cfg.delta * u_ref;
    qp.lb[0] = dyn.u_min;
    qp.ub[0] = dyn.u_max;
  }
  for (int i = 0; i < L; ++i) {
    qp.H(off + i, off + i) = 2 * (1 - cfg.delta);
    qp.g[off + i] = -2 * (1 - cfg.delta) * w_ref[i];
    const double wm = in.frozen[i] ? 0.0 : cfg.omega_max;
    qp.lb[off + i] = -wm;
    qp.ub[off + i] = wm;
  }
  qp.H(is, is) = 2 * cfg.slack_weight;
  qp.lb[is] = 0.0;
  qp.ub[is] = cfg.slack_max;

  int rows = static_cast<int>(in.leaves.size());
  for (int i = 0; i < L; ++i)
    if (!in.frozen[i]) ++rows;
  qp.C = Eigen::MatrixXd::Zero(rows, n);
  qp.d = Eigen::VectorXd::Zero(rows);
  int r = 0;
  for (const auto& l : in.leaves) {
    double known = l.p.d_t + leaf_margin(l, in.sigma, cfg.k);
    if (free_u) {
      known += l.p.d_x * dyn.drift(in.x);
      qp.C(r, 0) = l.p.d_x * dyn.gain(in.x);
    } else {
      known += l.p.d_x * dyn.f(in.x, fixed_u);
    }
    for (const auto& [s, d] : l.p.d_tau) qp.C(r, off + s) += d;
    qp.C(r, is) = 1.0;
    qp.d[r] = cfg.eps_strict - known;
    ++r;
  }
  for (int i = 0; i < L; ++i) {
    if (in.frozen[i]) continue;
    qp.C(r, off + i) = -(2 * in.tau[i] - in.lb[i] - in.ub[i]);
    qp.d[r] = -cfg.kappa_hat * slot_barrier(in.tau[i], in.lb[i], in.ub[i]);
    ++r;
  }

  // feasible start
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  const double u0 = free_u ? std::clamp(u_ref, dyn.u_min, dyn.u_max) : fixed_u;
  if (free_u) z[0] = u0;
  r = static_cast<int>(in.leaves.size());
  for (int i = 0; i < L; ++i) {
    if (in.frozen[i]) continue;
    const double a = qp.C(r, off + i);
    const double b = qp.d[r];
    if (b > 0.0) {
      if (a == 0.0) throw InfeasibleStep("slot " + std::to_string(i + 1) + " left its domain with no way back");
      const double w = b / a * (1 + 1e-9);
      if (std::abs(w) > cfg.omega_max)
        throw InfeasibleStep("slot " + std::to_string(i + 1) + " needs a rate beyond omega_max to stay in its domain");
      z[off + i] = w;
    }
    ++r;
  }
  double need = 0.0;
  for (int k = 0; k < static_cast<int>(in.leaves.size()); ++k) need = std::max(need, qp.d[k] - qp.C.row(k).dot(z));
  z[is] = need * (1 + 1e-9) + 1e-12;
  if (z[is] > cfg.slack_max) throw InfeasibleStep("required slack exceeds its bound");

  const QpResult res = solve_qp(qp, z);
  if (!res.converged) spdlog::warn("controller QP stopped after {} iterations", res.iterations);
  Candidate c;
  c.u = free_u ? res.z[0] : fixed_u;
  c.omega = res.z.segment(off, L);
  c.s = std::max(0.0, res.z[is]);
  c.iters = res.iterations;
  double cost = cfg.delta * (c.u - u_ref) * (c.u - u_ref) + cfg.slack_weight * c.s * c.s;
  for (int i = 0; i < L; ++i) cost += (1 - cfg.delta) * (c.omega[i] - w_ref[i]) * (c.omega[i] - w_ref[i]);
  c.cost = cost;
  return c;
}

}  // namespace

ControlOutput controller_step(const Dynamics1D& dyn, const StepInput& in, const ControllerConfig& cfg) {
  const double u_ref = cfg.u_ref(in.t);
  const auto w_ref = omega_reference(in, cfg);
  Candidate best;
  if (dyn.input_affine()) {
    best = solve_for(dyn, in, cfg, u_ref, w_ref, std::nan(""));
  } else {
    std::vector<double> us;
    for (int i = 0; i < cfg.n_u; ++i) us.push_back(dyn.u_min + (dyn.u_max - dyn.u_min) * i / (cfg.n_u - 1));
    us.push_back(std::clamp(u_ref, dyn.u_min, dyn.u_max));
    for (double c : dyn.input_candidates(in.x)) us.push_back(c);
    int iters = 0;
    std::string last_error;
    for (double u : us) {
      try {
        Candidate c = solve_for(dyn, in, cfg, u_ref, w_ref, u);
        iters += c.iters;
        if (c.cost < best.cost - 1e-15) best = std::move(c);
      } catch (const InfeasibleStep& e) {
        last_error = e.what();
      }
    }
    if (!std::isfinite(best.cost)) throw InfeasibleStep(last_error);
    best.iters = iters;
  }
  ControlOutput out;
  out.u = best.u;
  out.omega.assign(best.omega.data(), best.omega.data() + best.omega.size());
  out.slack = best.s;
  out.qp_iterations = best.iters;
  out.objective = best.cost;
  return out;
}

// ---- closed loop ----

Pipeline Pipeline::build(const Formula& f) {
  Pipeline p;
  p.formula = f;
  p.stl = build_stl_tree(f);
  p.logic = build_logic_tree(p.stl);
  p.fold = fold_sigma_steps(p.logic);
  p.layout = build_param_layout(p.logic);
  return p;
}

std::vector<double> Trace::times() const {
  std::vector<double> v;
  for (const auto& r : records) v.push_back(r.t);
  return v;
}

std::vector<double> Trace::states() const {
  std::vector<double> v;
  for (const auto& r : records) v.push_back(r.x);
  return v;
}

void Trace::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  const std::size_t L = records.empty() ? 0 : records.front().tau_hat.size();
  os << "t,x";
  for (std::size_t i = 0; i < L; ++i) os << ",tau_hat_" << i + 1;
  os << ",u";
  for (std::size_t i = 0; i < L; ++i) os << ",omega_" << i + 1;
  os << ",sigma,slack";
  for (std::size_t k = 0; k < leaf_labels.size(); ++k) os << ",V" << k + 1;
  for (std::size_t k = 0; k < leaf_labels.size(); ++k) os << ",alpha_" << k + 1 << ",beta_" << k + 1;
  for (int v : counter_vertices) os << ",j_v" << v;
  os << "\n";
  os << std::setprecision(10);
  for (const auto& r : records) {
    os << r.t << "," << r.x;
    for (double v : r.tau_hat) os << "," << v;
    os << "," << r.u;
    for (double v : r.omega) os << "," << v;
    os << "," << r.sigma << "," << r.slack;
    for (double v : r.leaf_values) os << "," << v;
    for (const auto& [a, b] : r.windows) os << "," << a << "," << b;
    for (int j : r.counters) os << "," << j;
    os << "\n";
  }
}

Trace simulate(const Pipeline& pipe, const SimulationSetup& setup) {
  const auto& cfg = setup.cfg;
  cfg.validate();
  setup.dyn.validate();
  const int K = static_cast<int>(pipe.logic.leaves.size());
  if (static_cast<int>(setup.vfs.size()) != K) throw std::invalid_argument("simulate: one value function per leaf");
  const int L = pipe.layout.n_independent();
  if (static_cast<int>(setup.tau0.size()) != L) throw std::invalid_argument("simulate: tau_hat(0) has the wrong size");
  if (!pipe.layout.theta.contains(setup.tau0, 1e-12)) throw std::invalid_argument("simulate: tau_hat(0) outside its box");

  TaskRuntime rt(pipe.stl, pipe.logic, cfg.eps_sat, 1e-9);
  rt.attach_predicates(setup.predicates);
  rt.reset(0.0);

  Trace tr;
  for (const auto& l : pipe.logic.leaves) tr.leaf_labels.push_back((l.negated ? "!" : "") + l.label);
  for (std::size_t v = 0; v < pipe.stl.vertices.size(); ++v)
    if (rt.counter(static_cast<int>(v))) tr.counter_vertices.push_back(static_cast<int>(v));

  std::vector<double> tau = setup.tau0;
  const std::vector<double>& tau_init = setup.tau0;
  std::vector<char> frozen(static_cast<std::size_t>(L), 0);
  double x = setup.x0;
  double t = 0.0;

  auto log_events = [&](const RuntimeEvents& ev, double now) {
    for (const auto& e : ev.elapsed) {
      TraceEvent te;
      te.type = TraceEvent::Type::Elapse;
      te.t = now;
      te.leaf = e.leaf;
      te.j = e.window.j;
      te.alpha = e.window.alpha;
      te.beta = e.window.beta;
      tr.events.push_back(te);
    }
    for (int k : ev.failed) {
      TraceEvent te;
      te.type = TraceEvent::Type::Fail;
      te.t = now;
      te.leaf = k;
      tr.events.push_back(te);
    }
    for (int v : ev.repetitions) {
      TraceEvent te;
      te.type = TraceEvent::Type::Repeat;
      te.t = now;
      te.vertex = v;
      te.j = rt.counter(v)->j;
      tr.events.push_back(te);
    }
  };
  auto check_runtime = [&](double now) {
    if (rt.failed()) {
      tr.aborted = true;
      tr.diagnostic = rt.failure();
      return false;
    }
    if (rt.complete() && tr.complete_time < 0) {
      tr.complete = true;
      tr.complete_time = now;
    }
    return true;
  };

  log_events(rt.update(t, x, tau, frozen, tau_init), t);
  if (!check_runtime(t)) return tr;

  Eigen::VectorXd lb = pipe.layout.lb;
  Eigen::VectorXd ub = pipe.layout.ub;
  const long n_steps = static_cast<long>(std::ceil(setup.t_end / cfg.dt - 1e-9));
  for (long n = 0;; ++n) {
    StepInput in;
    in.t = t;
    in.x = x;
    in.tau = tau;
    in.frozen = frozen;
    in.lb = lb;
    in.ub = ub;
    std::vector<double> vals(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      if (!rt.active(k)) {
        vals[k] = rt.inactive_value(k);
        continue;
      }
      LeafTerm lt{k, rt.op(k).partials(*setup.vfs[k], x, t, tau)};
      vals[k] = lt.p.value;
      in.leaves.push_back(std::move(lt));
    }
    in.sigma = pipe.fold.expr.eval(vals);

    ControlOutput co;
    try {
      co = controller_step(setup.dyn, in, cfg);
    } catch (const InfeasibleStep& e) {
      tr.aborted = true;
      std::ostringstream os;
      os << "controller infeasible at t=" << t << ": " << e.what();
      tr.diagnostic = os.str();
      return tr;
    }

    TraceRecord rec;
    rec.t = t;
    rec.x = x;
    rec.tau_hat = tau;
    rec.u = co.u;
    rec.omega = co.omega;
    rec.sigma = in.sigma;
    rec.slack = co.slack;
    rec.leaf_values = vals;
    for (int k = 0; k < K; ++k) rec.windows.emplace_back(rt.op(k).alpha().eval(tau), rt.op(k).beta().eval(tau));
    for (int v : tr.counter_vertices) rec.counters.push_back(rt.counter(v)->j);
    tr.records.push_back(std::move(rec));
    tr.qp_iterations += co.qp_iterations;
    if (co.slack > 1e-9) ++tr.slack_steps;

    if (n >= n_steps) break;

    tr.slack_integral += co.slack * cfg.dt;
    if (std::isfinite(in.sigma)) tr.sigma_integral += in.sigma * cfg.dt;
    euler_norm_controlled(setup.dyn, x, co.u, cfg.dt, cfg.max_dx);
    for (int i = 0; i < L; ++i) tau[i] += co.omega[i] * cfg.dt;
    t = static_cast<double>(n + 1) * cfg.dt;
    if (!std::isfinite(x)) {
      tr.aborted = true;
      tr.diagnostic = "state diverged";
      return tr;
    }
    log_events(rt.update(t, x, tau, frozen, tau_init), t);
    if (!check_runtime(t)) return tr;
  }
  return tr;
}

}  // namespace stlop
