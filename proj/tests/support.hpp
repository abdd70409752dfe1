#pragma once

// Independent oracles and helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "stlop/control.hpp"
#include "stlop/formula.hpp"
#include "stlop/reachability.hpp"
#include "stlop/taskgraph.hpp"

namespace support {

using namespace stlop;

inline double rk4_step(const Dynamics1D& dyn, double x, double u, double h) {
  const double k1 = dyn.f(x, u);
  const double k2 = dyn.f(x + 0.5 * h * k1, u);
  const double k3 = dyn.f(x + 0.5 * h * k2, u);
  const double k4 = dyn.f(x + h * k3, u);
  return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

// Best running max of h over [0, T] found by forward simulation of
// piecewise-constant mode sequences. Modes: u_min, u_max and the pointwise
// maximizer of h'(x) f(x,u). Up to `max_switches` switches on a grid of
// `n_switch_times` interior instants. Stops early once h >= 0 was reached
// when `sign_only` is set.
inline double brute_force_reach(const Dynamics1D& dyn, const BandPredicate& h, double x0, double T,
                                int max_switches = 3, int n_switch_times = 5, double dt = 0.01,
                                bool sign_only = true) {
  double best = h(x0);
  if (T <= 0.0 || (sign_only && best >= 0.0)) return best;
  std::vector<double> grid;
  for (int k = 1; k <= n_switch_times; ++k) grid.push_back(T * k / (n_switch_times + 1));
  auto mode_input = [&](int mode, double x) {
    if (mode == 0) return dyn.u_min;
    if (mode == 1) return dyn.u_max;
    const double g = h.grad(x);
    return optimal_input(dyn, x, g > 0 ? 1 : (g < 0 ? -1 : 0));
  };
  const int n_steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  std::vector<int> chosen;
  // enumerate switch-time subsets by bitmask, modes by base-3 counter
  for (int mask = 0; mask < (1 << n_switch_times); ++mask) {
    std::vector<double> sw;
    for (int k = 0; k < n_switch_times; ++k)
      if (mask & (1 << k)) sw.push_back(grid[k]);
    if (static_cast<int>(sw.size()) > max_switches) continue;
    const int segs = static_cast<int>(sw.size()) + 1;
    int combos = 1;
    for (int s = 0; s < segs; ++s) combos *= 3;
    for (int c = 0; c < combos; ++c) {
      std::vector<int> modes(segs);
      int r = c;
      for (int s = 0; s < segs; ++s) {
        modes[s] = r % 3;
        r /= 3;
      }
      double x = x0;
      int seg = 0;
      double run = h(x);
      for (int n = 0; n < n_steps; ++n) {
        const double t = n * dt;
        while (seg < static_cast<int>(sw.size()) && t >= sw[seg] - 1e-12) ++seg;
        const double step = std::min(dt, T - t);
        x = rk4_step(dyn, x, mode_input(modes[seg], x), step);
        if (!std::isfinite(x)) break;
        run = std::max(run, h(x));
        if (sign_only && run >= 0.0) return run;
      }
      best = std::max(best, run);
    }
  }
  return best;
}

// Replays a recorded trajectory through the task runtime with the parameters
// held at `tau` and returns min over samples of sigma. -inf when a window
// fails.
inline double replay_min_sigma(const Pipeline& pipe, const PredicateMap& preds,
                               const std::vector<const ValueFunction*>& vfs, const std::vector<double>& times,
                               const std::vector<double>& states, const std::vector<double>& tau_fixed,
                               double eps_sat = 0.01) {
  TaskRuntime rt(pipe.stl, pipe.logic, eps_sat, 1e-9);
  rt.attach_predicates(preds);
  rt.reset(0.0);
  std::vector<double> tau = tau_fixed;
  std::vector<char> frozen(tau.size(), 0);
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < times.size(); ++n) {
    rt.update(times[n], states[n], tau, frozen, tau_fixed);
    if (rt.failed()) return -std::numeric_limits<double>::infinity();
    if (rt.complete()) break;
    lo = std::min(lo, sigma_eval(pipe.fold.expr, rt, vfs, states[n], times[n], tau));
  }
  return lo;
}

// All points of the box on a lattice of spacing `res` (bounds included).
inline std::vector<std::vector<double>> lattice(const ParamLayout& layout, double res) {
  std::vector<std::vector<double>> out{{}};
  for (int i = 0; i < layout.n_independent(); ++i) {
    std::vector<double> axis;
    const double lo = layout.lb[i], hi = layout.ub[i];
    const int n = static_cast<int>(std::floor((hi - lo) / res + 1e-9));
    for (int k = 0; k <= n; ++k) axis.push_back(lo + k * res);
    if (hi - axis.back() > 1e-9) axis.push_back(hi);
    std::vector<std::vector<double>> next;
    for (const auto& p : out)
      for (double a : axis) {
        auto q = p;
        q.push_back(a);
        next.push_back(q);
      }
    out = std::move(next);
  }
  return out;
}

// Random formula of temporal depth <= 2 over the labels, without any
// always-over-eventually/until nesting (no repetition).
inline Formula random_flat_formula(std::mt19937& rng, const std::vector<std::string>& labels) {
  std::uniform_int_distribution<int> pick_label(0, static_cast<int>(labels.size()) - 1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto interval = [&](double max_lo, double max_len) {
    const double lo = std::round(U(rng) * max_lo * 2) / 2;
    const double hi = lo + std::round((0.5 + U(rng) * max_len) * 2) / 2;
    return std::pair{lo, hi};
  };
  auto pred = [&] { return Formula::predicate(labels[pick_label(rng)]); };
  auto level1 = [&]() {
    const int k = std::uniform_int_distribution<int>(0, 2)(rng);
    if (k == 0) {
      auto [a, b] = interval(3, 2);
      return Formula::always(a, b, pred());
    }
    if (k == 1) {
      auto [a, b] = interval(3, 3);
      return Formula::eventually(a, b, pred());
    }
    auto [a, b] = interval(2, 2);
    return Formula::until(a, b, pred(), pred());
  };
  const int shape = std::uniform_int_distribution<int>(0, 5)(rng);
  switch (shape) {
    case 0:
      return level1();
    case 1:
      return Formula::conj({level1(), level1()});
    case 2:
      return Formula::disj({level1(), level1()});
    case 3: {
      auto [a, b] = interval(2, 3);
      auto [c, d] = interval(1, 1.5);
      return Formula::eventually(a, b, Formula::always(c, d, pred()));
    }
    case 4: {
      auto [a, b] = interval(2, 3);
      return Formula::eventually(a, b, Formula::conj({pred(), pred()}));
    }
    default: {
      auto [a, b] = interval(2, 2);
      return Formula::conj({Formula::always(a, b, pred()), pred()});
    }
  }
}

}  // namespace support
