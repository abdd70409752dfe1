#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stlop/reachability.hpp"

namespace stlop {

// a0 + sum_i a1[i] * tau[slots[i]]
struct WindowFunction {
  double a0 = 0.0;
  std::vector<int> slots;
  std::vector<double> a1;

  static WindowFunction constant(double v) { return WindowFunction{v, {}, {}}; }
  static WindowFunction slot(double offset, int id, double coeff = 1.0) { return WindowFunction{offset, {id}, {coeff}}; }

  double eval(std::span<const double> tau) const;
  double coeff(int slot) const;
  bool depends_on(int slot) const { return coeff(slot) != 0.0; }
  WindowFunction operator+(const WindowFunction& o) const;
  // a0 replaced by a0 + a1 . tau for the listed slots
  WindowFunction freeze(std::span<const double> tau) const { return constant(eval(tau)); }
};

double window_eval(const WindowFunction& w, std::span<const double> tau);

struct SlotBounds {
  int slot = -1;
  double lo = 0.0;
  double hi = 0.0;
};

struct ParamBox {
  std::vector<SlotBounds> bounds;

  bool empty() const { return bounds.empty(); }
  const SlotBounds* find(int slot) const;
  bool contains(std::span<const double> tau, double tol = 1e-12) const;
  ParamBox operator*(const ParamBox& o) const;  // product, slots deduplicated
};

// Minimum of a window function (nonnegative coefficients) over a box; slots
// missing from the box count as free at zero.
double window_min(const WindowFunction& w, const ParamBox& box);
double window_max(const WindowFunction& w, const ParamBox& box);

enum class LayerKind { Identity, Always, Eventually, UntilLeft, UntilRight };
const char* to_string(LayerKind k);

struct OperatorLayer {
  LayerKind kind = LayerKind::Identity;
  WindowFunction alpha;
  WindowFunction beta;
  ParamBox theta;

  // window may have positive length (always and the left half of an until)
  bool always_like() const { return kind == LayerKind::Always || kind == LayerKind::UntilLeft; }
  int slot() const { return theta.empty() ? -1 : theta.bounds.front().slot; }
};

OperatorLayer layer_identity();
OperatorLayer layer_always(double t_lo, double t_hi);
OperatorLayer layer_eventually(double t_lo, double t_hi, int slot);
// (left, right) halves sharing `slot`
std::pair<OperatorLayer, OperatorLayer> layer_until(double t_lo, double t_hi, int slot);
// always window [t_lo, t_hi + tau], tau in [0, span]; left half of an until after folding
OperatorLayer layer_always_shared(double t_lo, double t_hi, int slot, double span);

// ---- nesting calculus for a single outer layer over a single inner layer ----
// taus[j] is the value of the inner layer's slot at repetition j+1 (ignored if
// the inner layer has no slot).

// Eq. 9a/9b recursion: windows (alpha''_j, beta''_j), j = 1..taus.size()
std::vector<std::pair<double, double>> nested_windows_recursive(double alpha_outer, const OperatorLayer& inner,
                                                                const std::vector<double>& taus);
// closed form of the J-th window (J is 1-based, J <= taus.size())
std::pair<double, double> nested_window_closed_form(double alpha_outer, const OperatorLayer& inner,
                                                    const std::vector<double>& taus, int J);
// Eq. 11 test for window J: beta''_{J-1} <= beta' <= min over the free tau of beta''_J
bool repetition_done(double prev_end, double outer_deadline, double next_min_end);
// largest J satisfying Eq. 11 for the given parameter history; -1 if none
// within taus.size() windows
int final_repetition(double alpha_outer, double beta_outer, const OperatorLayer& inner, const std::vector<double>& taus);

// Prop. 2: with alpha1 <= alpha2, T1 V >= 0 implies T2 V >= 0 on [0, min(alpha2, beta1)].
bool ordering_dominates(double alpha1, double beta1, double alpha2, double beta2, double t);

// ---- per-predicate nested operator ----

struct RepeatCounter {
  int j = 1;
  WindowFunction start;     // start of the current iteration
  WindowFunction deadline;  // beta' of the repeating layer
  std::vector<double> ends;
  bool complete = false;

  void arm(const WindowFunction& block_start, const OperatorLayer& layer);
  // true when another iteration starts at `end` (end <= deadline)
  bool close_iteration(double end, double deadline_value);
};

struct WindowRecord {
  int layer = -1;  // innermost repeating layer, -1 if none
  int j = 1;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::pair<int, double>> frozen;
};

struct OperatorPartials {
  double value = 0.0;
  double d_t = 0.0;
  double d_x = 0.0;
  std::vector<std::pair<int, double>> d_tau;
  bool plateau = false;
};

struct AdvanceResult {
  bool complete = false;
  double end = 0.0;
  std::vector<int> frozen;  // slots whose values were just fixed
  std::vector<int> minted;  // slots to reset for the next window
};

class NestedOperator {
 public:
  NestedOperator() : NestedOperator(layer_identity()) {}
  explicit NestedOperator(OperatorLayer base);
  // layers outermost first, taken as given (no folding)
  explicit NestedOperator(std::vector<OperatorLayer> layers);

  const std::vector<OperatorLayer>& layers() const { return layers_; }
  const std::vector<int>& repeat_layers() const { return repeat_layers_; }
  std::vector<std::shared_ptr<RepeatCounter>>& counters() { return counters_; }
  const std::vector<std::shared_ptr<RepeatCounter>>& counters() const { return counters_; }

  // Arms every counter from time `t0` and computes the first window.
  void init(double t0 = 0.0);
  // Recomputes the active window from the counters.
  void refresh();

  const WindowFunction& alpha() const { return alpha_; }
  const WindowFunction& beta() const { return beta_; }
  ParamBox live_box() const;
  bool complete() const { return complete_; }
  void set_complete(bool c) { complete_ = c; }

  // Eq. 7 on the active window.
  double value(const ValueFunction& v, double x, double t, std::span<const double> tau) const;
  OperatorPartials partials(const ValueFunction& v, double x, double t, std::span<const double> tau) const;
  bool elapsed(double t, std::span<const double> tau, double eps_t = 1e-9) const;

  // Single-predicate bookkeeping: closes the active window at beta''(tau) and
  // cascades through the counters (innermost first).
  AdvanceResult advance(double t, std::span<const double> tau, double eps_t = 1e-9);
  // Records the active window as elapsed without touching the counters.
  WindowRecord record_window(std::span<const double> tau);
  // Re-arms the counters strictly inside repeat index `ri` (position in
  // repeat_layers) from that counter's current start. Returns re-minted slots.
  std::vector<int> rearm_inside(std::size_t ri);
  // Slots of layers strictly inside layer index `layer`.
  std::vector<int> slots_inside(int layer) const;
  // Minimum duration of one window sequence started at time 0 from layer `from`.
  double min_duration_from(int layer) const;

  const std::vector<WindowRecord>& history() const { return history_; }
  std::string dump() const;

  friend NestedOperator compose(const OperatorLayer& outer, const NestedOperator& inner);

 private:
  std::vector<OperatorLayer> layers_;  // outermost first
  std::vector<int> repeat_layers_;
  std::vector<std::shared_ptr<RepeatCounter>> counters_;
  WindowFunction alpha_;
  WindowFunction beta_;
  bool complete_ = false;
  double base_t0_ = 0.0;
  std::vector<WindowRecord> history_;

  void classify();
  WindowFunction shifts(int from, int to) const;  // sum of alphas of layers (from, to)
};

// Outer layer applied on top of `inner`. An always-like outer over a
// single always-like layer collapses into one window (G[a',b'] G[a,b] =
// G[a'+a, b'+b]); identity layers vanish.
NestedOperator compose(const OperatorLayer& outer, const NestedOperator& inner);

}  // namespace stlop
