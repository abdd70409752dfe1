#include "stlop/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stlop {

double WindowFunction::eval(std::span<const double> tau) const {
  double v = a0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const int s = slots[i];
    if (s < 0 || static_cast<std::size_t>(s) >= tau.size())
      throw std::out_of_range("slot assignment is missing slot " + std::to_string(s));
    v += a1[i] * tau[s];
  }
  return v;
}

double WindowFunction::coeff(int slot) const {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i] == slot) return a1[i];
  return 0.0;
}

WindowFunction WindowFunction::operator+(const WindowFunction& o) const {
  WindowFunction r = *this;
  r.a0 += o.a0;
  for (std::size_t i = 0; i < o.slots.size(); ++i) {
    auto it = std::find(r.slots.begin(), r.slots.end(), o.slots[i]);
    if (it == r.slots.end()) {
      r.slots.push_back(o.slots[i]);
      r.a1.push_back(o.a1[i]);
    } else {
      r.a1[static_cast<std::size_t>(it - r.slots.begin())] += o.a1[i];
    }
  }
  return r;
}

double window_eval(const WindowFunction& w, std::span<const double> tau) { return w.eval(tau); }

const SlotBounds* ParamBox::find(int slot) const {
  for (const auto& b : bounds)
    if (b.slot == slot) return &b;
  return nullptr;
}

bool ParamBox::contains(std::span<const double> tau, double tol) const {
  for (const auto& b : bounds) {
    if (b.slot < 0 || static_cast<std::size_t>(b.slot) >= tau.size()) return false;
    if (tau[b.slot] < b.lo - tol || tau[b.slot] > b.hi + tol) return false;
  }
  return true;
}

ParamBox ParamBox::operator*(const ParamBox& o) const {
  ParamBox r = *this;
  for (const auto& b : o.bounds)
    if (!r.find(b.slot)) r.bounds.push_back(b);
  return r;
}

double window_min(const WindowFunction& w, const ParamBox& box) {
  double v = w.a0;
  for (std::size_t i = 0; i < w.slots.size(); ++i) {
    const auto* b = box.find(w.slots[i]);
    if (b) v += w.a1[i] * (w.a1[i] >= 0 ? b->lo : b->hi);
  }
  return v;
}

double window_max(const WindowFunction& w, const ParamBox& box) {
  double v = w.a0;
  for (std::size_t i = 0; i < w.slots.size(); ++i) {
    const auto* b = box.find(w.slots[i]);
    if (b) v += w.a1[i] * (w.a1[i] >= 0 ? b->hi : b->lo);
  }
  return v;
}

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Identity:
      return "I";
    case LayerKind::Always:
      return "G";
    case LayerKind::Eventually:
      return "F";
    case LayerKind::UntilLeft:
      return "UL";
    case LayerKind::UntilRight:
      return "UR";
  }
  return "?";
}

namespace {
void check_interval(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi >= lo)) throw std::invalid_argument("invalid interval");
}
}  // namespace

OperatorLayer layer_identity() { return {LayerKind::Identity, WindowFunction::constant(0), WindowFunction::constant(0), {}}; }

OperatorLayer layer_always(double t_lo, double t_hi) {
  check_interval(t_lo, t_hi);
  return {LayerKind::Always, WindowFunction::constant(t_lo), WindowFunction::constant(t_hi), {}};
}

OperatorLayer layer_eventually(double t_lo, double t_hi, int slot) {
  check_interval(t_lo, t_hi);
  const auto w = WindowFunction::slot(t_lo, slot);
  return {LayerKind::Eventually, w, w, ParamBox{{{slot, 0.0, t_hi - t_lo}}}};
}

std::pair<OperatorLayer, OperatorLayer> layer_until(double t_lo, double t_hi, int slot) {
  check_interval(t_lo, t_hi);
  const ParamBox box{{{slot, 0.0, t_hi - t_lo}}};
  const auto w = WindowFunction::slot(t_lo, slot);
  OperatorLayer left{LayerKind::UntilLeft, WindowFunction::constant(0), w, box};
  OperatorLayer right{LayerKind::UntilRight, w, w, box};
  return {left, right};
}

OperatorLayer layer_always_shared(double t_lo, double t_hi, int slot, double span) {
  check_interval(t_lo, t_hi);
  if (span < 0) throw std::invalid_argument("negative slot span");
  return {LayerKind::UntilLeft, WindowFunction::constant(t_lo), WindowFunction::slot(t_hi, slot),
          ParamBox{{{slot, 0.0, span}}}};
}

namespace {
double with_tau(const WindowFunction& w, double tau) {
  double v = w.a0;
  for (double c : w.a1) v += c * tau;
  return v;
}
}  // namespace

std::vector<std::pair<double, double>> nested_windows_recursive(double alpha_outer, const OperatorLayer& inner,
                                                                const std::vector<double>& taus) {
  std::vector<std::pair<double, double>> out;
  double prev_beta = 0.0;
  for (std::size_t j = 0; j < taus.size(); ++j) {
    const double base = j == 0 ? alpha_outer : prev_beta;
    const double a = base + with_tau(inner.alpha, taus[j]);
    const double b = base + with_tau(inner.beta, taus[j]);
    out.emplace_back(a, b);
    prev_beta = b;
  }
  return out;
}

std::pair<double, double> nested_window_closed_form(double alpha_outer, const OperatorLayer& inner,
                                                    const std::vector<double>& taus, int J) {
  if (J < 1 || static_cast<std::size_t>(J) > taus.size()) throw std::out_of_range("window index");
  double sum = 0.0;
  for (int j = 0; j + 1 < J; ++j) sum += with_tau(inner.beta, taus[j]);
  return {alpha_outer + with_tau(inner.alpha, taus[J - 1]) + sum, alpha_outer + with_tau(inner.beta, taus[J - 1]) + sum};
}

bool repetition_done(double prev_end, double outer_deadline, double next_min_end) {
  return prev_end <= outer_deadline && outer_deadline <= next_min_end;
}

int final_repetition(double alpha_outer, double beta_outer, const OperatorLayer& inner, const std::vector<double>& taus) {
  const auto windows = nested_windows_recursive(alpha_outer, inner, taus);
  const double min_beta = window_min(inner.beta, inner.theta);
  int best = -1;
  for (std::size_t J = 1; J <= windows.size(); ++J) {
    const double prev = J == 1 ? alpha_outer : windows[J - 2].second;
    if (repetition_done(prev, beta_outer, prev + min_beta)) best = static_cast<int>(J);
  }
  return best;
}

bool ordering_dominates(double alpha1, double beta1, double alpha2, double /*beta2*/, double t) {
  if (alpha1 > alpha2) return false;
  return t >= 0.0 && t <= std::min(alpha2, beta1);
}

void RepeatCounter::arm(const WindowFunction& block_start, const OperatorLayer& layer) {
  j = 1;
  start = block_start + layer.alpha;
  deadline = block_start + layer.beta;
  ends.clear();
  complete = false;
}

bool RepeatCounter::close_iteration(double end, double deadline_value) {
  ends.push_back(end);
  if (end <= deadline_value) {
    ++j;
    start = WindowFunction::constant(end);
    return true;
  }
  complete = true;
  return false;
}

NestedOperator::NestedOperator(OperatorLayer base) {
  if (base.kind != LayerKind::Identity) layers_.push_back(std::move(base));
  classify();
  init(0.0);
}

NestedOperator::NestedOperator(std::vector<OperatorLayer> layers) {
  for (auto& l : layers)
    if (l.kind != LayerKind::Identity) layers_.push_back(std::move(l));
  classify();
  init(0.0);
}

void NestedOperator::classify() {
  repeat_layers_.clear();
  for (int i = 0; i + 1 < static_cast<int>(layers_.size()); ++i)
    if (layers_[i].always_like()) repeat_layers_.push_back(i);
  counters_.clear();
  for (std::size_t k = 0; k < repeat_layers_.size(); ++k) counters_.push_back(std::make_shared<RepeatCounter>());
}

WindowFunction NestedOperator::shifts(int from, int to) const {
  WindowFunction w;
  for (int i = from + 1; i < to; ++i) w = w + layers_[i].alpha;
  return w;
}

void NestedOperator::init(double t0) {
  complete_ = false;
  history_.clear();
  WindowFunction block = WindowFunction::constant(t0);
  int prev = -1;
  for (std::size_t k = 0; k < repeat_layers_.size(); ++k) {
    const int r = repeat_layers_[k];
    block = block + shifts(prev, r);
    counters_[k]->arm(block, layers_[r]);
    block = counters_[k]->start;
    prev = r;
  }
  base_t0_ = t0;
  refresh();
}

void NestedOperator::refresh() {
  const int m = static_cast<int>(layers_.size());
  if (m == 0) {
    alpha_ = beta_ = WindowFunction::constant(base_t0_);
    return;
  }
  WindowFunction base;
  int r = -1;
  if (!repeat_layers_.empty()) {
    r = repeat_layers_.back();
    base = counters_.back()->start;
  } else {
    base = WindowFunction::constant(base_t0_);
  }
  base = base + shifts(r, m - 1);
  alpha_ = base + layers_[m - 1].alpha;
  beta_ = base + layers_[m - 1].beta;
}

ParamBox NestedOperator::live_box() const {
  ParamBox box;
  for (const auto& l : layers_) box = box * l.theta;
  return box;
}

double NestedOperator::value(const ValueFunction& v, double x, double t, std::span<const double> tau) const {
  if (complete_) return std::numeric_limits<double>::infinity();
  const double a = alpha_.eval(tau);
  const double b = beta_.eval(tau);
  if (t <= a) return v.eval(x, t - a);
  if (t <= b + 1e-9) return v.predicate()(x);
  throw std::logic_error("operator queried past its active window (missed advance)");
}

OperatorPartials NestedOperator::partials(const ValueFunction& v, double x, double t, std::span<const double> tau) const {
  OperatorPartials p;
  if (complete_) {
    p.value = std::numeric_limits<double>::infinity();
    return p;
  }
  const double a = alpha_.eval(tau);
  const double b = beta_.eval(tau);
  if (t <= a) {
    p.value = v.eval(x, t - a);
    auto [gt, gx] = v.gradients(x, t - a);
    p.d_t = gt;
    p.d_x = gx;
    for (std::size_t i = 0; i < alpha_.slots.size(); ++i) p.d_tau.emplace_back(alpha_.slots[i], -alpha_.a1[i] * gt);
    return p;
  }
  if (t > b + 1e-9) throw std::logic_error("operator queried past its active window (missed advance)");
  p.plateau = true;
  p.value = v.predicate()(x);
  p.d_x = v.predicate().grad(x);
  return p;
}

bool NestedOperator::elapsed(double t, std::span<const double> tau, double eps_t) const {
  return !complete_ && t >= beta_.eval(tau) - eps_t;
}

WindowRecord NestedOperator::record_window(std::span<const double> tau) {
  WindowRecord rec;
  rec.layer = repeat_layers_.empty() ? -1 : repeat_layers_.back();
  rec.j = counters_.empty() ? 1 : counters_.back()->j;
  rec.alpha = alpha_.eval(tau);
  rec.beta = beta_.eval(tau);
  std::vector<int> seen;
  for (const auto* w : {&alpha_, &beta_})
    for (int s : w->slots)
      if (std::find(seen.begin(), seen.end(), s) == seen.end()) {
        seen.push_back(s);
        rec.frozen.emplace_back(s, tau[s]);
      }
  history_.push_back(rec);
  return rec;
}

std::vector<int> NestedOperator::slots_inside(int layer) const {
  std::vector<int> out;
  for (int i = layer + 1; i < static_cast<int>(layers_.size()); ++i)
    for (const auto& b : layers_[i].theta.bounds)
      if (std::find(out.begin(), out.end(), b.slot) == out.end()) out.push_back(b.slot);
  return out;
}

std::vector<int> NestedOperator::rearm_inside(std::size_t ri) {
  WindowFunction block = counters_[ri]->start;
  int prev = repeat_layers_[ri];
  for (std::size_t k = ri + 1; k < repeat_layers_.size(); ++k) {
    const int r = repeat_layers_[k];
    block = block + shifts(prev, r);
    counters_[k]->arm(block, layers_[r]);
    block = counters_[k]->start;
    prev = r;
  }
  refresh();
  return slots_inside(repeat_layers_[ri]);
}

AdvanceResult NestedOperator::advance(double t, std::span<const double> tau, double eps_t) {
  if (complete_) throw std::logic_error("advance on a complete operator");
  if (!elapsed(t, tau, eps_t)) throw std::logic_error("advance called before the window end was reached");
  AdvanceResult res;
  const WindowRecord rec = record_window(tau);
  res.end = rec.beta;
  for (const auto& [s, v] : rec.frozen) res.frozen.push_back(s);
  for (std::size_t k = counters_.size(); k-- > 0;) {
    auto& c = *counters_[k];
    if (c.close_iteration(res.end, c.deadline.eval(tau))) {
      res.minted = rearm_inside(k);
      return res;
    }
  }
  complete_ = true;
  res.complete = true;
  return res;
}

double NestedOperator::min_duration_from(int layer) const {
  const int m = static_cast<int>(layers_.size());
  if (layer >= m) return 0.0;
  const auto& L = layers_[layer];
  if (layer == m - 1) return window_min(L.beta, L.theta);
  if (!L.always_like()) return window_min(L.alpha, L.theta) + min_duration_from(layer + 1);
  const double inner = min_duration_from(layer + 1);
  double e = window_min(L.alpha, L.theta);
  const double deadline = window_min(L.beta, L.theta);
  if (inner <= 1e-12) return std::max(e, deadline);
  while (true) {
    e += inner;
    if (e > deadline) return e;
  }
}

std::string NestedOperator::dump() const {
  std::ostringstream os;
  os << "layers:";
  for (const auto& l : layers_) {
    os << " " << to_string(l.kind) << "[" << l.alpha.a0;
    for (std::size_t i = 0; i < l.alpha.slots.size(); ++i) os << "+t" << l.alpha.slots[i];
    os << "," << l.beta.a0;
    for (std::size_t i = 0; i < l.beta.slots.size(); ++i) os << "+t" << l.beta.slots[i];
    os << "]";
  }
  os << "\ncounters:";
  for (std::size_t k = 0; k < counters_.size(); ++k)
    os << " L" << repeat_layers_[k] << ":j=" << counters_[k]->j << (counters_[k]->complete ? "(done)" : "");
  os << "\n";
  for (const auto& w : history_) {
    os << "window layer=" << w.layer << " j=" << w.j << " [" << w.alpha << ", " << w.beta << "] tau={";
    for (std::size_t i = 0; i < w.frozen.size(); ++i)
      os << (i ? ", " : "") << "t" << w.frozen[i].first << "=" << w.frozen[i].second;
    os << "}\n";
  }
  return os.str();
}

NestedOperator compose(const OperatorLayer& outer, const NestedOperator& inner) {
  NestedOperator out;
  out.layers_ = inner.layers_;
  if (outer.kind != LayerKind::Identity) {
    if (outer.always_like() && out.layers_.size() == 1 && out.layers_.front().always_like()) {
      OperatorLayer& first = out.layers_.front();
      OperatorLayer merged{outer.kind == LayerKind::UntilLeft ? LayerKind::UntilLeft : first.kind,
                           outer.alpha + first.alpha, outer.beta + first.beta, outer.theta * first.theta};
      first = merged;
    } else {
      out.layers_.insert(out.layers_.begin(), outer);
    }
  }
  out.classify();
  out.init(0.0);
  return out;
}

}  // namespace stlop
