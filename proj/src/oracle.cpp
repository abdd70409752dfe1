#include "stlop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace stlop {

SampledSignal::SampledSignal(std::vector<double> t, std::vector<double> x) : times(std::move(t)), states(std::move(x)) {
  validate();
}

void SampledSignal::validate() const {
  if (times.size() < 2 || times.size() != states.size()) throw std::invalid_argument("signal needs >= 2 samples");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("signal times must be strictly increasing");
}

double SampledSignal::at(double t) const {
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
  return states[i - 1] + w * (states[i] - states[i - 1]);
}

SampledSignal SampledSignal::refined(int factor) const {
  if (factor < 1) throw std::invalid_argument("refinement factor must be >= 1");
  std::vector<double> t, x;
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    for (int k = 0; k < factor; ++k) {
      const double w = static_cast<double>(k) / factor;
      t.push_back(times[i] + w * (times[i + 1] - times[i]));
      x.push_back(states[i] + w * (states[i + 1] - states[i]));
    }
  t.push_back(times.back());
  x.push_back(states.back());
  return SampledSignal(std::move(t), std::move(x));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Monitor {
 public:
  Monitor(const PredicateMap& preds, const SampledSignal& sig) : preds_(preds), sig_(sig) {}

  double rho(const Formula& f, double t) {
    const long i = grid_index(t);
    if (i < 0) return compute(f, t);
    auto& memo = memo_[&f];
    if (memo.empty()) memo.assign(sig_.times.size(), std::numeric_limits<double>::quiet_NaN());
    double& slot = memo[static_cast<std::size_t>(i)];
    if (std::isnan(slot)) slot = compute(f, sig_.times[static_cast<std::size_t>(i)]);
    return slot;
  }

 private:
  const PredicateMap& preds_;
  const SampledSignal& sig_;
  std::unordered_map<const Formula*, std::vector<double>> memo_;

  long grid_index(double t) const {
    const auto& T = sig_.times;
    const auto it = std::lower_bound(T.begin(), T.end(), t - 1e-9);
    if (it != T.end() && std::abs(*it - t) <= 1e-9) return static_cast<long>(it - T.begin());
    return -1;
  }

  // window sample times: both endpoints plus the grid points strictly inside
  std::vector<double> window(double lo, double hi) const {
    std::vector<double> out{lo};
    const auto& T = sig_.times;
    for (auto it = std::upper_bound(T.begin(), T.end(), lo + 1e-9); it != T.end() && *it < hi - 1e-9; ++it)
      out.push_back(*it);
    if (hi > lo) out.push_back(hi);
    return out;
  }

  double compute(const Formula& f, double t) {
    switch (f.kind) {
      case NodeKind::Predicate: {
        auto it = preds_.find(f.label);
        if (it == preds_.end()) throw std::invalid_argument("undeclared predicate '" + f.label + "'");
        return it->second(sig_.at(t));
      }
      case NodeKind::Not:
        return -rho(f.children.at(0), t);
      case NodeKind::And: {
        double v = kInf;
        for (const auto& c : f.children) v = std::min(v, rho(c, t));
        return v;
      }
      case NodeKind::Or: {
        double v = -kInf;
        for (const auto& c : f.children) v = std::max(v, rho(c, t));
        return v;
      }
      case NodeKind::Always: {
        double v = kInf;
        for (double s : window(t + f.t_lo, t + f.t_hi)) v = std::min(v, rho(f.children.at(0), s));
        return v;
      }
      case NodeKind::Eventually: {
        double v = -kInf;
        for (double s : window(t + f.t_lo, t + f.t_hi)) v = std::max(v, rho(f.children.at(0), s));
        return v;
      }
      case NodeKind::Until: {
        const Formula& l = f.children.at(0);
        const Formula& r = f.children.at(1);
        // running min of the left operand over [t, t1]
        double run = kInf;
        for (double s : window(t, t + f.t_lo)) run = std::min(run, rho(l, s));
        double best = -kInf;
        for (double s : window(t + f.t_lo, t + f.t_hi)) {
          run = std::min(run, rho(l, s));
          best = std::max(best, std::min(rho(r, s), run));
        }
        return best;
      }
    }
    return 0.0;
  }
};

}  // namespace

double robustness(const Formula& f, const PredicateMap& preds, const SampledSignal& sig, double t) {
  sig.validate();
  const double h = formula_horizon(f);
  if (t < sig.t_begin() - 1e-9 || t + h > sig.t_end() + 1e-6)
    throw std::out_of_range("formula horizon exceeds the signal length");
  Monitor m(preds, sig);
  return m.rho(f, t);
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Sat:
      return "sat";
    case Verdict::Unsat:
      return "unsat";
    case Verdict::Marginal:
      return "marginal";
  }
  return "?";
}

Verdict verdict_of(double rho, double eps_disc) {
  if (rho >= eps_disc) return Verdict::Sat;
  if (rho <= -eps_disc) return Verdict::Unsat;
  return Verdict::Marginal;
}

Verdict satisfied(const Formula& f, const PredicateMap& preds, const SampledSignal& sig, double t, double eps_disc) {
  return verdict_of(robustness(f, preds, sig, t), eps_disc);
}

SampledSignal read_signal_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) head.push_back(cell);
  }
  const auto ti = std::find(head.begin(), head.end(), "t");
  const auto xi = std::find(head.begin(), head.end(), "x");
  if (ti == head.end() || xi == head.end()) throw std::runtime_error(path + ": needs columns t and x");
  const std::size_t ct = static_cast<std::size_t>(ti - head.begin());
  const std::size_t cx = static_cast<std::size_t>(xi - head.begin());
  std::vector<double> t, x;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() <= std::max(ct, cx)) throw std::runtime_error(path + ": short row");
    t.push_back(std::stod(cells[ct]));
    x.push_back(std::stod(cells[cx]));
  }
  return SampledSignal(std::move(t), std::move(x));
}

}  // namespace stlop
