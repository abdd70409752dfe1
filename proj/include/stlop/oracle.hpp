#pragma once

#include <string>
#include <vector>

#include "stlop/formula.hpp"

namespace stlop {

// Piecewise-linear signal.
struct SampledSignal {
  std::vector<double> times;
  std::vector<double> states;

  SampledSignal() = default;
  SampledSignal(std::vector<double> t, std::vector<double> x);

  void validate() const;
  double at(double t) const;
  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  // every interval split into `factor` equal pieces
  SampledSignal refined(int factor) const;
};

// Discrete-time robustness of the original formula (until kept primitive).
double robustness(const Formula& f, const PredicateMap& preds, const SampledSignal& sig, double t = 0.0);

enum class Verdict { Sat, Unsat, Marginal };
const char* to_string(Verdict v);
Verdict satisfied(const Formula& f, const PredicateMap& preds, const SampledSignal& sig, double t = 0.0,
                  double eps_disc = 0.05);
Verdict verdict_of(double rho, double eps_disc = 0.05);

// Reads a trace CSV (columns named t and x).
SampledSignal read_signal_csv(const std::string& path);

}  // namespace stlop
