#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "stlop/formula.hpp"
#include "stlop/operator.hpp"
#include "stlop/reachability.hpp"
#include "stlop/taskgraph.hpp"

namespace stlop {

struct URef {
  enum class Kind { Zero, Const, Sin };
  Kind kind = Kind::Zero;
  double value = 0.0;  // Const
  double amplitude = 1.0;
  double frequency = 1.0;  // rad/s

  static URef zero() { return {}; }
  static URef constant(double v) { return {Kind::Const, v, 0.0, 0.0}; }
  static URef sine(double amplitude, double frequency) { return {Kind::Sin, 0.0, amplitude, frequency}; }
  double operator()(double t) const;
  std::string describe() const;
};

struct ControllerConfig {
  double delta = 0.7;
  double k = 2.0;          // class-K slope for the leaf constraints
  double kappa_hat = 2.0;  // class-K slope for the slot barriers
  double k_omega = 0.2;    // omega_ref = -k_omega * tau_hat
  double dt = 0.01;
  double slack_weight = 1e4;
  double slack_max = 1e3;
  double omega_max = 5.0;
  int n_u = 41;  // input grid for non-affine dynamics
  double eps_strict = 1e-9;
  double eps_sat = 0.01;
  double max_dx = 0.05;  // Euler norm control
  URef u_ref;

  void validate() const;
};

struct EnhancedState {
  double t = 0.0;
  double x = 0.0;
  std::vector<double> tau_hat;
};

struct LeafTerm {
  int leaf = -1;
  OperatorPartials p;
};

// Everything the per-step program needs at one instant.
struct StepInput {
  double t = 0.0;
  double x = 0.0;
  std::vector<double> tau;
  std::vector<char> frozen;
  double sigma = 0.0;
  std::vector<LeafTerm> leaves;  // live leaves only
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
};

struct ControlOutput {
  double u = 0.0;
  std::vector<double> omega;
  double slack = 0.0;
  int qp_iterations = 0;
  double objective = 0.0;
};

class InfeasibleStep : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// dV_k/dt along (f, omega)
double barrier_rate(const OperatorPartials& p, double f, std::span<const double> omega);
// slot barrier -(tau - lb)(tau - ub)
double slot_barrier(double tau, double lb, double ub);
// live leaves first, then the slots that are not frozen
std::vector<double> constraint_residuals(const Dynamics1D& dyn, const StepInput& in, const ControllerConfig& cfg,
                                         double u, std::span<const double> omega, double s);
std::vector<double> omega_reference(const StepInput& in, const ControllerConfig& cfg);
ControlOutput controller_step(const Dynamics1D& dyn, const StepInput& in, const ControllerConfig& cfg);

// ---- closed loop ----

struct Pipeline {
  Formula formula;  // as given
  StlTree stl;
  LogicTree logic;
  SigmaFold fold;
  ParamLayout layout;

  static Pipeline build(const Formula& f);
};

struct TraceRecord {
  double t = 0.0;
  double x = 0.0;
  std::vector<double> tau_hat;
  double u = 0.0;
  std::vector<double> omega;
  double sigma = 0.0;
  double slack = 0.0;
  std::vector<double> leaf_values;
  std::vector<std::pair<double, double>> windows;
  std::vector<int> counters;  // j per repeating vertex, ascending vertex id
};

struct TraceEvent {
  enum class Type { Elapse, Fail, Repeat };
  Type type = Type::Elapse;
  double t = 0.0;
  int leaf = -1;    // Elapse / Fail
  int vertex = -1;  // Repeat
  int j = 0;        // outermost counter value at the event
  double alpha = 0.0;
  double beta = 0.0;
};

struct Trace {
  std::vector<std::string> leaf_labels;
  std::vector<int> counter_vertices;
  std::vector<TraceRecord> records;
  std::vector<TraceEvent> events;
  bool complete = false;   // all obligations discharged
  bool aborted = false;
  std::string diagnostic;
  double complete_time = -1.0;
  double slack_integral = 0.0;
  double sigma_integral = 0.0;
  int slack_steps = 0;
  int qp_iterations = 0;

  std::vector<double> times() const;
  std::vector<double> states() const;
  void write_csv(const std::string& path) const;
};

struct SimulationSetup {
  Dynamics1D dyn;
  PredicateMap predicates;
  std::vector<const ValueFunction*> vfs;  // one per leaf
  double x0 = 0.0;
  std::vector<double> tau0;  // independent slots
  double t_end = 0.0;        // simulate at least until here
  ControllerConfig cfg;
};

Trace simulate(const Pipeline& pipe, const SimulationSetup& setup);

}  // namespace stlop
