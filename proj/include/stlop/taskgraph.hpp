#pragma once

#include <Eigen/Dense>

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stlop/formula.hpp"
#include "stlop/operator.hpp"

namespace stlop {

struct StlVertex {
  enum class Type { Temporal, Logic, Predicate };
  Type type = Type::Predicate;
  NodeKind kind = NodeKind::Predicate;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::optional<SharedSlot> shared;
  std::string label;  // predicates
  bool negated = false;
  int parent = -1;
  std::vector<int> children;
  int depth = 0;
  int slot_key = -1;  // identifies the free parameter owned by this vertex (shared halves agree)
};

struct StlTree {
  std::vector<StlVertex> vertices;
  int root = 0;
  Formula formula;  // normalized form the tree was built from

  std::vector<int> leaves() const;  // predicate vertices, left to right
  std::vector<int> path_to(int v) const;  // root ... v
  bool is_ancestor(int a, int v) const;
  std::string to_dot() const;
};

// Builds the operator tree of an until-normalized formula (direct always-over-
// always pairs are folded first).
StlTree build_stl_tree(const Formula& f);

struct LogicNode {
  enum class Type { Leaf, And, Or };
  Type type = Type::Leaf;
  int parent = -1;
  std::vector<int> children;
  int depth = 0;
  int leaf = -1;  // index into LogicTree::leaves
};

struct LogicLeaf {
  int stl_vertex = -1;
  std::string label;
  bool negated = false;
  NestedOperator op;  // slots are independent-parameter indices
  std::vector<std::vector<int>> layer_vertices;  // STL vertices folded into each layer
  std::vector<int> stacked_keys;  // slot keys in outermost-first order
};

struct LogicTree {
  std::vector<LogicNode> nodes;
  int root = 0;
  std::vector<LogicLeaf> leaves;
  std::vector<int> slot_of_key;  // slot key -> independent index
  std::vector<SlotBounds> independent;  // bounds per independent index

  int leaf_node(int leaf) const;
  int lca(int a, int b) const;  // node ids
  std::string to_dot() const;
};

LogicTree build_logic_tree(const StlTree& t);

struct SigmaExpr {
  enum class Type { Leaf, Min, Max };
  Type type = Type::Leaf;
  int leaf = -1;
  std::vector<SigmaExpr> children;

  double eval(const std::vector<double>& leaf_values) const;
  std::string to_string() const;
  std::vector<int> leaves() const;  // e.g. "max{V1, min{V2, V3}}"
};

struct SigmaFold {
  SigmaExpr expr;
  // grouping steps of Alg. 1: each entry lists the leaf indices merged
  std::vector<std::vector<int>> steps;
};

SigmaFold fold_sigma_steps(const LogicTree& lt);
SigmaExpr fold_sigma(const LogicTree& lt);

struct ParamLayout {
  Eigen::MatrixXi A;      // stacked x stacked
  Eigen::MatrixXi A_hat;  // stacked x independent
  std::vector<int> stacked_leaf;
  std::vector<int> stacked_key;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  ParamBox theta;  // over independent indices

  int n_stacked() const { return static_cast<int>(stacked_key.size()); }
  int n_independent() const { return static_cast<int>(lb.size()); }
  Eigen::VectorXd expand(const Eigen::VectorXd& tau_hat) const { return (A_hat.cast<double>() * tau_hat).eval(); }
};

ParamLayout build_param_layout(const LogicTree& lt);

// sigma with every leaf in its initial window (no runtime); vfs indexed by leaf
double sigma_eval(const SigmaExpr& s, const LogicTree& lt, const ParamLayout& layout,
                  const std::vector<const ValueFunction*>& vfs, double x, double t, const Eigen::VectorXd& tau_hat);

// Horizon for value-function grids: sum of the largest window end over the
// layers of each leaf, plus the widest outer window, rounded up.
double required_vf_horizon(const LogicTree& lt);

// ---- runtime state of one simulation ----

struct ElapseEvent {
  int leaf = -1;
  double t = 0.0;
  double end = 0.0;
  bool satisfied = true;
  WindowRecord window;
};

struct RuntimeEvents {
  std::vector<ElapseEvent> elapsed;
  std::vector<int> failed;   // leaves that violated their plateau this step
  std::vector<int> frozen;   // slots frozen this step
  std::vector<int> minted;   // slots reset this step
  std::vector<int> repetitions;  // STL vertices that started a new iteration
};

class TaskRuntime {
 public:
  TaskRuntime(const StlTree& stl, const LogicTree& lt, double eps_sat = 0.01, double eps_t = 1e-9);

  void reset(double t0 = 0.0);

  int n_leaves() const { return static_cast<int>(leaves_.size()); }
  const NestedOperator& op(int k) const { return leaves_[k]; }
  const BandPredicate& predicate(int k) const;
  bool active(int k) const;
  bool complete() const { return vstate_[stl_->root].complete; }
  bool failed() const { return vstate_[stl_->root].failed; }
  std::string failure() const { return failure_; }

  // +inf for discharged or cancelled leaves, -inf for failed ones
  double inactive_value(int k) const;

  // After the state update at time t: plateau tracking, elapse detection and
  // repetition bookkeeping. tau/frozen are indexed by independent slot;
  // minted slots are reset to tau_init.
  RuntimeEvents update(double t, double x, std::vector<double>& tau, std::vector<char>& frozen,
                       const std::vector<double>& tau_init);

  double leaf_value(int k, const ValueFunction& v, double x, double t, std::span<const double> tau) const;

  // Repeat counter of an STL vertex (null when the vertex does not repeat).
  const RepeatCounter* counter(int vertex) const;
  std::string dump() const;

  void attach_predicates(const PredicateMap& preds);

 private:
  struct VState {
    bool complete = false;
    bool failed = false;
    double time = 0.0;
  };
  const StlTree* stl_;
  const LogicTree* lt_;
  double eps_sat_;
  double eps_t_;
  std::vector<NestedOperator> leaves_;
  std::vector<BandPredicate> preds_;
  std::vector<int> leaf_of_vertex_;
  std::map<int, std::shared_ptr<RepeatCounter>> counters_;
  std::vector<VState> vstate_;
  std::string failure_;

  std::vector<std::vector<std::pair<int, std::size_t>>> repeat_of_leaf_;  // (vertex, counter index)
  bool cancelled(int v) const;
  bool doomed(int v) const;
  void complete_vertex(int v, double time, std::vector<double>& tau, std::vector<char>& frozen,
                       const std::vector<double>& tau_init, RuntimeEvents& ev);
  void fail_vertex(int v, RuntimeEvents& ev);
  void rearm(int v, std::vector<double>& tau, std::vector<char>& frozen, const std::vector<double>& tau_init,
             RuntimeEvents& ev);
  std::vector<int> leaves_below(int v) const;
};

// Leaf values under the runtime state (inactive leaves substituted).
std::vector<double> leaf_values(const TaskRuntime& rt, const std::vector<const ValueFunction*>& vfs, double x, double t,
                                std::span<const double> tau);
double sigma_eval(const SigmaExpr& s, const TaskRuntime& rt, const std::vector<const ValueFunction*>& vfs, double x,
                  double t, std::span<const double> tau);

}  // namespace stlop
