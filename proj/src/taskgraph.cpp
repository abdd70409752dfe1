#include "stlop/taskgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace stlop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Predicate:
      return "pred";
    case NodeKind::Not:
      return "not";
    case NodeKind::And:
      return "and";
    case NodeKind::Or:
      return "or";
    case NodeKind::Always:
      return "G";
    case NodeKind::Eventually:
      return "F";
    case NodeKind::Until:
      return "U";
  }
  return "?";
}

struct TreeBuilder {
  StlTree& t;
  std::map<int, int> shared_keys;
  int next_key = 0;

  int add(const Formula& f, int parent, int depth) {
    const int id = static_cast<int>(t.vertices.size());
    t.vertices.emplace_back();
    {
      StlVertex& v = t.vertices.back();
      v.parent = parent;
      v.depth = depth;
      v.kind = f.kind;
      v.t_lo = f.t_lo;
      v.t_hi = f.t_hi;
      v.shared = f.shared;
    }
    switch (f.kind) {
      case NodeKind::Predicate:
        t.vertices[id].type = StlVertex::Type::Predicate;
        t.vertices[id].label = f.label;
        return id;
      case NodeKind::Not:
        if (f.children.size() != 1 || f.children[0].kind != NodeKind::Predicate)
          throw std::invalid_argument("negation must sit directly on a predicate");
        t.vertices[id].type = StlVertex::Type::Predicate;
        t.vertices[id].kind = NodeKind::Predicate;
        t.vertices[id].label = f.children[0].label;
        t.vertices[id].negated = true;
        return id;
      case NodeKind::Until:
        throw std::invalid_argument("build_stl_tree expects an until-normalized formula");
      case NodeKind::And:
      case NodeKind::Or:
        t.vertices[id].type = StlVertex::Type::Logic;
        break;
      case NodeKind::Always:
      case NodeKind::Eventually:
        t.vertices[id].type = StlVertex::Type::Temporal;
        if (f.shared) {
          auto it = shared_keys.find(f.shared->id);
          if (it == shared_keys.end()) it = shared_keys.emplace(f.shared->id, next_key++).first;
          t.vertices[id].slot_key = it->second;
        } else if (f.kind == NodeKind::Eventually) {
          t.vertices[id].slot_key = next_key++;
        }
        break;
    }
    for (const auto& c : f.children) {
      const int cid = add(c, id, depth + 1);
      t.vertices[id].children.push_back(cid);
    }
    return id;
  }
};

OperatorLayer vertex_layer(const StlVertex& v, int slot) {
  if (v.kind == NodeKind::Always) {
    if (v.shared) return layer_always_shared(v.t_lo, v.t_hi, slot, v.shared->span);
    return layer_always(v.t_lo, v.t_hi);
  }
  if (v.shared) {
    if (v.t_lo < 0 || v.t_hi < v.t_lo || v.shared->span < 0) throw std::invalid_argument("invalid shared window");
    const ParamBox box{{{slot, 0.0, v.shared->span}}};
    return {LayerKind::UntilRight, WindowFunction::slot(v.t_lo, slot), WindowFunction::slot(v.t_hi, slot), box};
  }
  return layer_eventually(v.t_lo, v.t_hi, slot);
}

double span_of(const StlVertex& v) { return v.shared ? v.shared->span : v.t_hi - v.t_lo; }

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

// ---- STL tree ----

std::vector<int> StlTree::leaves() const {
  std::vector<int> out;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    const auto& vx = vertices[v];
    if (vx.type == StlVertex::Type::Predicate) out.push_back(v);
    for (auto it = vx.children.rbegin(); it != vx.children.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<int> StlTree::path_to(int v) const {
  std::vector<int> p;
  for (int u = v; u >= 0; u = vertices[u].parent) p.push_back(u);
  std::reverse(p.begin(), p.end());
  return p;
}

bool StlTree::is_ancestor(int a, int v) const {
  for (int u = vertices[v].parent; u >= 0; u = vertices[u].parent)
    if (u == a) return true;
  return false;
}

std::string StlTree::to_dot() const {
  std::ostringstream os;
  os << "digraph stl {\n";
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const auto& v = vertices[i];
    std::string label;
    if (v.type == StlVertex::Type::Predicate) {
      label = (v.negated ? "!" : "") + v.label;
    } else if (v.type == StlVertex::Type::Logic) {
      label = v.kind == NodeKind::And ? "&" : "|";
    } else {
      label = std::string(kind_name(v.kind)) + "[" + fmt_num(v.t_lo) + "," + fmt_num(v.t_hi) + "]";
      if (v.shared) label += " +tau" + std::to_string(v.slot_key);
    }
    os << "  n" << i << " [label=\"" << label << "\"];\n";
  }
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (int c : vertices[i].children) os << "  n" << i << " -> n" << c << ";\n";
  os << "}\n";
  return os.str();
}

StlTree build_stl_tree(const Formula& f) {
  StlTree t;
  t.formula = merge_always(normalize_until(f));
  TreeBuilder b{t, {}, 0};
  t.root = b.add(t.formula, -1, 0);
  return t;
}

// ---- logic tree ----

int LogicTree::leaf_node(int leaf) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].type == LogicNode::Type::Leaf && nodes[i].leaf == leaf) return static_cast<int>(i);
  throw std::out_of_range("no such leaf");
}

int LogicTree::lca(int a, int b) const {
  while (nodes[a].depth > nodes[b].depth) a = nodes[a].parent;
  while (nodes[b].depth > nodes[a].depth) b = nodes[b].parent;
  while (a != b) {
    a = nodes[a].parent;
    b = nodes[b].parent;
  }
  return a;
}

std::string LogicTree::to_dot() const {
  std::ostringstream os;
  os << "digraph logic {\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    std::string label;
    if (n.type == LogicNode::Type::Leaf)
      label = "V" + std::to_string(n.leaf + 1) + " (" + (leaves[n.leaf].negated ? "!" : "") + leaves[n.leaf].label + ")";
    else
      label = n.type == LogicNode::Type::And ? "&" : "|";
    os << "  n" << i << " [label=\"" << label << "\"];\n";
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int c : nodes[i].children) os << "  n" << i << " -> n" << c << ";\n";
  os << "}\n";
  return os.str();
}

LogicTree build_logic_tree(const StlTree& t) {
  LogicTree lt;
  const auto leaf_vs = t.leaves();

  // independent slots: first occurrence over leaves, outermost first
  int max_key = -1;
  for (const auto& v : t.vertices) max_key = std::max(max_key, v.slot_key);
  lt.slot_of_key.assign(static_cast<std::size_t>(max_key + 1), -1);
  for (int lv : leaf_vs)
    for (int u : t.path_to(lv)) {
      const auto& vx = t.vertices[u];
      if (vx.slot_key < 0) continue;
      int& idx = lt.slot_of_key[vx.slot_key];
      const double span = span_of(vx);
      if (idx < 0) {
        idx = static_cast<int>(lt.independent.size());
        lt.independent.push_back({idx, 0.0, span});
      } else if (std::abs(lt.independent[idx].hi - span) > 1e-12) {
        throw std::invalid_argument("inconsistent bounds between tied slots");
      }
    }

  for (int lv : leaf_vs) {
    LogicLeaf leaf;
    leaf.stl_vertex = lv;
    leaf.label = t.vertices[lv].label;
    leaf.negated = t.vertices[lv].negated;
    const auto path = t.path_to(lv);
    std::vector<int> temporal;
    for (int u : path) {
      if (t.vertices[u].type != StlVertex::Type::Temporal) continue;
      temporal.push_back(u);
      if (t.vertices[u].slot_key >= 0) leaf.stacked_keys.push_back(t.vertices[u].slot_key);
    }
    // innermost first, folding exactly as compose does
    NestedOperator op;
    std::vector<std::vector<int>> lv_layers;
    for (auto it = temporal.rbegin(); it != temporal.rend(); ++it) {
      const auto& vx = t.vertices[*it];
      const int slot = vx.slot_key >= 0 ? lt.slot_of_key[vx.slot_key] : -1;
      const OperatorLayer layer = vertex_layer(vx, slot);
      const std::size_t before = op.layers().size();
      op = compose(layer, op);
      if (op.layers().size() == before) {
        lv_layers.front().push_back(*it);
      } else {
        lv_layers.insert(lv_layers.begin(), std::vector<int>{*it});
      }
    }
    leaf.op = std::move(op);
    leaf.layer_vertices = std::move(lv_layers);
    lt.leaves.push_back(std::move(leaf));
  }

  // logic structure
  std::map<int, int> leaf_index;
  for (std::size_t i = 0; i < leaf_vs.size(); ++i) leaf_index[leaf_vs[i]] = static_cast<int>(i);
  auto build = [&](auto&& self, int v, int parent, int depth) -> int {
    const auto& vx = t.vertices[v];
    if (vx.type == StlVertex::Type::Temporal) return self(self, vx.children.front(), parent, depth);
    const int id = static_cast<int>(lt.nodes.size());
    lt.nodes.emplace_back();
    lt.nodes[id].parent = parent;
    lt.nodes[id].depth = depth;
    if (vx.type == StlVertex::Type::Predicate) {
      lt.nodes[id].type = LogicNode::Type::Leaf;
      lt.nodes[id].leaf = leaf_index.at(v);
      return id;
    }
    lt.nodes[id].type = vx.kind == NodeKind::And ? LogicNode::Type::And : LogicNode::Type::Or;
    for (int c : vx.children) {
      const int cid = self(self, c, id, depth + 1);
      lt.nodes[id].children.push_back(cid);
    }
    return id;
  };
  lt.root = build(build, t.root, -1, 0);
  for (const auto& n : lt.nodes)
    if (n.type != LogicNode::Type::Leaf && n.children.size() < 2)
      throw std::logic_error("logic tree is not proper");
  return lt;
}

// ---- sigma ----

double SigmaExpr::eval(const std::vector<double>& leaf_values) const {
  switch (type) {
    case Type::Leaf:
      return leaf_values.at(static_cast<std::size_t>(leaf));
    case Type::Min: {
      double v = kInf;
      for (const auto& c : children) v = std::min(v, c.eval(leaf_values));
      return v;
    }
    case Type::Max: {
      double v = -kInf;
      for (const auto& c : children) v = std::max(v, c.eval(leaf_values));
      return v;
    }
  }
  return 0.0;
}

std::string SigmaExpr::to_string() const {
  if (type == Type::Leaf) return "V" + std::to_string(leaf + 1);
  std::string s = type == Type::Min ? "min{" : "max{";
  for (std::size_t i = 0; i < children.size(); ++i) s += (i ? ", " : "") + children[i].to_string();
  return s + "}";
}

std::vector<int> SigmaExpr::leaves() const {
  if (type == Type::Leaf) return {leaf};
  std::vector<int> out;
  for (const auto& c : children) {
    auto sub = c.leaves();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

SigmaFold fold_sigma_steps(const LogicTree& lt) {
  SigmaFold out;
  std::vector<std::optional<SigmaExpr>> label(lt.nodes.size());
  for (std::size_t i = 0; i < lt.nodes.size(); ++i)
    if (lt.nodes[i].type == LogicNode::Type::Leaf) label[i] = SigmaExpr{SigmaExpr::Type::Leaf, lt.nodes[i].leaf, {}};

  // left-to-right order of inner nodes for tie-breaks
  std::vector<int> order;
  auto walk = [&](auto&& self, int v) -> void {
    order.push_back(v);
    for (int c : lt.nodes[v].children) self(self, c);
  };
  walk(walk, lt.root);
  auto leftmost_leaf = [&](int v) {
    while (!lt.nodes[v].children.empty()) v = lt.nodes[v].children.front();
    return lt.nodes[v].leaf;
  };

  while (!label[lt.root]) {
    // groups: inner nodes whose children are all (relabeled) leaves; the LCA of
    // such a group is the node itself
    int best = -1;
    for (int v : order) {
      const auto& n = lt.nodes[v];
      if (label[v] || n.children.empty()) continue;
      if (!std::all_of(n.children.begin(), n.children.end(), [&](int c) { return label[c].has_value(); })) continue;
      if (best < 0 || n.depth > lt.nodes[best].depth ||
          (n.depth == lt.nodes[best].depth && leftmost_leaf(v) < leftmost_leaf(best)))
        best = v;
    }
    const auto& n = lt.nodes[best];
    SigmaExpr e;
    e.type = n.type == LogicNode::Type::And ? SigmaExpr::Type::Min : SigmaExpr::Type::Max;
    for (int c : n.children) e.children.push_back(*label[c]);
    out.steps.push_back(e.leaves());
    label[best] = std::move(e);
  }
  out.expr = *label[lt.root];
  return out;
}

SigmaExpr fold_sigma(const LogicTree& lt) { return fold_sigma_steps(lt).expr; }

// ---- layout ----

ParamLayout build_param_layout(const LogicTree& lt) {
  ParamLayout p;
  for (std::size_t k = 0; k < lt.leaves.size(); ++k)
    for (int key : lt.leaves[k].stacked_keys) {
      p.stacked_leaf.push_back(static_cast<int>(k));
      p.stacked_key.push_back(key);
    }
  const int n = p.n_stacked();
  const int m = static_cast<int>(lt.independent.size());
  p.A = Eigen::MatrixXi::Zero(n, n);
  p.A_hat = Eigen::MatrixXi::Zero(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) p.A(i, j) = p.stacked_key[i] == p.stacked_key[j] ? 1 : 0;
    p.A_hat(i, lt.slot_of_key.at(static_cast<std::size_t>(p.stacked_key[i]))) = 1;
  }
  p.lb = Eigen::VectorXd::Zero(m);
  p.ub = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    p.lb[i] = lt.independent[i].lo;
    p.ub[i] = lt.independent[i].hi;
    p.theta.bounds.push_back(lt.independent[i]);
  }
  return p;
}

double sigma_eval(const SigmaExpr& s, const LogicTree& lt, const ParamLayout& layout,
                  const std::vector<const ValueFunction*>& vfs, double x, double t, const Eigen::VectorXd& tau_hat) {
  std::vector<double> tau(tau_hat.data(), tau_hat.data() + tau_hat.size());
  if (static_cast<int>(tau.size()) != layout.n_independent() || !layout.theta.contains(tau, 1e-9))
    throw std::out_of_range("tau_hat outside the parameter box");
  std::vector<double> vals(lt.leaves.size());
  for (std::size_t k = 0; k < lt.leaves.size(); ++k) vals[k] = lt.leaves[k].op.value(*vfs.at(k), x, t, tau);
  return s.eval(vals);
}

double required_vf_horizon(const LogicTree& lt) {
  double total = 0.0;
  double outer = 0.0;
  for (const auto& leaf : lt.leaves) {
    double sum = 0.0;
    const auto& layers = leaf.op.layers();
    for (const auto& l : layers) sum += window_max(l.beta, l.theta);
    total = std::max(total, sum);
    if (!layers.empty())
      outer = std::max(outer, window_max(layers.front().beta, layers.front().theta) -
                                  window_min(layers.front().alpha, layers.front().theta));
  }
  return std::max(1.0, std::ceil(total + outer));
}

// ---- runtime ----

TaskRuntime::TaskRuntime(const StlTree& stl, const LogicTree& lt, double eps_sat, double eps_t)
    : stl_(&stl), lt_(&lt), eps_sat_(eps_sat), eps_t_(eps_t) {
  leaf_of_vertex_.assign(stl.vertices.size(), -1);
  repeat_of_leaf_.resize(lt.leaves.size());
  for (std::size_t k = 0; k < lt.leaves.size(); ++k) {
    const auto& L = lt.leaves[k];
    leaf_of_vertex_[L.stl_vertex] = static_cast<int>(k);
    NestedOperator op = L.op;
    const auto& rl = op.repeat_layers();
    for (std::size_t ri = 0; ri < rl.size(); ++ri) {
      const auto& verts = L.layer_vertices.at(static_cast<std::size_t>(rl[ri]));
      if (verts.size() != 1) throw std::logic_error("repeating layer folded from several operators");
      const int v = verts.front();
      auto& c = counters_[v];
      if (!c) c = std::make_shared<RepeatCounter>();
      op.counters()[ri] = c;
      repeat_of_leaf_[k].emplace_back(v, ri);
    }
    leaves_.push_back(std::move(op));
  }
  for (const auto& [v, c] : counters_)
    for (int k : leaves_below(v)) {
      const auto& r = repeat_of_leaf_[k];
      if (std::none_of(r.begin(), r.end(), [v = v](const auto& e) { return e.first == v; }))
        throw std::invalid_argument("unsupported nesting: the always operator at vertex " + std::to_string(v) +
                                    " repeats for some predicates below it but not for predicate '" +
                                    lt.leaves[k].label + "'");
    }
  preds_.resize(lt.leaves.size());
  reset(0.0);
}

void TaskRuntime::attach_predicates(const PredicateMap& preds) {
  for (std::size_t k = 0; k < lt_->leaves.size(); ++k) {
    const auto& L = lt_->leaves[k];
    auto it = preds.find(L.label);
    if (it == preds.end()) throw std::invalid_argument("undeclared predicate '" + L.label + "'");
    preds_[k] = it->second;
    if (L.negated) preds_[k].negated = !preds_[k].negated;
  }
}

const BandPredicate& TaskRuntime::predicate(int k) const { return preds_.at(static_cast<std::size_t>(k)); }

void TaskRuntime::reset(double t0) {
  vstate_.assign(stl_->vertices.size(), VState{});
  failure_.clear();
  for (auto& op : leaves_) op.init(t0);
}

std::vector<int> TaskRuntime::leaves_below(int v) const {
  std::vector<int> out;
  for (std::size_t k = 0; k < leaves_.size(); ++k) {
    const int lv = lt_->leaves[k].stl_vertex;
    if (lv == v || stl_->is_ancestor(v, lv)) out.push_back(static_cast<int>(k));
  }
  return out;
}

bool TaskRuntime::cancelled(int v) const {
  for (int u = v; u >= 0; u = stl_->vertices[u].parent)
    if (vstate_[u].complete) return true;
  return false;
}

bool TaskRuntime::doomed(int v) const {
  for (int u = v; u >= 0; u = stl_->vertices[u].parent)
    if (vstate_[u].failed) return true;
  return false;
}

bool TaskRuntime::active(int k) const {
  const int v = lt_->leaves[k].stl_vertex;
  return !cancelled(v) && !doomed(v);
}

double TaskRuntime::inactive_value(int k) const {
  const int v = lt_->leaves[k].stl_vertex;
  if (doomed(v) && !cancelled(v)) return -kInf;
  return kInf;
}

double TaskRuntime::leaf_value(int k, const ValueFunction& v, double x, double t, std::span<const double> tau) const {
  if (!active(k)) return inactive_value(k);
  return leaves_[k].value(v, x, t, tau);
}

const RepeatCounter* TaskRuntime::counter(int vertex) const {
  auto it = counters_.find(vertex);
  return it == counters_.end() ? nullptr : it->second.get();
}

void TaskRuntime::fail_vertex(int v, RuntimeEvents& ev) {
  (void)ev;
  vstate_[v].failed = true;
  const int p = stl_->vertices[v].parent;
  if (p < 0 || vstate_[p].failed || vstate_[p].complete) return;
  const auto& pv = stl_->vertices[p];
  if (pv.type == StlVertex::Type::Logic && pv.kind == NodeKind::Or) {
    const bool all = std::all_of(pv.children.begin(), pv.children.end(), [&](int c) { return vstate_[c].failed; });
    if (!all) return;
  }
  fail_vertex(p, ev);
}

void TaskRuntime::complete_vertex(int v, double time, std::vector<double>& tau, std::vector<char>& frozen,
                                  const std::vector<double>& tau_init, RuntimeEvents& ev) {
  vstate_[v].complete = true;
  vstate_[v].time = time;
  const int p = stl_->vertices[v].parent;
  if (p < 0 || vstate_[p].complete) return;
  const auto& pv = stl_->vertices[p];
  if (pv.type == StlVertex::Type::Logic) {
    if (pv.kind == NodeKind::And) {
      double tmax = time;
      for (int c : pv.children) {
        if (!vstate_[c].complete) return;
        tmax = std::max(tmax, vstate_[c].time);
      }
      complete_vertex(p, tmax, tau, frozen, tau_init, ev);
    } else {
      complete_vertex(p, time, tau, frozen, tau_init, ev);
    }
    return;
  }
  auto it = counters_.find(p);
  if (it != counters_.end()) {
    auto& c = *it->second;
    if (c.close_iteration(time, c.deadline.eval(tau))) {
      rearm(p, tau, frozen, tau_init, ev);
      return;
    }
  }
  complete_vertex(p, time, tau, frozen, tau_init, ev);
}

void TaskRuntime::rearm(int v, std::vector<double>& tau, std::vector<char>& frozen, const std::vector<double>& tau_init,
                        RuntimeEvents& ev) {
  ev.repetitions.push_back(v);
  std::set<int> minted;
  for (std::size_t u = 0; u < stl_->vertices.size(); ++u)
    if (stl_->is_ancestor(v, static_cast<int>(u))) {
      vstate_[u] = VState{};
      const int key = stl_->vertices[u].slot_key;
      if (key >= 0) minted.insert(lt_->slot_of_key.at(static_cast<std::size_t>(key)));
    }
  for (int k : leaves_below(v)) {
    for (const auto& [rv, ri] : repeat_of_leaf_[k])
      if (rv == v) {
        for (int s : leaves_[k].rearm_inside(ri)) minted.insert(s);
      }
  }
  for (int s : minted) {
    tau[s] = tau_init[s];
    frozen[s] = 0;
    ev.minted.push_back(s);
  }
}

RuntimeEvents TaskRuntime::update(double t, double x, std::vector<double>& tau, std::vector<char>& frozen,
                                  const std::vector<double>& tau_init) {
  RuntimeEvents ev;
  if (complete() || failed()) return ev;
  std::vector<char> done(leaves_.size(), 0);

  // plateau tracking
  for (std::size_t k = 0; k < leaves_.size(); ++k) {
    if (!active(static_cast<int>(k))) continue;
    const double a = leaves_[k].alpha().eval(tau);
    if (t < a - eps_t_) continue;
    // window start is committed once the plateau begins
    const auto& aw = leaves_[k].alpha();
    for (std::size_t i = 0; i < aw.slots.size(); ++i) {
      const int s = aw.slots[i];
      if (aw.a1[i] != 0.0 && !frozen[s]) {
        frozen[s] = 1;
        ev.frozen.push_back(s);
      }
    }
    if (preds_[k](x) < -eps_sat_) {
      ev.failed.push_back(static_cast<int>(k));
      fail_vertex(lt_->leaves[k].stl_vertex, ev);
      if (failed() && failure_.empty()) {
        std::ostringstream os;
        os << "predicate '" << lt_->leaves[k].label << "' violated in its window at t=" << t << " (h=" << preds_[k](x)
           << ")";
        failure_ = os.str();
      }
    }
  }
  if (failed()) return ev;

  while (true) {
    int pick = -1;
    double pick_end = 0.0;
    for (std::size_t k = 0; k < leaves_.size(); ++k) {
      if (done[k] || !active(static_cast<int>(k))) continue;
      if (!leaves_[k].elapsed(t, tau, eps_t_)) continue;
      const double e = leaves_[k].beta().eval(tau);
      const int depth = stl_->vertices[lt_->leaves[k].stl_vertex].depth;
      if (pick < 0 || e < pick_end - 1e-12 ||
          (std::abs(e - pick_end) <= 1e-12 && depth > stl_->vertices[lt_->leaves[pick].stl_vertex].depth)) {
        pick = static_cast<int>(k);
        pick_end = e;
      }
    }
    if (pick < 0) break;
    done[pick] = 1;
    ElapseEvent e;
    e.leaf = pick;
    e.t = t;
    e.window = leaves_[pick].record_window(tau);
    e.end = e.window.beta;
    e.satisfied = true;
    for (const auto& [s, val] : e.window.frozen) {
      (void)val;
      if (!frozen[s]) ev.frozen.push_back(s);
      frozen[s] = 1;
    }
    ev.elapsed.push_back(e);
    complete_vertex(lt_->leaves[pick].stl_vertex, e.end, tau, frozen, tau_init, ev);
    if (complete()) break;
  }
  return ev;
}

std::string TaskRuntime::dump() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < leaves_.size(); ++k) {
    os << "leaf V" << k + 1 << " (" << lt_->leaves[k].label << ")"
       << (active(static_cast<int>(k)) ? "" : " inactive") << "\n"
       << leaves_[k].dump();
  }
  for (const auto& [v, c] : counters_) {
    os << "counter vertex " << v << ": j=" << c->j << (c->complete ? " done" : "") << " ends={";
    for (std::size_t i = 0; i < c->ends.size(); ++i) os << (i ? ", " : "") << c->ends[i];
    os << "}\n";
  }
  return os.str();
}

std::vector<double> leaf_values(const TaskRuntime& rt, const std::vector<const ValueFunction*>& vfs, double x, double t,
                                std::span<const double> tau) {
  std::vector<double> out(static_cast<std::size_t>(rt.n_leaves()));
  for (int k = 0; k < rt.n_leaves(); ++k) out[k] = rt.leaf_value(k, *vfs.at(static_cast<std::size_t>(k)), x, t, tau);
  return out;
}

double sigma_eval(const SigmaExpr& s, const TaskRuntime& rt, const std::vector<const ValueFunction*>& vfs, double x,
                  double t, std::span<const double> tau) {
  return s.eval(leaf_values(rt, vfs, x, t, tau));
}

}  // namespace stlop
