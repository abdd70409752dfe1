#include "stlop/formula.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace stlop {

double BandPredicate::operator()(double x) const {
  const double d = x - x0;
  const double v = c * (r * r - d * d);
  return negated ? -v : v;
}

double BandPredicate::grad(double x) const {
  const double g = -2.0 * c * (x - x0);
  return negated ? -g : g;
}

double eval_predicate(const BandPredicate& p, double x) { return p(x); }

Formula Formula::predicate(std::string label) {
  Formula f;
  f.kind = NodeKind::Predicate;
  f.label = std::move(label);
  return f;
}

Formula Formula::negation(Formula child) {
  Formula f;
  f.kind = NodeKind::Not;
  f.children.push_back(std::move(child));
  return f;
}

namespace {

Formula nary(NodeKind kind, std::vector<Formula> children) {
  Formula f;
  f.kind = kind;
  for (auto& c : children) {
    if (c.kind == kind && !c.shared) {
      for (auto& g : c.children) f.children.push_back(std::move(g));
    } else {
      f.children.push_back(std::move(c));
    }
  }
  if (f.children.size() == 1) return std::move(f.children.front());
  return f;
}

void check_interval(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi))
    throw std::invalid_argument("invalid interval [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
}

Formula temporal(NodeKind kind, double lo, double hi, std::vector<Formula> children) {
  check_interval(lo, hi);
  Formula f;
  f.kind = kind;
  f.t_lo = lo;
  f.t_hi = hi;
  f.children = std::move(children);
  return f;
}

}  // namespace

Formula Formula::conj(std::vector<Formula> children) { return nary(NodeKind::And, std::move(children)); }
Formula Formula::disj(std::vector<Formula> children) { return nary(NodeKind::Or, std::move(children)); }

Formula Formula::always(double lo, double hi, Formula child) {
  return temporal(NodeKind::Always, lo, hi, {std::move(child)});
}
Formula Formula::eventually(double lo, double hi, Formula child) {
  return temporal(NodeKind::Eventually, lo, hi, {std::move(child)});
}
Formula Formula::until(double lo, double hi, Formula left, Formula right) {
  return temporal(NodeKind::Until, lo, hi, {std::move(left), std::move(right)});
}

ParseError::ParseError(const std::string& msg, std::size_t pos)
    : std::runtime_error(msg + " at position " + std::to_string(pos)), pos_(pos) {}

namespace {

class Parser {
 public:
  Parser(const std::string& text, const PredicateMap* preds) : s_(text), preds_(preds) {}

  Formula run() {
    Formula f = parse_or();
    skip_ws();
    if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
    return f;
  }

 private:
  const std::string& s_;
  const PredicateMap* preds_;
  std::size_t i_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, i_); }

  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  bool peek(char c) {
    skip_ws();
    return i_ < s_.size() && s_[i_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  // 'G', 'F' or 'U' immediately followed (modulo spaces) by '['
  bool at_operator(char op) {
    skip_ws();
    if (i_ >= s_.size() || s_[i_] != op) return false;
    std::size_t j = i_ + 1;
    while (j < s_.size() && std::isspace(static_cast<unsigned char>(s_[j]))) ++j;
    return j < s_.size() && s_[j] == '[';
  }

  double number() {
    skip_ws();
    const std::size_t start = i_;
    const char* begin = s_.c_str() + i_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected number");
    i_ += static_cast<std::size_t>(end - begin);
    if (!std::isfinite(v)) throw ParseError("non-finite bound", start);
    return v;
  }

  std::pair<double, double> interval() {
    const std::size_t at = i_;
    expect('[');
    const double lo = number();
    expect(',');
    const double hi = number();
    expect(']');
    if (lo < 0.0) throw ParseError("negative interval bound", at);
    if (lo > hi) throw ParseError("interval with t_lo > t_hi", at);
    return {lo, hi};
  }

  Formula parse_or() {
    std::vector<Formula> parts{parse_and()};
    while (peek('|')) {
      ++i_;
      parts.push_back(parse_and());
    }
    return parts.size() == 1 ? std::move(parts.front()) : Formula::disj(std::move(parts));
  }

  Formula parse_and() {
    std::vector<Formula> parts{parse_until()};
    while (peek('&')) {
      ++i_;
      parts.push_back(parse_until());
    }
    return parts.size() == 1 ? std::move(parts.front()) : Formula::conj(std::move(parts));
  }

  Formula parse_until() {
    Formula left = parse_unary();
    while (at_operator('U')) {
      ++i_;
      auto [lo, hi] = interval();
      Formula right = parse_unary();
      left = Formula::until(lo, hi, std::move(left), std::move(right));
    }
    return left;
  }

  Formula parse_unary() {
    skip_ws();
    if (i_ >= s_.size()) fail("unexpected end of formula");
    const std::size_t at = i_;
    if (s_[i_] == '!') {
      ++i_;
      Formula inner = parse_unary();
      return negate(std::move(inner), at);
    }
    if (at_operator('G') || at_operator('F')) {
      const char op = s_[i_++];
      auto [lo, hi] = interval();
      Formula child = parse_unary();
      return op == 'G' ? Formula::always(lo, hi, std::move(child)) : Formula::eventually(lo, hi, std::move(child));
    }
    if (s_[i_] == '(') {
      ++i_;
      Formula f = parse_or();
      expect(')');
      return f;
    }
    if (std::isalpha(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_') {
      std::size_t j = i_;
      while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
      std::string label = s_.substr(i_, j - i_);
      if (preds_ && !preds_->count(label)) throw ParseError("unknown predicate '" + label + "'", i_);
      i_ = j;
      return Formula::predicate(std::move(label));
    }
    fail("unexpected '" + std::string(1, s_[i_]) + "'");
  }

  // Negation is pushed to the predicates; temporal operands are rejected.
  Formula negate(Formula f, std::size_t at) {
    switch (f.kind) {
      case NodeKind::Predicate:
        return Formula::negation(std::move(f));
      case NodeKind::Not:
        return std::move(f.children.front());
      case NodeKind::And:
      case NodeKind::Or: {
        std::vector<Formula> parts;
        for (auto& c : f.children) parts.push_back(negate(std::move(c), at));
        return f.kind == NodeKind::And ? Formula::disj(std::move(parts)) : Formula::conj(std::move(parts));
      }
      default:
        throw ParseError("negation of a temporal sub-formula is not supported", at);
    }
  }
};

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void print(const Formula& f, std::ostringstream& os) {
  switch (f.kind) {
    case NodeKind::Predicate:
      os << f.label;
      return;
    case NodeKind::Not:
      os << "!" << f.children[0].label;
      return;
    case NodeKind::And:
    case NodeKind::Or: {
      const char* sep = f.kind == NodeKind::And ? " & " : " | ";
      os << "(";
      for (std::size_t k = 0; k < f.children.size(); ++k) {
        if (k) os << sep;
        print(f.children[k], os);
      }
      os << ")";
      return;
    }
    case NodeKind::Always:
    case NodeKind::Eventually:
      os << (f.kind == NodeKind::Always ? "G[" : "F[") << fmt_num(f.t_lo) << "," << fmt_num(f.t_hi) << "](";
      print(f.children[0], os);
      os << ")";
      return;
    case NodeKind::Until:
      os << "((";
      print(f.children[0], os);
      os << ") U[" << fmt_num(f.t_lo) << "," << fmt_num(f.t_hi) << "] (";
      print(f.children[1], os);
      os << "))";
      return;
  }
}

}  // namespace

Formula parse_formula(const std::string& text, const PredicateMap& predicates) {
  return Parser(text, &predicates).run();
}

Formula parse_formula(const std::string& text) { return Parser(text, nullptr).run(); }

std::string to_string(const Formula& f) {
  std::ostringstream os;
  print(f, os);
  return os.str();
}

namespace {

Formula normalize_rec(const Formula& f, int& next) {
  if (f.kind == NodeKind::Until) {
    const int id = next++;
    const double span = f.t_hi - f.t_lo;
    Formula left = normalize_rec(f.children[0], next);
    Formula right = normalize_rec(f.children[1], next);
    Formula g = Formula::always(0.0, f.t_lo, std::move(left));
    g.shared = SharedSlot{id, span};
    Formula e = Formula::eventually(f.t_lo, f.t_lo, std::move(right));
    e.shared = SharedSlot{id, span};
    Formula a;
    a.kind = NodeKind::And;
    a.children.push_back(std::move(g));
    a.children.push_back(std::move(e));
    return a;
  }
  Formula out = f;
  out.children.clear();
  for (const auto& c : f.children) out.children.push_back(normalize_rec(c, next));
  return out;
}

int max_slot(const Formula& f) {
  int m = f.shared ? f.shared->id : -1;
  for (const auto& c : f.children) m = std::max(m, max_slot(c));
  return m;
}

}  // namespace

Formula normalize_until(const Formula& f, int next_slot) {
  int next = std::max(next_slot, max_slot(f) + 1);
  return normalize_rec(f, next);
}

Formula merge_always(const Formula& f) {
  Formula out = f;
  out.children.clear();
  for (const auto& c : f.children) out.children.push_back(merge_always(c));
  while (out.kind == NodeKind::Always && out.children.size() == 1 && out.children[0].kind == NodeKind::Always &&
         !out.children[0].shared) {
    Formula inner = std::move(out.children[0]);
    out.t_lo += inner.t_lo;
    out.t_hi += inner.t_hi;
    out.children = std::move(inner.children);
  }
  return out;
}

double formula_horizon(const Formula& f) {
  double inner = 0.0;
  for (const auto& c : f.children) inner = std::max(inner, formula_horizon(c));
  const double slot = f.shared ? f.shared->span : 0.0;
  switch (f.kind) {
    case NodeKind::Always:
    case NodeKind::Eventually:
    case NodeKind::Until:
      return f.t_hi + slot + inner;
    default:
      return inner;
  }
}

std::vector<std::string> leaf_labels(const Formula& f) {
  if (f.kind == NodeKind::Predicate) return {f.label};
  std::vector<std::string> out;
  for (const auto& c : f.children) {
    auto sub = leaf_labels(c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

BandPredicate leaf_predicate(const Formula& leaf, const PredicateMap& predicates) {
  const bool neg = leaf.kind == NodeKind::Not;
  const std::string& label = neg ? leaf.children.at(0).label : leaf.label;
  auto it = predicates.find(label);
  if (it == predicates.end()) throw std::invalid_argument("unknown predicate '" + label + "'");
  BandPredicate p = it->second;
  p.label = label;
  if (neg) p.negated = !p.negated;
  return p;
}

}  // namespace stlop
