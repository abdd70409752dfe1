#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlop {

// h(x) = c (r^2 - (x - x0)^2); a negated predicate flips the sign of h.
struct BandPredicate {
  double c = 1.0;
  double r = 1.0;
  double x0 = 0.0;
  std::string label;
  bool negated = false;

  double operator()(double x) const;
  double grad(double x) const;
  // peak value c r^2, used to scale tolerances
  double magnitude() const { return c * r * r; }
};

double eval_predicate(const BandPredicate& p, double x);

using PredicateMap = std::map<std::string, BandPredicate>;

enum class NodeKind { Predicate, Not, And, Or, Always, Eventually, Until };

// Slot shared between the two halves of a decomposed until. The window of the
// owning temporal node becomes [t_lo, t_hi + tau] (always) or
// [t_lo + tau, t_hi + tau] (eventually) with tau in [0, span].
struct SharedSlot {
  int id = -1;
  double span = 0.0;
  bool operator==(const SharedSlot&) const = default;
};

struct Formula {
  NodeKind kind = NodeKind::Predicate;
  std::string label;  // Predicate only
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::vector<Formula> children;
  std::optional<SharedSlot> shared;  // set by normalize_until

  bool operator==(const Formula&) const = default;

  bool is_temporal() const {
    return kind == NodeKind::Always || kind == NodeKind::Eventually || kind == NodeKind::Until;
  }

  static Formula predicate(std::string label);
  static Formula negation(Formula child);
  static Formula conj(std::vector<Formula> children);
  static Formula disj(std::vector<Formula> children);
  static Formula always(double lo, double hi, Formula child);
  static Formula eventually(double lo, double hi, Formula child);
  static Formula until(double lo, double hi, Formula left, Formula right);
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t pos);
  std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

Formula parse_formula(const std::string& text, const PredicateMap& predicates);
// Grammar check only; labels are not resolved.
Formula parse_formula(const std::string& text);

std::string to_string(const Formula& f);

// Rewrites every until into And(G-shared(0, lo+tau, L), F-shared(lo+tau, lo+tau, R)).
// Slot ids are numbered from next_slot upward in pre-order; already-shared
// nodes keep their ids, so the rewrite is idempotent.
Formula normalize_until(const Formula& f, int next_slot = 0);

// G[a',b'] G[a,b] phi -> G[a'+a, b'+b] phi, applied wherever an always is the
// direct child of an always (shared slots carried over).
Formula merge_always(const Formula& f);

// Maximum time the formula looks ahead from its evaluation time.
double formula_horizon(const Formula& f);

// Labels in left-to-right leaf order (one per occurrence).
std::vector<std::string> leaf_labels(const Formula& f);

// Predicate with the sign implied by an enclosing Not.
BandPredicate leaf_predicate(const Formula& leaf, const PredicateMap& predicates);

}  // namespace stlop
