#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stlop/formula.hpp"

namespace stlop {

struct Dynamics1D {
  enum class Kind { NonAffine, Affine, Linear };
  Kind kind = Kind::Linear;
  double a = 0.0;  // NonAffine only
  double b = 0.0;
  double u_min = -0.5;
  double u_max = 0.5;

  static Dynamics1D non_affine(double a, double b, double u_min = -0.5, double u_max = 0.5);
  static Dynamics1D affine(double u_min = -0.5, double u_max = 0.5);
  static Dynamics1D linear(double u_min = -0.5, double u_max = 0.5);

  double f(double x, double u) const;
  bool input_affine() const { return kind != Kind::NonAffine; }
  // f(x,u) = drift(x) + gain(x) u, valid when input_affine()
  double drift(double x) const;
  double gain(double x) const;
  // candidate set U* of the pointwise maximizer
  std::vector<double> input_candidates(double x) const;
  std::string describe() const;
  void validate() const;
};

double optimal_input(const Dynamics1D& dyn, double x, int grad_sign);

struct GridSpec {
  double x_min = -2.0;
  double x_max = 3.0;
  int n_x = 401;
  double t_horizon = 10.0;
  int n_t = 0;  // 0: t_horizon / 0.05 + 1
  double dt_int = 0.01;

  int resolved_n_t() const;
  std::string describe() const;
};

class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(BandPredicate p, GridSpec spec, std::vector<double> values);

  double eval(double x, double t) const;
  // (dV/dt, dV/dx)
  std::pair<double, double> gradients(double x, double t) const;

  const BandPredicate& predicate() const { return pred_; }
  const GridSpec& spec() const { return spec_; }
  int n_x() const { return spec_.n_x; }
  int n_t() const { return n_t_; }
  double x_at(int i) const { return spec_.x_min + i * dx_; }
  double t_at(int k) const { return -k * dt_; }  // k = 0 is t = 0
  double dx() const { return dx_; }
  double dt() const { return dt_; }
  double horizon() const { return spec_.t_horizon; }
  double node(int i, int k) const { return values_[static_cast<std::size_t>(i) * n_t_ + k]; }
  const std::vector<double>& raw() const { return values_; }
  int step_limited_nodes() const { return step_limited_; }
  void set_step_limited(int n) { step_limited_ = n; }

 private:
  BandPredicate pred_;
  GridSpec spec_;
  int n_t_ = 0;
  double dx_ = 0.0;
  double dt_ = 0.0;
  std::vector<double> values_;  // [i * n_t + k]
  int step_limited_ = 0;

  double node_dt(int i, int k) const;
  double node_dx(int i, int k) const;
  void locate(double x, double t, int& i, int& k, double& fx, double& ft) const;
};

ValueFunction solve_value_function(const Dynamics1D& dyn, const BandPredicate& p, const GridSpec& spec);

double eval_value(const ValueFunction& v, double x, double t);
std::pair<double, double> value_gradients(const ValueFunction& v, double x, double t);

// One Euler step of length dt with norm control: the step is halved until
// |dx| <= max_dx. Returns the number of halvings.
int euler_norm_controlled(const Dynamics1D& dyn, double& x, double u, double dt, double max_dx);

// Stable 64-bit key of (dynamics, predicate, grid), used by the on-disk cache.
std::uint64_t cache_key(const Dynamics1D& dyn, const BandPredicate& p, const GridSpec& spec);
bool save_value_function(const ValueFunction& v, const std::string& path, std::uint64_t key);
// Fails (returns false) on a missing file, a key mismatch or a size mismatch.
bool load_value_function(const std::string& path, std::uint64_t key, const BandPredicate& p, const GridSpec& spec,
                         ValueFunction& out);

}  // namespace stlop
