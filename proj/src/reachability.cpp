#include "stlop/reachability.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace stlop {

Dynamics1D Dynamics1D::non_affine(double a, double b, double u_min, double u_max) {
  return {Kind::NonAffine, a, b, u_min, u_max};
}
Dynamics1D Dynamics1D::affine(double u_min, double u_max) { return {Kind::Affine, 0.0, 0.0, u_min, u_max}; }
Dynamics1D Dynamics1D::linear(double u_min, double u_max) { return {Kind::Linear, 0.0, 0.0, u_min, u_max}; }

double Dynamics1D::f(double x, double u) const {
  switch (kind) {
    case Kind::NonAffine:
      return -std::tanh(x) + a * x * u * u * u + b * u;
    case Kind::Affine:
      return -0.1 * std::tanh(x) + u * (0.5 * x + 1.0);
    case Kind::Linear:
      return 0.1 * x + u;
  }
  return 0.0;
}

double Dynamics1D::drift(double x) const {
  switch (kind) {
    case Kind::Affine:
      return -0.1 * std::tanh(x);
    case Kind::Linear:
      return 0.1 * x;
    default:
      throw std::logic_error("drift() on non-affine dynamics");
  }
}

double Dynamics1D::gain(double x) const {
  switch (kind) {
    case Kind::Affine:
      return 0.5 * x + 1.0;
    case Kind::Linear:
      return 1.0;
    default:
      throw std::logic_error("gain() on non-affine dynamics");
  }
}

std::vector<double> Dynamics1D::input_candidates(double x) const {
  std::vector<double> c{u_min, u_max};
  if (kind == Kind::NonAffine && x != 0.0 && a != 0.0) {
    const double q = -b / (3.0 * a * x);
    if (q >= 0.0) {
      const double uc = std::sqrt(q);
      if (uc >= u_min && uc <= u_max) c.push_back(uc);
      if (-uc >= u_min && -uc <= u_max) c.push_back(-uc);
    }
  }
  return c;
}

std::string Dynamics1D::describe() const {
  char buf[160];
  switch (kind) {
    case Kind::NonAffine:
      std::snprintf(buf, sizeof buf, "nonaffine(a=%.17g,b=%.17g,u=[%.17g,%.17g])", a, b, u_min, u_max);
      break;
    case Kind::Affine:
      std::snprintf(buf, sizeof buf, "affine(u=[%.17g,%.17g])", u_min, u_max);
      break;
    case Kind::Linear:
      std::snprintf(buf, sizeof buf, "linear(u=[%.17g,%.17g])", u_min, u_max);
      break;
  }
  return buf;
}

void Dynamics1D::validate() const {
  if (!(u_min < u_max) || !std::isfinite(u_min) || !std::isfinite(u_max))
    throw std::invalid_argument("input bounds must satisfy u_min < u_max and be finite");
}

double optimal_input(const Dynamics1D& dyn, double x, int grad_sign) {
  const auto cand = dyn.input_candidates(x);
  double best = cand.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (double u : cand) {
    // zero gradient: any input is optimal, prefer the one that moves least
    const double score = grad_sign == 0 ? -std::abs(dyn.f(x, u)) : grad_sign * dyn.f(x, u);
    if (score > best_score) {
      best_score = score;
      best = u;
    }
  }
  return best;
}

int GridSpec::resolved_n_t() const {
  if (n_t > 0) return n_t;
  return static_cast<int>(std::ceil(t_horizon / 0.05 - 1e-9)) + 1;
}

std::string GridSpec::describe() const {
  char buf[200];
  std::snprintf(buf, sizeof buf, "grid(x=[%.17g,%.17g]x%d,T=%.17g,nt=%d,dt=%.17g)", x_min, x_max, n_x, t_horizon,
                resolved_n_t(), dt_int);
  return buf;
}

ValueFunction::ValueFunction(BandPredicate p, GridSpec spec, std::vector<double> values)
    : pred_(std::move(p)), spec_(spec), n_t_(spec.resolved_n_t()), values_(std::move(values)) {
  dx_ = (spec_.x_max - spec_.x_min) / (spec_.n_x - 1);
  dt_ = spec_.t_horizon / (n_t_ - 1);
  if (values_.size() != static_cast<std::size_t>(spec_.n_x) * n_t_)
    throw std::invalid_argument("value grid size mismatch");
}

void ValueFunction::locate(double x, double t, int& i, int& k, double& fx, double& ft) const {
  if (t > 1e-9) throw std::domain_error("value function queried at t > 0");
  const double xc = std::clamp(x, spec_.x_min, spec_.x_max);
  const double xi = (xc - spec_.x_min) / dx_;
  i = std::min(static_cast<int>(xi), spec_.n_x - 2);
  fx = xi - i;
  const double tk = std::clamp(-t, 0.0, spec_.t_horizon) / dt_;
  k = std::min(static_cast<int>(tk), n_t_ - 2);
  ft = tk - k;
}

double ValueFunction::eval(double x, double t) const {
  int i, k;
  double fx, ft;
  locate(x, t, i, k, fx, ft);
  const double v0 = node(i, k) * (1 - fx) + node(i + 1, k) * fx;
  const double v1 = node(i, k + 1) * (1 - fx) + node(i + 1, k + 1) * fx;
  return v0 * (1 - ft) + v1 * ft;
}

double ValueFunction::node_dt(int i, int k) const {
  // k - 1 is the later time slice
  if (k == 0) return (node(i, 0) - node(i, 1)) / dt_;
  if (k == n_t_ - 1) return (node(i, k - 1) - node(i, k)) / dt_;
  return (node(i, k - 1) - node(i, k + 1)) / (2 * dt_);
}

double ValueFunction::node_dx(int i, int k) const {
  if (i == 0) return (node(1, k) - node(0, k)) / dx_;
  if (i == spec_.n_x - 1) return (node(i, k) - node(i - 1, k)) / dx_;
  return (node(i + 1, k) - node(i - 1, k)) / (2 * dx_);
}

std::pair<double, double> ValueFunction::gradients(double x, double t) const {
  int i, k;
  double fx, ft;
  locate(x, t, i, k, fx, ft);
  auto lerp2 = [&](auto&& g) {
    const double a0 = g(i, k) * (1 - fx) + g(i + 1, k) * fx;
    const double a1 = g(i, k + 1) * (1 - fx) + g(i + 1, k + 1) * fx;
    return a0 * (1 - ft) + a1 * ft;
  };
  const double gt = lerp2([this](int a, int b) { return node_dt(a, b); });
  const double gx = lerp2([this](int a, int b) { return node_dx(a, b); });
  return {gt, gx};
}

double eval_value(const ValueFunction& v, double x, double t) { return v.eval(x, t); }
std::pair<double, double> value_gradients(const ValueFunction& v, double x, double t) { return v.gradients(x, t); }

int euler_norm_controlled(const Dynamics1D& dyn, double& x, double u, double dt, double max_dx) {
  int halvings = 0;
  double remaining = dt;
  while (remaining > 1e-15) {
    double h = remaining;
    double v = dyn.f(x, u);
    while (std::abs(v * h) > max_dx && h > 1e-6) {
      h *= 0.5;
      ++halvings;
    }
    x += v * h;
    remaining -= h;
  }
  return halvings;
}

ValueFunction solve_value_function(const Dynamics1D& dyn, const BandPredicate& p, const GridSpec& spec) {
  dyn.validate();
  if (!(spec.t_horizon > 0.0)) throw std::invalid_argument("T_horizon must be positive");
  if (spec.n_x < 2 || spec.resolved_n_t() < 2) throw std::invalid_argument("grid needs at least 2 nodes per axis");
  if (!(spec.x_max > spec.x_min) || !(spec.dt_int > 0.0)) throw std::invalid_argument("invalid grid spec");

  const int nx = spec.n_x;
  const int nt = spec.resolved_n_t();
  const double dx = (spec.x_max - spec.x_min) / (nx - 1);
  const double dt_slice = spec.t_horizon / (nt - 1);
  const int sub = std::max(1, static_cast<int>(std::lround(dt_slice / spec.dt_int)));
  const double h0 = dt_slice / sub;
  const double max_dx = 0.5 * dx;
  const double margin = 0.05 * (spec.x_max - spec.x_min);
  const double lo = spec.x_min - margin, hi = spec.x_max + margin;

  std::vector<double> values(static_cast<std::size_t>(nx) * nt);
  int limited = 0;
  // The flow under u*(x) is autonomous, so the trajectory from node (x_i, t_k)
  // is the one from (x_i, 0) run for |t_k| seconds.
  for (int i = 0; i < nx; ++i) {
    const double xi = spec.x_min + i * dx;
    double x = xi;
    double best = p(x);
    values[static_cast<std::size_t>(i) * nt] = best;
    bool node_limited = false;
    for (int k = 1; k < nt; ++k) {
      for (int s = 0; s < sub; ++s) {
        double remaining = h0;
        while (remaining > 1e-15) {
          const double g = p.grad(x);
          const int sign = g > 0 ? 1 : (g < 0 ? -1 : 0);
          const double u = optimal_input(dyn, x, sign);
          const double v = dyn.f(x, u);
          double h = remaining;
          while (std::abs(v * h) > max_dx && h > 1e-6) h *= 0.5;
          if (std::abs(v * h) > max_dx) node_limited = true;
          x = std::clamp(x + v * h, lo, hi);
          remaining -= h;
          if (!std::isfinite(x)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "non-finite state integrating node x=%.6g, t=%.6g", xi, -k * dt_slice);
            throw std::runtime_error(buf);
          }
          best = std::max(best, p(x));
        }
      }
      values[static_cast<std::size_t>(i) * nt + k] = best;
    }
    if (node_limited) ++limited;
  }
  if (limited) spdlog::warn("value function {}: {} grid rows hit the minimum Euler step", p.label, limited);
  ValueFunction out(p, spec, std::move(values));
  out.set_step_limited(limited);
  return out;
}

std::uint64_t cache_key(const Dynamics1D& dyn, const BandPredicate& p, const GridSpec& spec) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "band(c=%.17g,r=%.17g,x0=%.17g,neg=%d)", p.c, p.r, p.x0, p.negated ? 1 : 0);
  const std::string text = "vf1|" + dyn.describe() + "|" + buf + "|" + spec.describe();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {
constexpr char kMagic[8] = {'S', 'T', 'L', 'O', 'P', 'V', 'F', '1'};
}

bool save_value_function(const ValueFunction& v, const std::string& path, std::uint64_t key) {
  std::ofstream os(path, std::ios::binary);
  if (!os) return false;
  const std::int32_t nx = v.n_x(), nt = v.n_t();
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&key), sizeof key);
  os.write(reinterpret_cast<const char*>(&nx), sizeof nx);
  os.write(reinterpret_cast<const char*>(&nt), sizeof nt);
  os.write(reinterpret_cast<const char*>(v.raw().data()), static_cast<std::streamsize>(v.raw().size() * sizeof(double)));
  return static_cast<bool>(os);
}

bool load_value_function(const std::string& path, std::uint64_t key, const BandPredicate& p, const GridSpec& spec,
                         ValueFunction& out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[8];
  std::uint64_t stored = 0;
  std::int32_t nx = 0, nt = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&stored), sizeof stored);
  is.read(reinterpret_cast<char*>(&nx), sizeof nx);
  is.read(reinterpret_cast<char*>(&nt), sizeof nt);
  if (!is || !std::equal(magic, magic + 8, kMagic) || stored != key || nx != spec.n_x || nt != spec.resolved_n_t())
    return false;
  std::vector<double> values(static_cast<std::size_t>(nx) * nt);
  is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!is) return false;
  out = ValueFunction(p, spec, std::move(values));
  return true;
}

}  // namespace stlop
