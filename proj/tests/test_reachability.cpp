#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "stlop/reachability.hpp"
#include "support.hpp"

using namespace stlop;

namespace {

GridSpec small_grid(double T = 4.0) {
  GridSpec g;
  g.n_x = 201;
  g.t_horizon = T;
  return g;
}

}  // namespace

TEST_CASE("dynamics right-hand sides") {
  const auto na = Dynamics1D::non_affine(2.0, 1.5);
  CHECK(na.f(1.0, 0.5) == doctest::Approx(-std::tanh(1.0) + 2.0 * 0.125 + 0.75));
  const auto af = Dynamics1D::affine();
  CHECK(af.f(2.0, 0.5) == doctest::Approx(-0.1 * std::tanh(2.0) + 0.5 * 2.0));
  CHECK(af.drift(2.0) + af.gain(2.0) * 0.5 == doctest::Approx(af.f(2.0, 0.5)));
  const auto li = Dynamics1D::linear();
  CHECK(li.f(1.0, -0.5) == doctest::Approx(-0.4));
  CHECK_THROWS_AS(Dynamics1D::linear(1.0, -1.0).validate(), std::invalid_argument);
}

TEST_CASE("optimal input maximizes the directional rate over U") {
  const auto na = Dynamics1D::non_affine(2.0, 1.5);
  for (double x : {-1.8, -1.2, -0.4, 0.3, 1.0, 2.5}) {
    for (int s : {-1, 1}) {
      const double u = optimal_input(na, x, s);
      for (int k = 0; k <= 200; ++k) {
        const double v = -0.5 + k / 200.0;
        CHECK(s * na.f(x, u) >= s * na.f(x, v) - 1e-12);
      }
    }
  }
}

TEST_CASE("terminal slice equals h exactly and slices are monotone") {
  for (const auto& dyn : {Dynamics1D::non_affine(2.0, 1.5), Dynamics1D::affine(), Dynamics1D::linear()}) {
    const BandPredicate h{10, 0.25, 1.0, "p1"};
    const auto v = solve_value_function(dyn, h, small_grid());
    const double tol = 1e-6 * h.magnitude();
    int bad = 0;
    for (int i = 0; i < v.n_x(); ++i) {
      CHECK(v.node(i, 0) == h(v.x_at(i)));
      for (int k = 0; k + 1 < v.n_t(); ++k)
        if (v.node(i, k + 1) < v.node(i, k) - tol) ++bad;
      for (int k = 0; k < v.n_t(); ++k) CHECK(v.node(i, k) >= h(v.x_at(i)) - tol);
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("linear dynamics: first reach time of the band from 0") {
  // x' = 0.1 x + 0.5 from 0 reaches 0.75 at t* = 10 ln(1.15)
  const double t_star = 10.0 * std::log(1.15);
  const BandPredicate h{10, 0.25, 1.0, "p1"};
  GridSpec g = small_grid(3.0);
  g.n_x = 401;
  const auto v = solve_value_function(Dynamics1D::linear(), h, g);
  CHECK(v.eval(0.0, -(t_star + 0.1)) > 0.0);
  CHECK(v.eval(0.0, -(t_star - 0.1)) < 0.0);
  CHECK(support::brute_force_reach(Dynamics1D::linear(), h, 0.0, t_star + 0.1) >= 0.0);
  CHECK(support::brute_force_reach(Dynamics1D::linear(), h, 0.0, t_star - 0.1) < 0.0);
}

TEST_CASE("interpolation and gradients") {
  const BandPredicate h{10, 0.25, 1.0, "p1"};
  const auto v = solve_value_function(Dynamics1D::affine(), h, small_grid());
  // between two slices: bracketed by them
  const double x = v.x_at(100);
  const double t = 0.5 * (v.t_at(3) + v.t_at(4));
  const double lo = std::min(v.node(100, 3), v.node(100, 4));
  const double hi = std::max(v.node(100, 3), v.node(100, 4));
  CHECK(v.eval(x, t) >= lo - 1e-12);
  CHECK(v.eval(x, t) <= hi + 1e-12);
  CHECK(eval_value(v, x, t) == v.eval(x, t));
  // terminal slice gradient matches h' at the centre
  const auto [dt0, dx0] = v.gradients(1.0, 0.0);
  CHECK(std::abs(dx0) < 0.2);
  (void)dt0;
  // time derivative is non-positive in the stored convention up to tolerance
  for (int i = 0; i < v.n_x(); i += 10)
    for (int k = 1; k + 1 < v.n_t(); k += 7) CHECK(value_gradients(v, v.x_at(i), v.t_at(k)).first <= 1e-6);
  CHECK_THROWS_AS(v.eval(1.0, 0.5), std::domain_error);
}

TEST_CASE("norm-controlled Euler") {
  const auto li = Dynamics1D::linear();
  double x = 0.0;
  CHECK(euler_norm_controlled(li, x, 0.5, 0.1, 1.0) == 0);
  CHECK(x == doctest::Approx(0.05));
  x = 0.0;
  const int halvings = euler_norm_controlled(li, x, 0.5, 1.0, 0.1);
  CHECK(halvings >= 3);
  CHECK(std::abs(x - 5.0 * (std::exp(0.1) - 1.0)) < 5e-3);
}

TEST_CASE("value function cache round trip and key mismatch") {
  const BandPredicate h{10, 0.25, 1.0, "p1"};
  const auto dyn = Dynamics1D::linear();
  const auto g = small_grid(1.0);
  const auto v = solve_value_function(dyn, h, g);
  const auto dir = std::filesystem::temp_directory_path() / "stlop_unit_cache";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "v.bin").string();
  const auto key = cache_key(dyn, h, g);
  REQUIRE(save_value_function(v, path, key));
  ValueFunction w;
  REQUIRE(load_value_function(path, key, h, g, w));
  CHECK(w.raw() == v.raw());
  CHECK_FALSE(load_value_function(path, key + 1, h, g, w));
  CHECK(cache_key(dyn, h, g) != cache_key(Dynamics1D::affine(), h, g));
  BandPredicate h2 = h;
  h2.x0 = 1.5;
  CHECK(cache_key(dyn, h, g) != cache_key(dyn, h2, g));
  std::filesystem::remove_all(dir);
}
