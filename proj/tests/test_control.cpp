#include <doctest.h>

#include <random>

#include "stlop/control.hpp"
#include "stlop/oracle.hpp"
#include "stlop/qp.hpp"

using namespace stlop;

TEST_CASE("qp: unconstrained minimum inside the box") {
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  qp.g = Eigen::Vector2d(-2.0, -4.0);
  qp.C = Eigen::MatrixXd::Zero(0, 2);
  qp.d = Eigen::VectorXd::Zero(0);
  qp.lb = Eigen::Vector2d(-10, -10);
  qp.ub = Eigen::Vector2d(10, 10);
  const auto r = solve_qp(qp, Eigen::Vector2d::Zero());
  CHECK(r.converged);
  CHECK(r.z[0] == doctest::Approx(1.0));
  CHECK(r.z[1] == doctest::Approx(2.0));
}

TEST_CASE("qp: random small problems against grid search") {
  std::mt19937 rng(4);
  std::normal_distribution<double> N;
  for (int trial = 0; trial < 40; ++trial) {
    QpProblem qp;
    Eigen::Matrix2d M;
    M << N(rng), N(rng), N(rng), N(rng);
    qp.H = M * M.transpose() + 0.5 * Eigen::Matrix2d::Identity();
    qp.g = Eigen::Vector2d(N(rng), N(rng));
    qp.C = Eigen::MatrixXd(2, 2);
    qp.C << N(rng), N(rng), N(rng), N(rng);
    // z = 0 is feasible
    qp.d = Eigen::Vector2d(-std::abs(N(rng)), -std::abs(N(rng)));
    qp.lb = Eigen::Vector2d(-2, -2);
    qp.ub = Eigen::Vector2d(2, 2);
    const auto r = solve_qp(qp, Eigen::Vector2d::Zero());
    REQUIRE(r.converged);
    CHECK(qp_max_violation(qp, r.z) <= 1e-9);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 400; ++j) {
        const Eigen::Vector2d z(-2 + i * 0.01, -2 + j * 0.01);
        if (qp_max_violation(qp, z) > 0.0) continue;
        best = std::min(best, qp_objective(qp, z));
      }
    CHECK(r.objective <= best + 1e-9);
    CHECK(r.objective >= best - 0.05);
  }
}

TEST_CASE("qp: fixed variables and infeasible start") {
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2);
  qp.g = Eigen::Vector2d(-5.0, -5.0);
  qp.C = Eigen::MatrixXd::Zero(0, 2);
  qp.d = Eigen::VectorXd::Zero(0);
  qp.lb = Eigen::Vector2d(0.0, -1.0);
  qp.ub = Eigen::Vector2d(0.0, 1.0);
  const auto r = solve_qp(qp, Eigen::Vector2d::Zero());
  CHECK(r.z[0] == 0.0);
  CHECK(r.z[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(solve_qp(qp, Eigen::Vector2d(0.0, 3.0)), std::invalid_argument);
}

namespace {

StepInput interior_input() {
  StepInput in;
  in.t = 0.0;
  in.x = 1.0;
  in.tau = {0.5};
  in.frozen = {0};
  in.lb = Eigen::VectorXd::Constant(1, 0.0);
  in.ub = Eigen::VectorXd::Constant(1, 1.0);
  LeafTerm l;
  l.leaf = 0;
  l.p.value = 50.0;
  l.p.d_x = 0.1;
  l.p.d_tau = {{0, 0.1}};
  in.leaves = {l};
  in.sigma = 50.0;
  return in;
}

}  // namespace

TEST_CASE("controller: deep interior returns the references") {
  ControllerConfig cfg;
  cfg.u_ref = URef::constant(0.3);
  const auto in = interior_input();
  for (const auto& dyn : {Dynamics1D::affine(), Dynamics1D::non_affine(2.0, 1.5)}) {
    const auto out = controller_step(dyn, in, cfg);
    CHECK(out.u == doctest::Approx(0.3));
    CHECK(out.omega[0] == doctest::Approx(-cfg.k_omega * 0.5));
    CHECK(out.slack == doctest::Approx(0.0));
  }
  cfg.u_ref = URef::constant(3.0);
  CHECK(controller_step(Dynamics1D::affine(), in, cfg).u == doctest::Approx(0.5));
}

TEST_CASE("controller: active leaf constraint bends the input") {
  ControllerConfig cfg;
  auto in = interior_input();
  // V small and falling unless x increases
  in.leaves[0].p.value = 0.01;
  in.sigma = 0.01;
  in.leaves[0].p.d_t = -1.0;
  in.leaves[0].p.d_x = 2.0;
  const auto dyn = Dynamics1D::linear();
  const auto out = controller_step(dyn, in, cfg);
  const auto res = constraint_residuals(dyn, in, cfg, out.u, out.omega, out.slack);
  for (double r : res) CHECK(r >= -1e-7);
  CHECK(out.u > 0.0);
  // quadratic slack penalty: a tiny positive slack is optimal
  CHECK(out.slack <= 1e-4);
}

TEST_CASE("controller: frozen slots do not move, out-of-domain slots recover or fail") {
  ControllerConfig cfg;
  auto in = interior_input();
  in.frozen = {1};
  CHECK(controller_step(Dynamics1D::affine(), in, cfg).omega[0] == 0.0);
  in.frozen = {0};
  in.tau = {-1.0};
  const auto out = controller_step(Dynamics1D::affine(), in, cfg);
  CHECK(out.omega[0] >= 4.0 / 3.0 - 1e-9);
  in.tau = {-10.0};
  CHECK_THROWS_AS(controller_step(Dynamics1D::affine(), in, cfg), InfeasibleStep);
}

TEST_CASE("controller config validation") {
  ControllerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.delta = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.n_u = 1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("u_ref shapes") {
  CHECK(URef::zero()(3.0) == 0.0);
  CHECK(URef::constant(-1.0)(3.0) == -1.0);
  CHECK(URef::sine(1.0, 0.5)(M_PI) == doctest::Approx(1.0));
  CHECK(URef::sine(1.0, 0.5).describe() == "sin(1, 0.5)");
}

namespace {

Trace run_small(const std::string& formula, const Dynamics1D& dyn, double x0, const PredicateMap& preds,
                std::vector<ValueFunction>& store) {
  const auto pipe = Pipeline::build(parse_formula(formula, preds));
  GridSpec g;
  g.t_horizon = required_vf_horizon(pipe.logic);
  store.clear();
  for (const auto& l : pipe.logic.leaves) store.push_back(solve_value_function(dyn, preds.at(l.label), g));
  SimulationSetup s;
  s.dyn = dyn;
  s.predicates = preds;
  for (auto& v : store) s.vfs.push_back(&v);
  s.x0 = x0;
  for (int i = 0; i < pipe.layout.n_independent(); ++i) s.tau0.push_back(0.5 * (pipe.layout.lb[i] + pipe.layout.ub[i]));
  s.t_end = formula_horizon(pipe.formula);
  s.cfg.max_dx = 0.5 * (g.x_max - g.x_min) / (g.n_x - 1);
  return simulate(pipe, s);
}

}  // namespace

TEST_CASE("closed loop: holding an always inside the band") {
  PredicateMap preds{{"p1", BandPredicate{10, 0.25, 1.0, "p1"}}};
  std::vector<ValueFunction> store;
  const auto tr = run_small("G[0,5](p1)", Dynamics1D::affine(), 1.0, preds, store);
  CHECK(tr.complete);
  CHECK_FALSE(tr.aborted);
  for (const auto& r : tr.records)
    if (r.t <= 5.0) CHECK(r.sigma >= -1e-6);
  const SampledSignal sig(tr.times(), tr.states());
  CHECK(robustness(parse_formula("G[0,5](p1)"), preds, sig) > 0.0);
}

TEST_CASE("closed loop: reaching a band within an eventually window") {
  PredicateMap preds{{"p1", BandPredicate{10, 0.25, 1.0, "p1"}}};
  std::vector<ValueFunction> store;
  const auto tr = run_small("F[2,4](p1)", Dynamics1D::linear(), 0.0, preds, store);
  CHECK(tr.complete);
  const SampledSignal sig(tr.times(), tr.states());
  CHECK(robustness(parse_formula("F[2,4](p1)"), preds, sig) >= -0.05);
  CHECK(tr.slack_integral <= 1e-3 * std::max(1e-9, tr.sigma_integral));
}
