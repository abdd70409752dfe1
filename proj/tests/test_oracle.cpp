#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "stlop/oracle.hpp"

using namespace stlop;

namespace {

PredicateMap preds() {
  return {{"p1", BandPredicate{10, 0.25, 1.0, "p1"}}, {"p2", BandPredicate{10, 0.25, 0.0, "p2"}}};
}

SampledSignal sampled(double (*fn)(double), double T, double dt = 0.01) {
  std::vector<double> t, x;
  for (int n = 0; n * dt <= T + 1e-9; ++n) {
    t.push_back(n * dt);
    x.push_back(fn(n * dt));
  }
  return SampledSignal(t, x);
}

double ramp(double t) { return 0.25 * t; }

// Direct grid evaluation of p1 U[a,b] p2 on the same samples, written from the
// textbook definition.
double until_brute(const SampledSignal& s, const PredicateMap& m, double a, double b) {
  double best = -INFINITY;
  const auto& h1 = m.at("p1");
  const auto& h2 = m.at("p2");
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const double tk = s.times[k];
    if (tk < a - 1e-9 || tk > b + 1e-9) continue;
    double lhs = INFINITY;
    for (std::size_t j = 0; j <= k; ++j) lhs = std::min(lhs, h1(s.states[j]));
    best = std::max(best, std::min(h2(s.states[k]), lhs));
  }
  return best;
}

}  // namespace

TEST_CASE("constant signal at the band centre") {
  const SampledSignal s({0.0, 10.0}, {1.0, 1.0});
  CHECK(robustness(parse_formula("G[0,5](p1)"), preds(), s) == doctest::Approx(0.625));
  CHECK(robustness(parse_formula("F[0,5](!p1)"), preds(), s) == doctest::Approx(-0.625));
  CHECK(satisfied(parse_formula("G[0,5](p1)"), preds(), s) == Verdict::Sat);
}

TEST_CASE("boolean and temporal combinators") {
  const auto s = sampled(ramp, 12.0);
  const auto m = preds();
  const double g = robustness(parse_formula("G[0,4](p1)"), m, s);
  const double f = robustness(parse_formula("F[0,4](p1)"), m, s);
  CHECK(f == doctest::Approx(0.625));  // x = 1 at t = 4
  CHECK(g == doctest::Approx(m.at("p1")(0.0)));
  CHECK(robustness(parse_formula("G[0,4](p1) & F[0,4](p1)"), m, s) == doctest::Approx(std::min(f, g)));
  CHECK(robustness(parse_formula("G[0,4](p1) | F[0,4](p1)"), m, s) == doctest::Approx(std::max(f, g)));
  CHECK(robustness(parse_formula("!p1"), m, s, 4.0) == doctest::Approx(-0.625));
  // evaluation time shifts windows
  CHECK(robustness(parse_formula("F[0,1](p1)"), m, s, 3.0) == doctest::Approx(0.625));
}

TEST_CASE("until against a direct evaluation") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto m = preds();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> t, x;
    double v = 0.5;
    for (int n = 0; n <= 600; ++n) {
      t.push_back(n * 0.01);
      v += 0.02 * (U(rng) - 0.5);
      x.push_back(v);
    }
    const SampledSignal s(t, x);
    const double a = std::round(U(rng) * 20) / 10, b = a + std::round(U(rng) * 20) / 10;
    const auto f = Formula::until(a, b, Formula::predicate("p1"), Formula::predicate("p2"));
    CHECK(robustness(f, m, s) == doctest::Approx(until_brute(s, m, a, b)).epsilon(1e-9));
  }
}

TEST_CASE("refinement keeps robustness on a smooth signal") {
  const auto s = sampled(ramp, 12.0, 0.05);
  const auto f = parse_formula("F[1,3](G[0,1](p1))");
  CHECK(robustness(f, preds(), s.refined(4)) == doctest::Approx(robustness(f, preds(), s)).epsilon(0.02));
  CHECK(s.refined(4).times.size() == (s.times.size() - 1) * 4 + 1);
  CHECK(s.at(0.025) == doctest::Approx(0.25 * 0.025));
}

TEST_CASE("signal errors") {
  CHECK_THROWS(SampledSignal({0.0, 0.0}, {1.0, 2.0}).validate());
  CHECK_THROWS(SampledSignal({0.0, 1.0}, {1.0}).validate());
  const SampledSignal s({0.0, 1.0}, {1.0, 1.0});
  CHECK_THROWS(robustness(parse_formula("G[0,5](p1)"), preds(), s));
  CHECK_THROWS(robustness(parse_formula("G[0,1](q)"), preds(), s));
}

TEST_CASE("verdicts") {
  CHECK(verdict_of(0.1) == Verdict::Sat);
  CHECK(verdict_of(-0.1) == Verdict::Unsat);
  CHECK(verdict_of(0.01) == Verdict::Marginal);
  CHECK(std::string(to_string(Verdict::Marginal)) == "marginal");
}

TEST_CASE("trace csv reader") {
  const auto dir = std::filesystem::temp_directory_path() / "stlop_oracle_csv";
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "ok.csv");
    os << "t,x,u\n0,1,0\n1,1,0\n2,1,0\n";
    std::ofstream bad(dir / "bad.csv");
    bad << "time,state\n0,1\n";
  }
  const auto s = read_signal_csv((dir / "ok.csv").string());
  CHECK(s.times.size() == 3);
  CHECK(robustness(parse_formula("G[0,2](p1)"), preds(), s) == doctest::Approx(0.625));
  CHECK_THROWS(read_signal_csv((dir / "bad.csv").string()));
  CHECK_THROWS(read_signal_csv((dir / "missing.csv").string()));
  std::filesystem::remove_all(dir);
}
