#include "stlop/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace stlop {

namespace {

// all constraints as rows a'z >= b
struct Rows {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

Rows stack_rows(const QpProblem& qp) {
  const int n = static_cast<int>(qp.g.size());
  std::vector<std::pair<Eigen::VectorXd, double>> rows;
  for (int i = 0; i < qp.C.rows(); ++i) rows.emplace_back(qp.C.row(i).transpose(), qp.d[i]);
  for (int i = 0; i < n; ++i) {
    if (qp.lb.size() == n && std::isfinite(qp.lb[i])) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[i] = 1.0;
      rows.emplace_back(e, qp.lb[i]);
    }
    if (qp.ub.size() == n && std::isfinite(qp.ub[i])) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[i] = -1.0;
      rows.emplace_back(e, -qp.ub[i]);
    }
  }
  Rows r{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), n), Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    r.A.row(static_cast<Eigen::Index>(i)) = rows[i].first.transpose();
    r.b[static_cast<Eigen::Index>(i)] = rows[i].second;
  }
  return r;
}

}  // namespace

double qp_objective(const QpProblem& qp, const Eigen::VectorXd& z) { return 0.5 * z.dot(qp.H * z) + qp.g.dot(z); }

double qp_max_violation(const QpProblem& qp, const Eigen::VectorXd& z) {
  const Rows r = stack_rows(qp);
  if (r.A.rows() == 0) return 0.0;
  return std::max(0.0, (r.b - r.A * z).maxCoeff());
}

namespace {

QpResult solve_free(const QpProblem& qp, const Eigen::VectorXd& z0, int max_iter);

}  // namespace

// Variables with lb == ub are substituted out before the active-set loop.
QpResult solve_qp(const QpProblem& qp, const Eigen::VectorXd& z0, int max_iter) {
  const int n = static_cast<int>(qp.g.size());
  if (qp.lb.size() != n || qp.ub.size() != n) return solve_free(qp, z0, max_iter);
  std::vector<int> freev;
  for (int i = 0; i < n; ++i)
    if (!(qp.ub[i] - qp.lb[i] <= 0.0)) freev.push_back(i);
  if (static_cast<int>(freev.size()) == n) return solve_free(qp, z0, max_iter);
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    if (std::find(freev.begin(), freev.end(), i) == freev.end()) {
      if (std::abs(z0[i] - qp.lb[i]) > 1e-9 * (1.0 + std::abs(qp.lb[i])))
        throw std::invalid_argument("qp: starting point is infeasible");
      fixed[i] = qp.lb[i];
    }
  const int m = static_cast<int>(freev.size());
  QpProblem r;
  r.H.resize(m, m);
  r.g.resize(m);
  r.C.resize(qp.C.rows(), m);
  r.lb.resize(m);
  r.ub.resize(m);
  const Eigen::VectorXd Hf = qp.H * fixed;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) r.H(a, b) = qp.H(freev[a], freev[b]);
    r.g[a] = qp.g[freev[a]] + Hf[freev[a]];
    r.C.col(a) = qp.C.col(freev[a]);
    r.lb[a] = qp.lb[freev[a]];
    r.ub[a] = qp.ub[freev[a]];
  }
  r.d = qp.d - qp.C * fixed;
  Eigen::VectorXd y0(m);
  for (int a = 0; a < m; ++a) y0[a] = z0[freev[a]];
  QpResult sub = solve_free(r, y0, max_iter);
  QpResult out;
  out.z = fixed;
  for (int a = 0; a < m; ++a) out.z[freev[a]] = sub.z[a];
  out.iterations = sub.iterations;
  out.converged = sub.converged;
  out.objective = qp_objective(qp, out.z);
  return out;
}

namespace {

QpResult solve_free(const QpProblem& qp, const Eigen::VectorXd& z0, int max_iter) {
  const int n = static_cast<int>(qp.g.size());
  if (qp.H.rows() != n || qp.H.cols() != n || z0.size() != n) throw std::invalid_argument("qp: dimension mismatch");
  if (qp.C.rows() != qp.d.size() || (qp.C.rows() > 0 && qp.C.cols() != n))
    throw std::invalid_argument("qp: constraint dimension mismatch");
  const Rows r = stack_rows(qp);
  const int m = static_cast<int>(r.A.rows());
  const double feas_tol = 1e-9;
  Eigen::VectorXd z = z0;
  for (int i = 0; i < m; ++i)
    if (r.A.row(i).dot(z) < r.b[i] - feas_tol * (1.0 + std::abs(r.b[i])))
      throw std::invalid_argument("qp: starting point is infeasible");

  std::vector<int> work;
  for (int i = 0; i < m; ++i)
    if (std::abs(r.A.row(i).dot(z) - r.b[i]) <= 1e-12 * (1.0 + std::abs(r.b[i]))) {
      // keep the working set linearly independent
      Eigen::MatrixXd W(static_cast<Eigen::Index>(work.size() + 1), n);
      for (std::size_t k = 0; k < work.size(); ++k) W.row(static_cast<Eigen::Index>(k)) = r.A.row(work[k]);
      W.row(static_cast<Eigen::Index>(work.size())) = r.A.row(i);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
      if (lu.rank() == W.rows()) work.push_back(i);
    }

  QpResult res;
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const int w = static_cast<int>(work.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + w, n + w);
    K.topLeftCorner(n, n) = qp.H;
    for (int k = 0; k < w; ++k) {
      K.block(0, n + k, n, 1) = -r.A.row(work[k]).transpose();
      K.block(n + k, 0, 1, n) = r.A.row(work[k]);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + w);
    rhs.head(n) = -(qp.H * z + qp.g);
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);
    const Eigen::VectorXd lambda = sol.tail(w);

    if (p.norm() <= 1e-9 * (1.0 + z.norm())) {
      int worst = -1;
      double most = -1e-12;
      for (int k = 0; k < w; ++k)
        if (lambda[k] < most) {
          most = lambda[k];
          worst = k;
        }
      if (worst < 0) {
        res.converged = true;
        break;
      }
      work.erase(work.begin() + worst);
      continue;
    }
    double alpha = 1.0;
    int block = -1;
    for (int i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ap = r.A.row(i).dot(p);
      if (ap >= -1e-14 * r.A.row(i).norm() * p.norm()) continue;
      const double step = (r.b[i] - r.A.row(i).dot(z)) / ap;
      if (step < alpha) {
        alpha = std::max(0.0, step);
        block = i;
      }
    }
    z += alpha * p;
    if (block >= 0) work.push_back(block);
  }
  res.z = z;
  res.objective = qp_objective(qp, z);
  return res;
}

}  // namespace

}  // namespace stlop
