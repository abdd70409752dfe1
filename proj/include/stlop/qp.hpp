#pragma once

#include <Eigen/Dense>

namespace stlop {

// min 1/2 z'Hz + g'z  s.t.  C z >= d,  lb <= z <= ub   (H positive definite)
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
};

struct QpResult {
  Eigen::VectorXd z;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

double qp_objective(const QpProblem& qp, const Eigen::VectorXd& z);
double qp_max_violation(const QpProblem& qp, const Eigen::VectorXd& z);

// Primal active set from a feasible z0. Throws std::invalid_argument if z0 is
// not feasible.
QpResult solve_qp(const QpProblem& qp, const Eigen::VectorXd& z0, int max_iter = 200);

}  // namespace stlop
