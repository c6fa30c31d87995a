#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace exoci {

struct QPSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // one multiplier per row of C, >= 0
  bool solved = false;
};

// min 1/2 x'Hx + g'x  subject to  C x >= b,  H positive definite.
// Dual active-set method of Goldfarb and Idnani; needs no feasible start
// and detects infeasible constraint sets.
QPSolution solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd& C, const Eigen::VectorXd& b);

// Smooth inequality-constrained program: min f(x) s.t. c_i(x) >= 0.
// `constraints(x, which)` returns the requested components only, so the
// solver can restrict finite differencing to the near-active rows.
struct NlpProblem {
  int n = 0;
  int m = 0;
  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const std::vector<int>&)>
      constraints;
};

struct SqpOptions {
  double fd_step = 1e-6;       // forward-difference step
  int max_iterations = 200;
  double feas_tol = 1e-9;      // constraint violation considered feasible
  double step_tol = 1e-9;      // stop when the QP step is this small
  double working_slack = 2e-3; // rows with slack below this join the working set
  int max_line_search = 30;
};

struct SqpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;      // length m, zero for rows never activated
  double objective = 0.0;
  double max_violation = 0.0;  // of the returned x, over all m rows
  bool converged = false;
  int iterations = 0;
};

// SQP with damped BFGS, a worst-violation merit line search and forward-
// difference gradients. Deterministic for identical inputs.
SqpResult sqp_minimize(const NlpProblem& prob, const Eigen::VectorXd& x0,
                       const SqpOptions& opts = {});

}  // namespace exoci
