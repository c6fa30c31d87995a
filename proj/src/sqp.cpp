#include "exoci/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace exoci {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rotate the new normal's coordinates into the first q+1 slots and append
// it as a column of R; the same rotations keep J consistent.
bool qp_add_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J, Eigen::VectorXd& d,
                       int q_before) {
  const int n = static_cast<int>(J.rows());
  for (int j = n - 1; j >= q_before + 1; --j) {
    const double cc = d(j - 1), ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    double c1 = cc / h, s1 = ss / h;
    if (c1 < 0.0) {
      c1 = -c1;
      s1 = -s1;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    const double xny = s1 / (1.0 + c1);
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j - 1), t2 = J(k, j);
      J(k, j - 1) = t1 * c1 + t2 * s1;
      J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
    }
  }
  const int q = q_before + 1;
  for (int i = 0; i < q; ++i) R(i, q - 1) = d(i);
  return std::fabs(d(q - 1)) > 1e-13 * (1.0 + d.head(q).cwiseAbs().maxCoeff());
}

// Remove active constraint l (and its multiplier); u holds the incoming
// constraint's multiplier in its last slot and shrinks by one with it.
void qp_drop_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J,
                        std::vector<int>& active, std::vector<double>& u, int l) {
  const int n = static_cast<int>(J.rows());
  const int q = static_cast<int>(active.size());
  for (int i = l; i < q - 1; ++i) R.col(i) = R.col(i + 1);
  active.erase(active.begin() + l);
  u.erase(u.begin() + l);
  const int qn = q - 1;  // active count after removal
  for (int j = l; j < qn; ++j) {
    const double cc = R(j, j), ss = R(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    double c1 = cc / h, s1 = ss / h;
    R(j + 1, j) = 0.0;
    if (c1 < 0.0) {
      R(j, j) = -h;
      c1 = -c1;
      s1 = -s1;
    } else {
      R(j, j) = h;
    }
    const double xny = s1 / (1.0 + c1);
    for (int k = j + 1; k < qn; ++k) {
      const double t1 = R(j, k), t2 = R(j + 1, k);
      R(j, k) = t1 * c1 + t2 * s1;
      R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
    }
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j), t2 = J(k, j + 1);
      J(k, j) = t1 * c1 + t2 * s1;
      J(k, j + 1) = xny * (t1 + J(k, j)) - t2;
    }
  }
}

}  // namespace

QPSolution solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd& C, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(b.size());
  QPSolution sol;
  sol.lambda = Eigen::VectorXd::Zero(m);

  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    const double ridge = std::max(1e-12, 1e-10 * std::fabs(H.trace()));
    llt.compute(H + ridge * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) return sol;
  }
  Eigen::VectorXd x = -llt.solve(g);
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);  // becomes L^{-T} Q
  llt.matrixL().transpose().solveInPlace(J);

  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> active;
  std::vector<double> u;  // multipliers of active constraints
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);

  const int iter_cap = 50 * (m + n) + 200;
  int iter = 0;

  for (;;) {
    int ip = -1;
    double worst = 1e-11;
    for (int i = 0; i < m; ++i) {
      if (is_active[static_cast<std::size_t>(i)]) continue;
      const double viol = b(i) - C.row(i).dot(x);
      if (viol > worst * (1.0 + std::fabs(b(i)))) {
        worst = viol / (1.0 + std::fabs(b(i)));
        ip = i;
      }
    }
    if (ip < 0) {
      sol.x = x;
      for (std::size_t j = 0; j < active.size(); ++j)
        sol.lambda(active[j]) = u[j];
      sol.solved = true;
      return sol;
    }

    const Eigen::VectorXd np = C.row(ip).transpose();
    u.push_back(0.0);  // incoming multiplier rides in the last slot

    for (;;) {
      if (++iter > iter_cap) return sol;
      const int q = static_cast<int>(active.size());

      Eigen::VectorXd d = J.transpose() * np;
      Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
      if (q < n) z = J.rightCols(n - q) * d.tail(n - q);
      Eigen::VectorXd r;
      if (q > 0)
        r = R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

      double t1 = kInf;
      int l = -1;
      for (int j = 0; j < q; ++j) {
        if (r(j) > 1e-14) {
          const double ratio = u[static_cast<std::size_t>(j)] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            l = j;
          }
        }
      }

      const double s_ip = np.dot(x) - b(ip);
      const double ztnp = z.dot(np);
      const double t2 =
          (ztnp > 1e-14 * (1.0 + np.squaredNorm())) ? -s_ip / ztnp : kInf;
      const double t = std::min(t1, t2);
      if (t >= kInf) return sol;  // dual unbounded: primal infeasible

      if (t2 >= kInf) {  // step in dual space only
        for (int j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
        u.back() += t;
        is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(l)])] = 0;
        qp_drop_constraint(R, J, active, u, l);
        continue;
      }

      x += t * z;
      for (int j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
      u.back() += t;

      if (t == t2) {  // full step: constraint becomes active
        Eigen::VectorXd d2 = J.transpose() * np;
        if (!qp_add_constraint(R, J, d2, q)) return sol;
        active.push_back(ip);
        is_active[static_cast<std::size_t>(ip)] = 1;
        break;
      }

      // partial step: blocking constraint leaves, keep working on ip
      is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(l)])] = 0;
      qp_drop_constraint(R, J, active, u, l);
    }
  }
}

namespace {

// Max-violation (not summed) penalty: the inequality rows sample a few
// smooth underlying functions on dense grids, so an l1 sum over rows counts
// the same violation many times over and chokes the line search.
double merit_value(double f, const Eigen::VectorXd& c, double mu) {
  const double viol = std::max(0.0, -c.minCoeff());
  return f + mu * viol;
}

}  // namespace

SqpResult sqp_minimize(const NlpProblem& prob, const Eigen::VectorXd& x0,
                       const SqpOptions& opts) {
  const int n = prob.n;
  const int m = prob.m;
  std::vector<int> all(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) all[static_cast<std::size_t>(i)] = i;

  SqpResult res;
  Eigen::VectorXd x = x0;
  double f = prob.objective(x);
  Eigen::VectorXd c = prob.constraints(x, all);
  Eigen::MatrixXd Hess = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  double mu = 1.0;
  bool have_prev = false;
  Eigen::VectorXd s_prev, gl_prev;
  int stall = 0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;

    // working set: violated or near-active rows plus carriers of multipliers
    std::vector<int> ws;
    for (int i = 0; i < m; ++i)
      if (c(i) < opts.working_slack || lambda(i) > 0.0) ws.push_back(i);
    if (ws.empty()) ws.push_back(0);
    const int mw = static_cast<int>(ws.size());

    Eigen::VectorXd g(n);
    Eigen::MatrixXd A(mw, n);
    Eigen::VectorXd cw(mw);
    for (int k = 0; k < mw; ++k) cw(k) = c(ws[static_cast<std::size_t>(k)]);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xp = x;
      xp(j) += opts.fd_step;
      g(j) = (prob.objective(xp) - f) / opts.fd_step;
      A.col(j) = (prob.constraints(xp, ws) - cw) / opts.fd_step;
    }

    // deferred BFGS update: Lagrangian gradients at (x_prev, lambda) and
    // (x, lambda) are both available only now
    if (have_prev) {
      Eigen::VectorXd lam_w(mw);
      for (int k = 0; k < mw; ++k) lam_w(k) = lambda(ws[static_cast<std::size_t>(k)]);
      const Eigen::VectorXd gl_now = g - A.transpose() * lam_w;
      Eigen::VectorXd y = gl_now - gl_prev;
      const Eigen::VectorXd Hs = Hess * s_prev;
      const double sHs = s_prev.dot(Hs);
      const double sy = s_prev.dot(y);
      if (sHs > 0) {
        double theta = 1.0;
        if (sy < 0.2 * sHs) theta = 0.8 * sHs / (sHs - sy);
        const Eigen::VectorXd yt = theta * y + (1.0 - theta) * Hs;
        const double syt = s_prev.dot(yt);
        if (syt > 1e-12 * s_prev.norm() * yt.norm())
          Hess += (yt * yt.transpose()) / syt - (Hs * Hs.transpose()) / sHs;
      }
    }

    QPSolution qp = solve_qp(Hess, g, A, -cw);
    if (!qp.solved) {
      // elastic relaxation: a single slack shared by all rows
      Eigen::MatrixXd He = Eigen::MatrixXd::Zero(n + 1, n + 1);
      He.topLeftCorner(n, n) = Hess;
      He(n, n) = std::max(1.0, Hess.trace() / n);
      Eigen::VectorXd ge(n + 1);
      ge.head(n) = g;
      ge(n) = 1e3 * (1.0 + g.lpNorm<Eigen::Infinity>());
      Eigen::MatrixXd Ce = Eigen::MatrixXd::Zero(mw + 1, n + 1);
      Ce.topLeftCorner(mw, n) = A;
      Ce.col(n).head(mw).setOnes();
      Ce(mw, n) = 1.0;
      Eigen::VectorXd be(mw + 1);
      be.head(mw) = -cw;
      be(mw) = 0.0;
      const QPSolution qe = solve_qp(He, ge, Ce, be);
      if (!qe.solved) break;
      qp.solved = true;
      qp.x = qe.x.head(n);
      qp.lambda = qe.lambda.head(mw);
    }

    const Eigen::VectorXd p = qp.x;
    Eigen::VectorXd lam_new = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < mw; ++k)
      lam_new(ws[static_cast<std::size_t>(k)]) = qp.lambda(k);

    const double feas_now = std::max(0.0, -c.minCoeff());
    if (p.lpNorm<Eigen::Infinity>() < opts.step_tol * (1.0 + x.norm()) &&
        feas_now <= opts.feas_tol) {
      lambda = lam_new;
      res.converged = true;
      break;
    }

    // Penalty weight follows the current multipliers.  It may shrink again
    // (geometrically) because a degenerate working set can produce one QP
    // with wild multipliers; a permanent ratchet would freeze the line
    // search at tiny steps for the rest of the run.
    mu = std::max({1.1 * lam_new.lpNorm<Eigen::Infinity>(), 0.25 * mu, 1.0});
    double dir = g.dot(p) - mu * feas_now;
    if (dir >= 0.0 && feas_now > opts.feas_tol) {
      // restoration step: objective rises while violation falls, so the
      // penalty must outweigh the rise or the merit test rejects everything
      mu = std::max(mu, 2.0 * g.dot(p) / feas_now);
      dir = g.dot(p) - mu * feas_now;
    }
    const double m0 = merit_value(f, c, mu);
    if (dir >= 0) dir = -1e-16;
    double t = 1.0;
    double f_t = 0.0;
    Eigen::VectorXd c_t;
    Eigen::VectorXd step = p;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      Eigen::VectorXd xt = x + t * p;
      f_t = prob.objective(xt);
      c_t = prob.constraints(xt, all);
      step = t * p;
      if (merit_value(f_t, c_t, mu) <= m0 + 1e-4 * t * dir) {
        accepted = true;
        break;
      }
      if (ls == 0) {
        // second-order correction: the full step often fails the merit test
        // only because the near-active constraints curve away; restore them
        // with the least-norm step q solving A q = -(violation at x+p)
        std::vector<int> vr;
        for (int k = 0; k < mw; ++k)
          if (c_t(ws[static_cast<std::size_t>(k)]) < 0.0) vr.push_back(k);
        if (!vr.empty()) {
          const int nv = static_cast<int>(vr.size());
          Eigen::MatrixXd Av(nv, n);
          Eigen::VectorXd rv(nv);
          for (int k = 0; k < nv; ++k) {
            Av.row(k) = A.row(vr[static_cast<std::size_t>(k)]);
            rv(k) = -c_t(ws[static_cast<std::size_t>(vr[static_cast<std::size_t>(k)])]);
          }
          const Eigen::VectorXd q =
              Av.completeOrthogonalDecomposition().solve(rv);
          if (q.lpNorm<Eigen::Infinity>() <= 0.5 * p.lpNorm<Eigen::Infinity>()) {
            const Eigen::VectorXd xs = x + p + q;
            const double f_s = prob.objective(xs);
            const Eigen::VectorXd c_s = prob.constraints(xs, all);
            if (merit_value(f_s, c_s, mu) <= m0 + 1e-4 * dir) {
              f_t = f_s;
              c_t = c_s;
              step = p + q;
              accepted = true;
              break;
            }
          }
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      lambda = lam_new;
      res.converged = feas_now <= opts.feas_tol;
      break;
    }

    s_prev = step;
    gl_prev = g - A.transpose() * qp.lambda;
    have_prev = true;

    const double m1 = merit_value(f_t, c_t, mu);
    x += s_prev;
    f = f_t;
    c = c_t;
    lambda = lam_new;

    if (m0 - m1 < 1e-13 * (1.0 + std::fabs(m0))) {
      if (++stall >= 2) {
        res.converged = std::max(0.0, -c.minCoeff()) <= opts.feas_tol;
        break;
      }
    } else {
      stall = 0;
    }
  }

  res.x = x;
  res.lambda = lambda;
  res.objective = f;
  res.max_violation = std::max(0.0, -c.minCoeff());
  if (res.max_violation > opts.feas_tol) res.converged = false;
  return res;
}

}  // namespace exoci
