#include "exoci/math.hpp"

#include <limits>

#include "exoci/errors.hpp"

namespace exoci {

// Wichura (1988), algorithm AS 241, PPND16.
double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::invalid_argument,
          "normal_quantile requires p in (0, 1)");
  const double q = p - 0.5;
  double r, x;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    x = q *
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
  } else {
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
    } else {
      r -= 5.0;
      x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
    }
    if (q < 0.0) x = -x;
  }
  // One Newton step sharpens the last couple of bits.
  const double pdf = normal_pdf(x);
  if (pdf > 0.0) x -= (normal_cdf(x) - p) / pdf;
  return x;
}

GaussLegendre::GaussLegendre(int n) {
  require(n >= 1, ErrorKind::invalid_argument, "Gauss-Legendre order must be >= 1");
  nodes.resize(n);
  weights.resize(n);
  const double eps = std::numeric_limits<double>::epsilon();
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) <= 4.0 * eps * std::abs(x) + eps) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

CompositeQuadrature::CompositeQuadrature(double lo, double hi, int cells, int points) {
  require(hi > lo && cells >= 1, ErrorKind::invalid_argument,
          "bad composite quadrature layout");
  const GaussLegendre base(points);
  nodes.reserve(static_cast<std::size_t>(cells) * points);
  weights.reserve(static_cast<std::size_t>(cells) * points);
  const double h = (hi - lo) / cells;
  for (int c = 0; c < cells; ++c) {
    const double a = lo + c * h;
    const double mid = a + 0.5 * h;
    for (int k = 0; k < points; ++k) {
      nodes.push_back(mid + 0.5 * h * base.nodes[k]);
      weights.push_back(0.5 * h * base.weights[k]);
    }
  }
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::unbalanced_panel: return "UnbalancedPanel";
    case ErrorKind::duplicate_cell: return "DuplicateCell";
    case ErrorKind::degenerate_design: return "DegenerateDesign";
    case ErrorKind::zero_residual_variance: return "ZeroResidualVariance";
    case ErrorKind::no_finite_solution: return "NoFiniteSolution";
    case ErrorKind::non_finite_knot: return "NonFiniteKnot";
    case ErrorKind::negative_even_knot: return "NegativeEvenKnot";
    case ErrorKind::quadrature_failure: return "QuadratureFailure";
    case ErrorKind::optimizer_failure: return "OptimizerFailure";
    case ErrorKind::grid_mismatch: return "GridMismatch";
    case ErrorKind::io_error: return "IoError";
    case ErrorKind::invalid_argument: return "InvalidArgument";
  }
  return "Error";
}

}  // namespace exoci
