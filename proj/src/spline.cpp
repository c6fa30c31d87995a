#include "exoci/spline.hpp"

#include <algorithm>
#include <cmath>

#include "exoci/math.hpp"

namespace exoci {

NaturalCubicSpline NaturalCubicSpline::fit(double lo, double h,
                                           std::vector<double> values) {
  const std::size_t n = values.size();
  require(n >= 3, ErrorKind::invalid_argument, "spline needs at least 3 knots");
  require(h > 0.0, ErrorKind::invalid_argument, "knot spacing must be > 0");
  NaturalCubicSpline s;
  s.lo = lo;
  s.h = h;
  s.y = std::move(values);
  s.M.assign(n, 0.0);

  // Thomas algorithm for M_{j-1} + 4 M_j + M_{j+1} = 6 (y_{j+1} - 2y_j + y_{j-1}) / h^2
  // with natural ends M_0 = M_{n-1} = 0.
  const std::size_t m = n - 2;
  if (m > 0) {
    std::vector<double> diag(m, 4.0), rhs(m);
    for (std::size_t j = 0; j < m; ++j)
      rhs[j] = 6.0 * (s.y[j + 2] - 2.0 * s.y[j + 1] + s.y[j]) / (h * h);
    for (std::size_t j = 1; j < m; ++j) {
      const double w = 1.0 / diag[j - 1];
      diag[j] -= w;
      rhs[j] -= w * rhs[j - 1];
    }
    s.M[m] = rhs[m - 1] / diag[m - 1];
    for (std::size_t j = m - 1; j >= 1; --j)
      s.M[j] = (rhs[j - 1] - s.M[j + 1]) / diag[j - 1];
  }
  return s;
}

double NaturalCubicSpline::eval(double x) const {
  const std::size_t n = y.size();
  double u = (x - lo) / h;
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  std::size_t j = std::min(static_cast<std::size_t>(u), n - 2);
  const double t = (x - (lo + static_cast<double>(j) * h));
  const double dy = (y[j + 1] - y[j]) / h;
  return y[j] + t * (dy - h * (2.0 * M[j] + M[j + 1]) / 6.0) +
         t * t * (M[j] / 2.0) + t * t * t * ((M[j + 1] - M[j]) / (6.0 * h));
}

namespace {

// Symmetrize spline moments so that parity of the knot data is exact in
// the evaluated function, not just up to solver roundoff.
void symmetrize(std::vector<double>& M, bool odd) {
  const std::size_t n = M.size();
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double a = M[j], b = M[n - 1 - j];
    const double v = odd ? 0.5 * (a - b) : 0.5 * (a + b);
    M[j] = v;
    M[n - 1 - j] = odd ? -v : v;
  }
  if (odd && n % 2 == 1) M[n / 2] = 0.0;
}

}  // namespace

NaturalCubicSpline odd_component_spline(const std::vector<double>& odd5,
                                        double d) {
  require(odd5.size() == 5, ErrorKind::invalid_argument,
          "expected 5 odd knot values");
  require(d > 0.0, ErrorKind::invalid_argument, "d must be > 0");
  std::vector<double> fo(13, 0.0);
  for (int j = 1; j <= 5; ++j) {
    fo[6 + j] = odd5[static_cast<std::size_t>(j - 1)];
    fo[6 - j] = -odd5[static_cast<std::size_t>(j - 1)];
  }
  NaturalCubicSpline s = NaturalCubicSpline::fit(-d, d / 6.0, std::move(fo));
  symmetrize(s.M, /*odd=*/true);
  return s;
}

NaturalCubicSpline even_component_spline(double boundary,
                                         const std::vector<double>& even6,
                                         double d) {
  require(even6.size() == 6, ErrorKind::invalid_argument,
          "expected 6 even knot values");
  require(d > 0.0, ErrorKind::invalid_argument, "d must be > 0");
  std::vector<double> fe(13, 0.0);
  fe[0] = boundary;
  fe[12] = boundary;
  fe[6] = even6[0];
  for (int j = 1; j <= 5; ++j) {
    fe[6 + j] = even6[static_cast<std::size_t>(j)];
    fe[6 - j] = even6[static_cast<std::size_t>(j)];
  }
  NaturalCubicSpline s = NaturalCubicSpline::fit(-d, d / 6.0, std::move(fe));
  symmetrize(s.M, /*odd=*/false);
  return s;
}

KnotFunctionPair make_pair(const std::vector<double>& odd_knots,
                           const std::vector<double>& even_knots, double alpha,
                           double d) {
  require(odd_knots.size() == 5, ErrorKind::invalid_argument,
          "expected 5 odd knot values");
  require(even_knots.size() == 6, ErrorKind::invalid_argument,
          "expected 6 even knot values");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::invalid_argument,
          "alpha must lie in (0,1)");
  require(d > 0.0, ErrorKind::invalid_argument, "d must be > 0");
  for (double v : odd_knots)
    require(std::isfinite(v), ErrorKind::non_finite_knot, "non-finite odd knot");
  for (double v : even_knots) {
    require(std::isfinite(v), ErrorKind::non_finite_knot, "non-finite even knot");
    require(v >= 0.0, ErrorKind::negative_even_knot, "even knot must be >= 0");
  }

  KnotFunctionPair p;
  p.alpha_ = alpha;
  p.d_ = d;
  p.z_ = two_sided_z(1.0 - alpha);
  p.odd_ = odd_knots;
  p.even_ = even_knots;
  p.so_ = odd_component_spline(odd_knots, d);
  p.se_ = even_component_spline(p.z_, even_knots, d);
  return p;
}

KnotFunctionPair standard_pair(double alpha, double d) {
  const double z = two_sided_z(1.0 - alpha);
  return make_pair({0.0, 0.0, 0.0, 0.0, 0.0}, {z, z, z, z, z, z}, alpha, d);
}

double KnotFunctionPair::eval_odd(double x) const {
  const double ax = std::fabs(x);
  if (ax >= d_) return 0.0;
  const double v = so_.eval(ax);
  return x < 0.0 ? -v : v;
}

double KnotFunctionPair::eval_even(double x) const {
  const double ax = std::fabs(x);
  if (ax >= d_) return z_;
  return se_.eval(ax);
}

bool KnotFunctionPair::is_standard() const {
  for (double v : odd_)
    if (v != 0.0) return false;
  for (double v : even_)
    if (v != z_) return false;
  return true;
}

}  // namespace exoci
