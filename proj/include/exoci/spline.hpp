#pragma once

#include <cstddef>
#include <vector>

#include "exoci/errors.hpp"

namespace exoci {

// Natural cubic spline on uniformly spaced knots lo + j*h, j = 0..n-1.
// Second derivative is zero at both end knots.
struct NaturalCubicSpline {
  double lo = 0.0;
  double h = 1.0;
  std::vector<double> y;  // knot values
  std::vector<double> M;  // second derivatives at knots

  static NaturalCubicSpline fit(double lo, double h, std::vector<double> values);

  // x must lie within [lo, lo + (n-1)h] up to roundoff; clamped to it.
  double eval(double x) const;
};

// The interval-shape pair (f_o, f_e): f_o odd, f_e even, both natural cubic
// splines through 13 uniformly spaced knots on [-d, d], constant outside.
// Pinned values: f_o(0) = f_o(+-d) = 0, f_e(+-d) = z_{1-alpha/2}.
// The free knot values are f_o at the 5 interior positive knots and f_e at
// the 6 knots 0..5 (positions scaled by d/6 when d != 6).
class KnotFunctionPair {
 public:
  KnotFunctionPair() = default;

  double alpha() const { return alpha_; }
  double d() const { return d_; }
  double z() const { return z_; }  // z_{1-alpha/2}
  const std::vector<double>& odd_knots() const { return odd_; }
  const std::vector<double>& even_knots() const { return even_; }

  double eval_odd(double x) const;
  double eval_even(double x) const;

  bool is_standard() const;

 private:
  friend KnotFunctionPair make_pair(const std::vector<double>&,
                                    const std::vector<double>&, double, double);
  double alpha_ = 0.05;
  double d_ = 6.0;
  double z_ = 0.0;
  std::vector<double> odd_;   // f_o(1..5) at positive interior knots
  std::vector<double> even_;  // f_e(0..5)
  NaturalCubicSpline so_;     // full 13-knot odd spline
  NaturalCubicSpline se_;     // full 13-knot even spline
};

KnotFunctionPair make_pair(const std::vector<double>& odd_knots,
                           const std::vector<double>& even_knots, double alpha,
                           double d = 6.0);

// f_o == 0, f_e == z_{1-alpha/2}: the pair whose interval is the
// fixed-effects interval L.
KnotFunctionPair standard_pair(double alpha, double d = 6.0);

// Full 13-knot splines of the two components, exposed so callers can form
// cardinal bases: the pair's f_o equals odd_component_spline(odd_knots, d)
// on [-d, d], and its f_e equals even_component_spline(z, even_knots, d).
// Both are linear in their knot arguments.
NaturalCubicSpline odd_component_spline(const std::vector<double>& odd5, double d);
NaturalCubicSpline even_component_spline(double boundary,
                                         const std::vector<double>& even6,
                                         double d);

}  // namespace exoci
