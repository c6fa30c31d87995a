#pragma once

#include <functional>
#include <vector>

#include "exoci/spline.hpp"

namespace exoci {

struct QuadSpec {
  int cells = 12;   // equal subintervals over [-d, d]
  int points = 20;  // Gauss-Legendre points per subinterval
};

// Everything the known-variance machinery needs besides the pair itself:
// the correlation rho between the pivot and the Hausman statistic, the
// nominal level, the support half-width d, and the numeric knobs.
struct KGContext {
  double rho = 0.0;  // in (-1, 0]
  double alpha = 0.05;
  double d = 6.0;
  QuadSpec quad;
  std::vector<double> psi_constraint_grid;  // starts at 0, reaches >= d+4

  static KGContext make(double rho, double alpha, double d = 6.0,
                        QuadSpec quad = {});
  void validate() const;
};

// CP(psi) = 1 - alpha + int_{-d}^{d} (k(w) - k_dag(w)) phi(w - psi) dw,
// an even function of psi (evaluated at |psi|).
double coverage_probability(const KGContext& ctx, const KnotFunctionPair& pair,
                            double psi);

// SEL(psi) = 1 + (1/z) int_{-d}^{d} (f_e(w) - z) phi(w - psi) dw.
double scaled_expected_length(const KGContext& ctx, const KnotFunctionPair& pair,
                              double psi);

// (2/z) int_0^d (f_e(w) - z) ((1-phi) pdf(w) + phi) dw; equals
// (1-phi)(SEL(0)-1) + phi * int (SEL(psi)-1) dpsi.
double objective(const KGContext& ctx, const KnotFunctionPair& pair, double phi);

struct OptimizedPair {
  KnotFunctionPair pair;
  double phi = 1.0;
  double gain = 0.0;         // 1 - SEL(0)^2
  double loss = 0.0;         // max_psi SEL(psi)^2 - 1
  double min_cp = 0.0;       // over the 0.01-step verification grid
  double max_sel = 1.0;      // over the same grid
  double sel_at_zero = 1.0;
  bool converged = false;
  double constraint_violation = 0.0;  // max(0, 1 - alpha - min_cp)
};

// Minimizes the objective over the 11 free knot values subject to
// CP(psi_k) >= 1 - alpha on the constraint grid and f_e >= 0, starting
// from the standard pair; a cutting-plane loop (at most 5 rounds) guards
// the constraint between grid points.
OptimizedPair optimize_pair(const KGContext& ctx, double phi);

// Picks phi so that the gain when the prior information is correct equals
// the maximum possible loss: scan over phi in {0.02, 0.06, ..., 0.98},
// then bisection until |gain - loss| <= 1e-3. Returns the standard pair
// with phi = 1 when rho >= -0.05 or every scanned gain is below 1e-3.
OptimizedPair select_phi(const KGContext& ctx);

namespace detail {
// Objective integral for an arbitrary even half-width function; public
// objective() routes through this with the pair's spline.
double objective_of_even(const KGContext& ctx,
                         const std::function<double(double)>& fe, double phi);
}  // namespace detail

}  // namespace exoci
