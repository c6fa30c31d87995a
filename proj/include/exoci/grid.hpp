#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "exoci/kg.hpp"
#include "exoci/panel.hpp"

namespace exoci {

struct GridEntry {
  double rho = 0.0;
  double delta = 0.0;  // +inf for the standard entry at rho = 0
  double phi_star = 1.0;
  OptimizedPair opt;   // opt.pair is the payload; the rest are diagnostics
};

// Pairs optimized at 11 correlations rho = 0, -0.1, ..., -0.9, -0.97,
// tied to the design (ssw/ssb) they were built for.
struct FunctionGrid {
  std::size_t N = 0;
  std::size_t T = 0;
  double ssw = 0.0;
  double ssb = 0.0;
  double r = 0.0;  // ssb / ssw
  double alpha = 0.05;
  double d = 6.0;
  std::vector<GridEntry> entries;  // ordered by rho descending from 0
};

// Runs select_phi at each negative rho (entry 1 is the standard pair).
// When delta_of_rho clamps at 0 for the most negative correlations, those
// entries share the pair optimized at rho(0). threads = 0 means one worker
// per hardware thread; results do not depend on the thread count.
FunctionGrid build_grid(const DesignSummary& ds, double alpha,
                        int threads = 0);

// Linear interpolation of the 11 free knot values in the rho coordinate,
// exact at grid nodes, clamped beyond the most negative rho.
KnotFunctionPair interpolate_pair(const FunctionGrid& grid, double delta);

// Throws GridMismatch when ssw/ssb differ beyond 1e-9 relative or N/T differ.
void check_design_match(const FunctionGrid& grid, const DesignSummary& ds);

void save_grid(std::ostream& out, const FunctionGrid& grid);
void save_grid_file(const std::string& path, const FunctionGrid& grid);
// Loaded entries carry the pair and phi; build-time diagnostics (min_cp,
// gain, ...) are not persisted and read back as defaults.
FunctionGrid load_grid(std::istream& in);
FunctionGrid load_grid_file(const std::string& path);

struct CIResult {
  double lower = 0.0;
  double upper = 0.0;
  double center_shift = 0.0;  // f_o(h), unscaled
  double half_width = 0.0;    // f_e(h), unscaled
  double h_used = 0.0;
  double sigma_used = 0.0;
  double delta_used = 0.0;
  bool reverted = false;  // |h| >= d: interval equals the fixed-effects one
};

// [ b_W + (sigma/sqrt(SSW)) f_o(h) +- (sigma/sqrt(SSW)) f_e(h) ] with
// h = hausman_stat(p, sigma_eps, delta) and the pair interpolated at delta.
CIResult known_ci(const PanelData& p, double sigma_eps, double delta,
                  const FunctionGrid& grid);
CIResult known_ci(const GlsFit& fit, const DesignSummary& ds, double sigma_eps,
                  double delta, const FunctionGrid& grid);

// known_ci at the plug-in values (sigma_hat, delta_hat).
CIResult plugin_ci(const PanelData& p, const FunctionGrid& grid);

}  // namespace exoci
