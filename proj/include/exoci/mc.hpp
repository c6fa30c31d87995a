#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "exoci/grid.hpp"
#include "exoci/panel.hpp"
#include "exoci/rng.hpp"

namespace exoci {

enum class SimKind { coverage, sel, conf_coeff };

// A standardized-noise sampler: i.i.d. draws with mean 0 and variance 1,
// consuming only the given stream. Empty means standard normal. Must be
// stateless: it may run concurrently on different streams.
using NoiseSampler = std::function<double(NormalStream&)>;

struct SimConfig {
  PanelData design;  // x is what matters; y is ignored
  FunctionGrid grid;
  double gamma = 0.0;
  double delta = 0.0;
  std::uint64_t M = 1;
  std::uint64_t master_seed = 0;
  NoiseSampler noise;  // optional hook
  int threads = 0;     // execution knob only; results don't depend on it
};

struct SimEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t M = 0;
  std::uint64_t seed = 0;
  SimKind kind = SimKind::coverage;
  std::uint64_t redraws = 0;  // replications restarted on degenerate draws
};

// One synthetic replication, reduced to the quantities the estimators use.
// bw/bb are kept so callers can also form known-parameter statistics.
struct RunStats {
  double h_hat = 0.0;
  double gL_hat = 0.0;       // (bw_hat - b) / sqrt(sigma_hat^2 / SSW)
  double sigma_ratio = 0.0;  // sigma_hat / sigma_eps
  double delta_hat = 0.0;
  double bw_hat = 0.0;
  double bb_hat = 0.0;
};

// Draws eta (N values) then eps (N*T values, row-major) from the stream,
// synthesizes y, and runs the two-stage fit. Only (gamma, delta) affect the
// result; the general-parameter overload exists to verify exactly that.
RunStats simulate_run(const PanelData& design, double gamma, double delta,
                      NormalStream& stream);
RunStats simulate_run(const PanelData& design, const ModelParams& params,
                      NormalStream& stream);

// Coverage of the plug-in interval: mean of the indicator
// -f_o(h) - f_e(h) <= gL <= -f_o(h) + f_e(h) with the pair interpolated
// at each replication's delta_hat. Deterministic given master_seed.
SimEstimate estimate_cp(const SimConfig& cfg);

struct ConfidenceCoefficient {
  SimEstimate c_min;
  double gamma_star = 0.0;
  double delta_star = 0.0;
};

// Three-stage search for the minimum coverage over (gamma, delta):
// M1 everywhere, M2 on each delta's three smallest, M3 on the global
// minimizer. Per-point seeds derive from (master_seed, gamma, delta, M),
// so a singleton grid reduces to estimate_cp at M3.
ConfidenceCoefficient estimate_confidence_coefficient(
    const PanelData& design, const FunctionGrid& grid,
    const std::vector<double>& gamma_grid, const std::vector<double>& delta_grid,
    std::uint64_t M1, std::uint64_t M2, std::uint64_t M3,
    std::uint64_t master_seed, int threads = 0);

// Scaled expected length: NUM / (z_{(c_min+1)/2} * TERM) where NUM averages
// sigma_ratio * f_e(h) over one set of M runs and TERM averages sigma_ratio
// over an independent second set; delta-method standard error.
SimEstimate estimate_sel(const SimConfig& cfg, double c_min);

}  // namespace exoci
