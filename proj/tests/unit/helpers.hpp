#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "exoci/grid.hpp"
#include "exoci/kg.hpp"
#include "exoci/math.hpp"
#include "exoci/panel.hpp"
#include "exoci/rng.hpp"

namespace testutil {

inline exoci::PanelData panel_from(std::size_t N, std::size_t T,
                                   std::vector<double> x,
                                   std::vector<double> y = {}) {
  exoci::PanelData p;
  for (std::size_t i = 0; i < N; ++i) p.unit_ids.push_back(std::to_string(i + 1));
  for (std::size_t t = 0; t < T; ++t) p.times.push_back(std::to_string(t + 1));
  p.x = std::move(x);
  p.y = std::move(y);
  p.validate();
  return p;
}

// Deterministic design with spread both within and between units; the same
// generator produces the "desk" design used by the heavier checks.
inline exoci::PanelData synth_design(std::size_t N, std::size_t T,
                                     std::uint64_t seed) {
  exoci::PanelData p;
  p.x.resize(N * T);
  for (std::size_t i = 0; i < N; ++i) {
    p.unit_ids.push_back(std::to_string(i + 1));
    exoci::NormalStream st(seed, exoci::StreamPurpose::generic, i);
    const double mu = 0.6 + 0.2 * st.next();
    for (std::size_t t = 0; t < T; ++t) p.x[i * T + t] = mu + 0.05 * st.next();
  }
  for (std::size_t t = 0; t < T; ++t) p.times.push_back(std::to_string(t + 1));
  p.validate();
  return p;
}

// y under the canonical parameterization: a = b = 0, sigma_eps = 1,
// sigma_eta = sqrt(delta), xi = gamma / sqrt(N).
inline void fill_y(exoci::PanelData& p, double gamma, double delta,
                   std::uint64_t seed) {
  const std::size_t N = p.n_units(), T = p.n_times();
  const double xi = gamma / std::sqrt(static_cast<double>(N));
  const double s_eta = std::sqrt(delta);
  p.y.assign(N * T, 0.0);
  exoci::NormalStream st(seed, exoci::StreamPurpose::generic, 0);
  std::vector<double> eta(N);
  for (std::size_t i = 0; i < N; ++i) eta[i] = s_eta * st.next();
  for (std::size_t i = 0; i < N; ++i) {
    double xbar_i = 0.0;
    for (std::size_t t = 0; t < T; ++t) xbar_i += p.x[i * T + t];
    xbar_i /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t)
      p.y[i * T + t] = xi * xbar_i + eta[i] + st.next();
  }
}

inline exoci::KnotFunctionPair random_pair(std::mt19937_64& rng, double alpha) {
  const double z = exoci::two_sided_z(1.0 - alpha);
  std::uniform_real_distribution<double> uo(-0.3, 0.3), ue(-0.45, 0.45);
  std::vector<double> odd(5), even(6);
  for (auto& v : odd) v = uo(rng);
  for (auto& v : even) v = z + ue(rng);
  return exoci::make_pair(odd, even, alpha);
}

// Structurally valid 11-entry grid with hand-made (non-optimal) pairs;
// enough for the persistence / interpolation / interval plumbing.
inline exoci::FunctionGrid toy_grid(const exoci::DesignSummary& ds,
                                    double alpha) {
  exoci::FunctionGrid g;
  g.N = ds.N;
  g.T = ds.T;
  g.ssw = ds.ssw;
  g.ssb = ds.ssb;
  g.r = ds.r;
  g.alpha = alpha;
  g.d = 6.0;
  const double z = exoci::two_sided_z(1.0 - alpha);
  const double rhos[11] = {0.0,  -0.1, -0.2, -0.3, -0.4, -0.5,
                           -0.6, -0.7, -0.8, -0.9, -0.97};
  for (int j = 0; j < 11; ++j) {
    exoci::GridEntry e;
    e.rho = rhos[j];
    if (j == 0) {
      e.delta = std::numeric_limits<double>::infinity();
      e.phi_star = 1.0;
      e.opt.pair = exoci::standard_pair(alpha);
      e.opt.phi = 1.0;
    } else {
      const double s = -rhos[j];
      e.delta = exoci::delta_of_rho(ds.r, rhos[j], ds.T);
      e.phi_star = 0.1 + 0.01 * j;
      std::vector<double> odd = {-0.23 * s, -0.19 * s, -0.09 * s, -0.02 * s,
                                 0.005 * s};
      std::vector<double> even = {z - 0.24 * s, z - 0.16 * s, z + 0.12 * s,
                                  z + 0.21 * s, z + 0.08 * s, z + 0.02 * s};
      e.opt.pair = exoci::make_pair(odd, even, alpha);
      e.opt.phi = e.phi_star;
    }
    g.entries.push_back(std::move(e));
  }
  return g;
}

}  // namespace testutil
