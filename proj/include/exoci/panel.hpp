#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "exoci/errors.hpp"

namespace exoci {

// Balanced N x T panel. x and y are stored row-major, one row per unit,
// ordered by (unit, time). y may be absent for design-only work.
struct PanelData {
  std::vector<std::string> unit_ids;  // N labels
  std::vector<std::string> times;     // T labels
  std::vector<double> x;              // N*T
  std::vector<double> y;              // N*T, empty when absent

  std::size_t n_units() const { return unit_ids.size(); }
  std::size_t n_times() const { return times.size(); }
  bool has_y() const { return !y.empty(); }
  double xat(std::size_t i, std::size_t t) const { return x[i * n_times() + t]; }
  double yat(std::size_t i, std::size_t t) const { return y[i * n_times() + t]; }

  // Validates balance/shape invariants; throws Error on violation.
  void validate() const;
};

struct ColumnNames {
  std::string unit = "unit";
  std::string time = "time";
  std::string x = "x";
  std::string y = "y";
};

// Long-format delimited text: header row, comma separated, '.' decimal.
// The y column is optional. Rows may arrive in any order; output is sorted
// by (unit, time), numerically when every label parses as a number.
PanelData load_panel(std::istream& in, const ColumnNames& cols = {});
PanelData load_panel_file(const std::string& path, const ColumnNames& cols = {});

struct DesignSummary {
  std::size_t N = 0;
  std::size_t T = 0;
  double ssw = 0.0;               // sum_i sum_t (x_it - xbar_i)^2
  double ssb = 0.0;               // sum_i (xbar_i - xbar)^2
  double r = 0.0;                 // ssb / ssw
  std::vector<double> xbar_i;     // group means
  double xbar = 0.0;              // grand mean
};

DesignSummary design_summary(const PanelData& p);

struct GlsFit {
  double a_hat = 0.0;
  double bw_hat = 0.0;
  double bb_hat = 0.0;
};

// GLS under the within/between reparameterization. The estimates do not
// depend on delta, hence no delta argument.
GlsFit fit_gls(const PanelData& p, const DesignSummary& ds);
GlsFit fit_gls(const PanelData& p);

struct FitResult {
  double a_hat = 0.0;
  double bw_hat = 0.0;
  double bb_hat = 0.0;
  double sigma_eps2_hat = 0.0;
  double sigma_eta2_hat = 0.0;  // may be negative before truncation
  double delta_hat = 0.0;       // max(0, sigma_eta2_hat / sigma_eps2_hat)
  double h_hat = 0.0;           // Hausman statistic at the plug-in values
};

FitResult estimate_variance_components(const PanelData& p);
FitResult estimate_variance_components(const PanelData& p, const DesignSummary& ds);

double hausman_stat(const PanelData& p, double sigma_eps, double delta);
double hausman_stat(const GlsFit& fit, const DesignSummary& ds, double sigma_eps,
                    double delta);

// Correlation between the within pivot and the Hausman statistic:
// rho(delta) = -sqrt(r / (r + delta + 1/T)), always in (-1, 0).
double rho_of_delta(double r, double delta, std::size_t T);

// Inverse map, clamped below at 0. rho = 0 has no finite solution.
double delta_of_rho(double r, double rho, std::size_t T);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Fixed-effects interval: bw_hat +/- z_{(c+1)/2} * sigma_eps / sqrt(SSW).
Interval fixed_effects_interval(const PanelData& p, double sigma_eps, double c);
Interval fixed_effects_interval(const GlsFit& fit, const DesignSummary& ds,
                                double sigma_eps, double c);

// True data-generating parameters. gamma = xi * sqrt(N) / sigma_eps.
struct ModelParams {
  double a = 0.0;
  double b = 0.0;
  double xi = 0.0;
  double sigma_eps = 1.0;
  double delta = 0.0;
  double gamma = 0.0;

  static ModelParams make(double a, double b, double xi, double sigma_eps,
                          double delta, std::size_t N);
  // Canonical parameterization used by the simulator: a=b=0, sigma_eps=1.
  static ModelParams canonical(double gamma, double delta, std::size_t N);
};

}  // namespace exoci
