#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

// Small numerical utilities shared across the library: standard normal
// density/CDF/quantile, compensated summation, and Gauss-Legendre rules.

namespace exoci {

inline double normal_pdf(double x) {
  static constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  static constexpr double inv_sqrt_2 = 0.7071067811865475244008444;
  return 0.5 * std::erfc(-x * inv_sqrt_2);
}

// Inverse standard normal CDF, Wichura's PPND16 with one Newton polish.
// Relative accuracy is near machine precision on (0, 1).
double normal_quantile(double p);

// z_{(c+1)/2}: half-width multiplier of the two-sided level-c interval.
inline double two_sided_z(double c) { return normal_quantile(0.5 * (c + 1.0)); }

// Neumaier-compensated accumulator. Used wherever long sums feed exact
// algebraic identities (panel summaries, Monte Carlo block sums).
class CompensatedSum {
 public:
  void add(double value) {
    double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
  explicit GaussLegendre(int n);
};

// Composite rule: `cells` equal subintervals of [lo, hi], `points` Gauss-
// Legendre nodes per cell.
struct CompositeQuadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
  CompositeQuadrature(double lo, double hi, int cells, int points);
};

}  // namespace exoci
