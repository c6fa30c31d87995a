#include <cmath>

#include "doctest.h"
#include "exoci/math.hpp"

using namespace exoci;

TEST_SUITE("math") {

TEST_CASE("normal cdf and pdf basics") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-13));
  for (double x : {-3.7, -1.2, 0.3, 2.9, 6.0})
    CHECK(normal_cdf(-x) == doctest::Approx(1.0 - normal_cdf(x)).epsilon(1e-14));
}

TEST_CASE("normal quantile matches cdf") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-14));
  for (double p = 0.001; p < 0.9995; p += 0.013) {
    const double x = normal_quantile(p);
    CHECK(normal_cdf(x) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(normal_quantile(0.2) == doctest::Approx(-normal_quantile(0.8)).epsilon(1e-14));
}

TEST_CASE("two sided z") {
  CHECK(two_sided_z(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(two_sided_z(0.9) == doctest::Approx(1.6448536269514722).epsilon(1e-13));
  CHECK(std::fabs(two_sided_z(1e-12)) < 1e-11);
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  // an n-point rule is exact through degree 2n-1
  for (int n : {5, 12, 20}) {
    GaussLegendre gl(n);
    double wsum = 0.0;
    for (double w : gl.weights) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i)
        s += gl.weights[i] * std::pow(gl.nodes[i], k);
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      CHECK(s == doctest::Approx(exact).epsilon(1e-12));
    }
  }
}

TEST_CASE("composite rule reproduces the gaussian mass on [-6,6]") {
  CompositeQuadrature q(-6.0, 6.0, 12, 20);
  double s = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i)
    s += q.weights[i] * normal_pdf(q.nodes[i]);
  const double exact = normal_cdf(6.0) - normal_cdf(-6.0);
  CHECK(s == doctest::Approx(exact).epsilon(1e-14));

  // doubling the points does not move the result
  CompositeQuadrature q2(-6.0, 6.0, 12, 40);
  double s2 = 0.0;
  for (std::size_t i = 0; i < q2.nodes.size(); ++i)
    s2 += q2.weights[i] * normal_pdf(q2.nodes[i]);
  CHECK(std::fabs(s - s2) < 1e-14);
}

TEST_CASE("compensated sum survives cancellation") {
  CompensatedSum cs;
  cs.add(1e16);
  cs.add(1.0);
  cs.add(-1e16);
  CHECK(cs.value() == 1.0);

  // alternating large/small pattern that defeats naive accumulation
  CompensatedSum cs2;
  double naive = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double v = (i % 2 == 0) ? 1e12 + 0.25 : -1e12;
    cs2.add(v);
    naive += v;
  }
  CHECK(cs2.value() == doctest::Approx(5000 * 0.25).epsilon(1e-13));
  (void)naive;
}

}  // TEST_SUITE
