#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "exoci/math.hpp"
#include "exoci/panel.hpp"
#include "helpers.hpp"

using namespace exoci;
using testutil::panel_from;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return static_cast<ErrorKind>(0);
}

PanelData random_panel(std::mt19937_64& rng, std::size_t N, std::size_t T) {
  std::normal_distribution<double> nd;
  std::vector<double> x(N * T), y(N * T);
  for (std::size_t i = 0; i < N; ++i) {
    const double mu = 1.0 + 0.7 * nd(rng);
    for (std::size_t t = 0; t < T; ++t) {
      x[i * T + t] = mu + 0.4 * nd(rng);
      y[i * T + t] = 0.5 - 1.3 * x[i * T + t] + nd(rng);
    }
  }
  return panel_from(N, T, std::move(x), std::move(y));
}

}  // namespace

TEST_SUITE("panel") {

TEST_CASE("design summary on a hand-computed panel") {
  // unit means 1 and 2, grand mean 1.5
  const auto p = panel_from(2, 2, {0.0, 2.0, 1.0, 3.0});
  const auto ds = design_summary(p);
  CHECK(ds.N == 2);
  CHECK(ds.T == 2);
  CHECK(ds.xbar_i[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ds.xbar_i[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ds.xbar == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(ds.ssw == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(ds.ssb == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ds.r == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("design summary rejects flat designs") {
  CHECK(kind_of([] {
          design_summary(panel_from(2, 2, {1.0, 1.0, 4.0, 4.0}));
        }) == ErrorKind::degenerate_design);  // no within variation
  CHECK(kind_of([] {
          design_summary(panel_from(2, 2, {1.0, 3.0, 3.0, 1.0}));
        }) == ErrorKind::degenerate_design);  // equal unit means
}

TEST_CASE("csv rows may arrive in any order") {
  std::istringstream in(
      "unit,time,x,y\n"
      "10,2,102,1\n"
      "2,1,21,2\n"
      "1,2,12,3\n"
      "2,2,22,4\n"
      "10,1,101,5\n"
      "\n"
      "1,1,11,6\n");
  const auto p = load_panel(in);
  REQUIRE(p.n_units() == 3);
  REQUIRE(p.n_times() == 2);
  // numeric label order, not lexicographic
  CHECK(p.unit_ids == std::vector<std::string>{"1", "2", "10"});
  CHECK(p.times == std::vector<std::string>{"1", "2"});
  for (std::size_t i = 0; i < 3; ++i) {
    const double u = (i == 2) ? 10.0 : double(i + 1);
    for (std::size_t t = 0; t < 2; ++t)
      CHECK(p.xat(i, t) == 10.0 * u + double(t + 1));
  }
  CHECK(p.has_y());
  CHECK(p.yat(0, 0) == 6.0);
  CHECK(p.yat(2, 1) == 1.0);
}

TEST_CASE("csv labels fall back to lexicographic order") {
  std::istringstream in(
      "unit,time,x\n"
      "u2,1,1\n"
      "u10,1,2\n"
      "u1,1,3\n"
      "u2,2,4\n"
      "u10,2,5\n"
      "u1,2,6\n");
  const auto p = load_panel(in);
  CHECK(p.unit_ids == std::vector<std::string>{"u1", "u10", "u2"});
  CHECK_FALSE(p.has_y());
}

TEST_CASE("csv loader respects custom column names") {
  std::istringstream in(
      "id,year,fare,route\n"
      "1,1990,0.5,7\n"
      "1,1991,0.6,7\n"
      "2,1990,0.7,8\n"
      "2,1991,0.9,8\n");
  ColumnNames cols;
  cols.unit = "id";
  cols.time = "year";
  cols.x = "route";
  cols.y = "fare";
  const auto p = load_panel(in, cols);
  CHECK(p.xat(0, 0) == 7.0);
  CHECK(p.yat(1, 1) == 0.9);
}

TEST_CASE("csv loader reports malformed input") {
  auto parse = [](const char* text) {
    std::istringstream in(text);
    return kind_of([&] { load_panel(in); });
  };
  CHECK(parse("") == ErrorKind::parse_error);
  CHECK(parse("unit,time,x\n") == ErrorKind::parse_error);  // no data rows
  CHECK(parse("unit,period,x\n1,1,1\n") == ErrorKind::parse_error);
  CHECK(parse("unit,time,x\n1,1,abc\n") == ErrorKind::parse_error);
  CHECK(parse("unit,time,x\n1,1,1,9\n") == ErrorKind::parse_error);
  CHECK(parse("unit,time,x\n1,1,1\n1,1,2\n1,2,3\n2,1,4\n2,2,5\n") ==
        ErrorKind::duplicate_cell);
  CHECK(parse("unit,time,x\n1,1,1\n1,2,2\n2,1,3\n") ==
        ErrorKind::unbalanced_panel);
  CHECK(parse("unit,time,x\n1,1,1\n2,1,2\n") == ErrorKind::unbalanced_panel);
}

TEST_CASE("gls reproduces exact linear relations") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  const std::size_t N = 6, T = 4;
  std::vector<double> x(N * T);
  for (auto& v : x) v = nd(rng);
  auto p = panel_from(N, T, x);

  SUBCASE("y = 3 + 2x gives slope 2 on both axes") {
    p.y.resize(N * T);
    for (std::size_t k = 0; k < N * T; ++k) p.y[k] = 3.0 + 2.0 * p.x[k];
    const auto fit = fit_gls(p);
    CHECK(fit.a_hat == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.bw_hat == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.bb_hat == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("y equal to the unit mean of x loads only between") {
    const auto ds = design_summary(p);
    p.y.resize(N * T);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t t = 0; t < T; ++t) p.y[i * T + t] = ds.xbar_i[i];
    const auto fit = fit_gls(p);
    CHECK(fit.bw_hat == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.bb_hat == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.a_hat == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("gls agrees with the full matrix solution at any delta") {
  std::mt19937_64 rng(20240817);
  const std::size_t N = 7, T = 3;
  const auto p = random_panel(rng, N, T);
  const auto ds = design_summary(p);
  const auto fit = fit_gls(p, ds);

  // X = [1, x - xbar_i, xbar_i], Omega = I_N kron (I_T + delta * J_T)
  const auto n = static_cast<Eigen::Index>(N * T);
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd yv(n);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t t = 0; t < T; ++t) {
      const auto k = static_cast<Eigen::Index>(i * T + t);
      X(k, 0) = 1.0;
      X(k, 1) = p.xat(i, t) - ds.xbar_i[i];
      X(k, 2) = ds.xbar_i[i];
      yv(k) = p.yat(i, t);
    }

  for (double delta : {0.0, 0.8, 7.3}) {
    CAPTURE(delta);
    Eigen::MatrixXd Omega = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t s = 0; s < T; ++s)
        for (std::size_t t = 0; t < T; ++t)
          Omega(static_cast<Eigen::Index>(i * T + s),
                static_cast<Eigen::Index>(i * T + t)) =
              (s == t ? 1.0 : 0.0) + delta;
    const Eigen::MatrixXd Oi = Omega.inverse();
    const Eigen::MatrixXd A = X.transpose() * Oi * X;
    const Eigen::VectorXd beta = A.ldlt().solve(X.transpose() * Oi * yv);
    CHECK(beta(0) == doctest::Approx(fit.a_hat).epsilon(1e-10));
    CHECK(beta(1) == doctest::Approx(fit.bw_hat).epsilon(1e-10));
    CHECK(beta(2) == doctest::Approx(fit.bb_hat).epsilon(1e-10));

    // sampling variances implied by the GLS information matrix
    const Eigen::MatrixXd cov = A.inverse();
    CHECK(cov(1, 1) == doctest::Approx(1.0 / ds.ssw).epsilon(1e-10));
    CHECK(cov(2, 2) ==
          doctest::Approx((delta + 1.0 / double(T)) / ds.ssb).epsilon(1e-10));
  }
}

TEST_CASE("variance components match a direct recomputation") {
  std::mt19937_64 rng(5150);
  std::normal_distribution<double> nd;
  const std::size_t N = 40, T = 5;
  std::vector<double> x(N * T), y(N * T);
  for (std::size_t i = 0; i < N; ++i) {
    const double mu = 0.3 * nd(rng);
    const double eta = 0.9 * nd(rng);
    for (std::size_t t = 0; t < T; ++t) {
      x[i * T + t] = mu + 0.5 * nd(rng);
      y[i * T + t] = -0.4 + 1.2 * x[i * T + t] + 0.3 * mu + eta + 1.5 * nd(rng);
    }
  }
  const auto p = panel_from(N, T, x, y);
  const auto ds = design_summary(p);
  const auto fit = fit_gls(p, ds);
  const auto fr = estimate_variance_components(p);

  double ssw_res = 0.0, ssb_res = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double ybar = 0.0;
    for (std::size_t t = 0; t < T; ++t) ybar += y[i * T + t];
    ybar /= double(T);
    for (std::size_t t = 0; t < T; ++t) {
      const double e =
          y[i * T + t] - ybar - fit.bw_hat * (x[i * T + t] - ds.xbar_i[i]);
      ssw_res += e * e;
    }
    const double e = ybar - fit.a_hat - fit.bb_hat * ds.xbar_i[i];
    ssb_res += e * e;
  }
  const double s2 = ssw_res / double(N * (T - 1));
  const double eta2 = ssb_res / double(N) - s2 / double(T);
  CHECK(fr.sigma_eps2_hat == doctest::Approx(s2).epsilon(1e-12));
  CHECK(fr.sigma_eta2_hat == doctest::Approx(eta2).epsilon(1e-12));
  CHECK(fr.delta_hat == doctest::Approx(std::max(0.0, eta2 / s2)).epsilon(1e-12));
  CHECK(fr.h_hat == hausman_stat(p, std::sqrt(fr.sigma_eps2_hat), fr.delta_hat));
}

TEST_CASE("variance estimates land near the truth on a big panel") {
  std::mt19937_64 rng(777);
  std::normal_distribution<double> nd;
  const std::size_t N = 4000, T = 4;
  const double sig_eps = 1.5, sig_eta2 = 0.9;
  std::vector<double> x(N * T), y(N * T);
  for (std::size_t i = 0; i < N; ++i) {
    const double mu = 0.5 + 0.4 * nd(rng);
    const double eta = std::sqrt(sig_eta2) * nd(rng);
    for (std::size_t t = 0; t < T; ++t) {
      x[i * T + t] = mu + 0.3 * nd(rng);
      y[i * T + t] = 2.0 + 0.7 * x[i * T + t] + eta + sig_eps * nd(rng);
    }
  }
  const auto fr = estimate_variance_components(panel_from(N, T, x, y));
  CHECK(fr.sigma_eps2_hat == doctest::Approx(sig_eps * sig_eps).epsilon(0.06));
  CHECK(fr.sigma_eta2_hat == doctest::Approx(sig_eta2).epsilon(0.15));
  CHECK(fr.delta_hat == doctest::Approx(sig_eta2 / (sig_eps * sig_eps)).epsilon(0.2));
}

TEST_CASE("two units force the between residuals to zero") {
  // the between regression through two points fits exactly, so the eta
  // variance estimate is -sigma^2/T and delta truncates at 0
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const std::size_t N = 2, T = 3;
  std::vector<double> x(N * T), y(N * T);
  for (std::size_t k = 0; k < N * T; ++k) {
    x[k] = nd(rng);
    y[k] = 0.2 * x[k] + nd(rng);
  }
  x[0] += 4.0;  // keep the unit means apart
  const auto fr = estimate_variance_components(panel_from(N, T, x, y));
  CHECK(fr.sigma_eta2_hat ==
        doctest::Approx(-fr.sigma_eps2_hat / double(T)).epsilon(1e-12));
  CHECK(fr.delta_hat == 0.0);
}

TEST_CASE("an exact fit has no residual variance to estimate") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  const std::size_t N = 5, T = 3;
  std::vector<double> x(N * T), y(N * T);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t t = 0; t < T; ++t) {
      x[i * T + t] = nd(rng) + 2.0 * double(i == 0);
      y[i * T + t] = 3.0 + 2.0 * x[i * T + t];
    }
  const auto p = panel_from(N, T, x, y);
  CHECK(kind_of([&] { estimate_variance_components(p); }) ==
        ErrorKind::zero_residual_variance);
}

TEST_CASE("hausman statistic matches its definition") {
  std::mt19937_64 rng(31);
  const auto p = random_panel(rng, 8, 4);
  const auto ds = design_summary(p);
  const auto fit = fit_gls(p, ds);
  const double sigma = 1.3, delta = 0.7;
  const double denom = sigma * std::sqrt(1.0 / ds.ssw +
                                         (delta + 1.0 / double(ds.T)) / ds.ssb);
  CHECK(hausman_stat(p, sigma, delta) ==
        doctest::Approx((fit.bw_hat - fit.bb_hat) / denom).epsilon(1e-14));
  CHECK(kind_of([&] { hausman_stat(p, 0.0, delta); }) ==
        ErrorKind::invalid_argument);
  CHECK(kind_of([&] { hausman_stat(p, sigma, -0.1); }) ==
        ErrorKind::invalid_argument);
}

TEST_CASE("correlation map and its inverse") {
  CHECK(rho_of_delta(4.0, 0.0, 4) ==
        doctest::Approx(-4.0 / std::sqrt(17.0)).epsilon(1e-15));
  CHECK(rho_of_delta(1.0, 0.75, 4) == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-15));

  for (double r : {0.125, 1.0, 4.9547}) {
    double prev = -1.0;
    for (double delta : {0.0, 0.3, 5.0, 80.0}) {
      const double rho = rho_of_delta(r, delta, 4);
      CHECK(rho > -1.0);
      CHECK(rho < 0.0);
      CHECK(rho > prev);  // increasing toward 0 as delta grows
      prev = rho;
      CHECK(delta_of_rho(r, rho, 4) == doctest::Approx(delta).epsilon(1e-10));
    }
  }

  // correlations steeper than rho(0) have no nonnegative preimage: clamp
  CHECK(delta_of_rho(1.0, -0.95, 4) == 0.0);
  CHECK(kind_of([] { delta_of_rho(1.0, 0.0, 4); }) ==
        ErrorKind::no_finite_solution);
  CHECK(kind_of([] { delta_of_rho(1.0, 0.5, 4); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { delta_of_rho(1.0, -1.0, 4); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { rho_of_delta(-2.0, 1.0, 4); }) == ErrorKind::invalid_argument);
}

TEST_CASE("fixed effects interval") {
  auto p = panel_from(2, 2, {0.0, 2.0, 1.0, 3.0});
  p.y = {1.0, 2.0, 0.0, 4.0};
  const auto ds = design_summary(p);  // ssw = 4
  const auto fit = fit_gls(p, ds);
  const auto iv = fixed_effects_interval(p, 2.0, 0.95);
  const double half = two_sided_z(0.95) * 2.0 / 2.0;
  CHECK(iv.lower == doctest::Approx(fit.bw_hat - half).epsilon(1e-14));
  CHECK(iv.upper == doctest::Approx(fit.bw_hat + half).epsilon(1e-14));

  const auto point = fixed_effects_interval(p, 2.0, 0.0);
  CHECK(point.lower == doctest::Approx(fit.bw_hat).epsilon(1e-14));
  CHECK(point.upper == doctest::Approx(fit.bw_hat).epsilon(1e-14));
}

TEST_CASE("model parameterizations agree") {
  const auto mp = ModelParams::make(1.0, -2.0, 0.6, 1.5, 0.4, 100);
  CHECK(mp.gamma == doctest::Approx(0.6 * 10.0 / 1.5).epsilon(1e-15));
  const auto cp = ModelParams::canonical(4.0, 0.4, 100);
  CHECK(cp.a == 0.0);
  CHECK(cp.b == 0.0);
  CHECK(cp.sigma_eps == 1.0);
  CHECK(cp.xi == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(cp.gamma == 4.0);
  CHECK(cp.delta == 0.4);
}

}  // TEST_SUITE
