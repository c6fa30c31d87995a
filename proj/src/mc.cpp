#include "exoci/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "exoci/math.hpp"

namespace exoci {

namespace {

constexpr std::uint64_t kBlock = 4096;  // replications per work unit
constexpr std::uint32_t kMaxRetries = 100;

// Design quantities that are fixed across replications.
struct DesignPre {
  std::size_t N = 0, T = 0;
  double ssw = 0.0, ssb = 0.0, xbar = 0.0;
  std::vector<double> xbar_i;
  std::vector<double> x;  // row-major copy
};

DesignPre precompute(const PanelData& design) {
  const DesignSummary ds = design_summary(design);
  DesignPre dp;
  dp.N = ds.N;
  dp.T = ds.T;
  dp.ssw = ds.ssw;
  dp.ssb = ds.ssb;
  dp.xbar = ds.xbar;
  dp.xbar_i = ds.xbar_i;
  dp.x = design.x;
  return dp;
}

// Mirrors fit_gls + estimate_variance_components on synthetic y, without
// building a PanelData per replication. `y` is caller-provided scratch.
RunStats run_once(const DesignPre& dp, const ModelParams& mp,
                  NormalStream& stream, const NoiseSampler& noise,
                  std::vector<double>& y, std::vector<double>& ybar_i) {
  const std::size_t N = dp.N, T = dp.T;
  const double sigma_eta = mp.sigma_eps * std::sqrt(mp.delta);
  y.resize(N * T);
  ybar_i.resize(N);

  auto draw = [&]() { return noise ? noise(stream) : stream.next(); };
  for (std::size_t i = 0; i < N; ++i) ybar_i[i] = sigma_eta * draw();  // eta_i
  CompensatedSum grand;
  for (std::size_t i = 0; i < N; ++i) {
    const double unit = mp.a + mp.xi * dp.xbar_i[i] + ybar_i[i];
    CompensatedSum s;
    for (std::size_t t = 0; t < T; ++t) {
      const double v = unit + mp.b * dp.x[i * T + t] + mp.sigma_eps * draw();
      y[i * T + t] = v;
      s.add(v);
    }
    ybar_i[i] = s.value() / static_cast<double>(T);
    grand.add(s.value());
  }
  const double ybar = grand.value() / static_cast<double>(N * T);

  CompensatedSum sw, sb;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t)
      sw.add((dp.x[i * T + t] - dp.xbar_i[i]) * (y[i * T + t] - ybar_i[i]));
    sb.add((dp.xbar_i[i] - dp.xbar) * (ybar_i[i] - ybar));
  }
  const double bw = sw.value() / dp.ssw;
  const double bb = sb.value() / dp.ssb;
  const double a = ybar - bb * dp.xbar;

  CompensatedSum ss_within, ss_between, msq_y;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const double r_it =
          (y[i * T + t] - ybar_i[i]) - bw * (dp.x[i * T + t] - dp.xbar_i[i]);
      ss_within.add(r_it * r_it);
      msq_y.add(y[i * T + t] * y[i * T + t]);
    }
    const double r_i = ybar_i[i] - (a + bb * dp.xbar_i[i]);
    ss_between.add(r_i * r_i);
  }
  const double sigma2 = ss_within.value() / static_cast<double>(N * (T - 1));
  const double floor = 1e-24 * (msq_y.value() / static_cast<double>(N * T));
  require(sigma2 > 0.0 && sigma2 > floor, ErrorKind::zero_residual_variance,
          "residual variance is zero");
  const double eta2 =
      ss_between.value() / static_cast<double>(N) - sigma2 / static_cast<double>(T);
  const double delta_hat = std::max(0.0, eta2 / sigma2);

  RunStats out;
  out.delta_hat = delta_hat;
  const double var_w = sigma2 / dp.ssw;
  const double var_b =
      sigma2 * (delta_hat + 1.0 / static_cast<double>(T)) / dp.ssb;
  out.h_hat = (bw - bb) / std::sqrt(var_w + var_b);
  out.gL_hat = (bw - mp.b) / std::sqrt(var_w);
  out.sigma_ratio = std::sqrt(sigma2) / mp.sigma_eps;
  out.bw_hat = bw;
  out.bb_hat = bb;
  return out;
}

// Runs one replication, redrawing (with a fresh retry-tagged stream) on a
// degenerate draw; returns the number of redraws used.
RunStats run_with_retries(const DesignPre& dp, const ModelParams& mp,
                          std::uint64_t seed, StreamPurpose purpose,
                          std::uint64_t rep, const NoiseSampler& noise,
                          std::vector<double>& y, std::vector<double>& ybar_i,
                          std::uint32_t& redraws) {
  for (std::uint32_t retry = 0;; ++retry) {
    require(retry < kMaxRetries, ErrorKind::zero_residual_variance,
            "replication kept producing zero residual variance");
    NormalStream stream(seed, purpose, rep, retry);
    try {
      return run_once(dp, mp, stream, noise, y, ybar_i);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::zero_residual_variance) throw;
      ++redraws;
    }
  }
}

// Deterministic block runner: fn(b) fills slot b of some result vector;
// blocks are claimed atomically, so thread count affects scheduling only.
void run_blocks(std::uint64_t n_blocks, int threads,
                const std::function<void(std::uint64_t)>& fn) {
  unsigned workers = threads > 0
                         ? static_cast<unsigned>(threads)
                         : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(
      std::min<std::uint64_t>(workers, std::max<std::uint64_t>(n_blocks, 1)));
  if (workers <= 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&]() {
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      try {
        fn(b);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void validate_config(const SimConfig& cfg) {
  require(cfg.M >= 1, ErrorKind::invalid_argument, "M must be >= 1");
  require(std::isfinite(cfg.gamma), ErrorKind::invalid_argument,
          "gamma must be finite");
  require(cfg.delta >= 0.0 && std::isfinite(cfg.delta),
          ErrorKind::invalid_argument, "delta must be finite, >= 0");
  check_design_match(cfg.grid, design_summary(cfg.design));
}

}  // namespace

RunStats simulate_run(const PanelData& design, const ModelParams& params,
                      NormalStream& stream) {
  const DesignPre dp = precompute(design);
  std::vector<double> y, ybar_i;
  return run_once(dp, params, stream, {}, y, ybar_i);
}

RunStats simulate_run(const PanelData& design, double gamma, double delta,
                      NormalStream& stream) {
  return simulate_run(
      design, ModelParams::canonical(gamma, delta, design.n_units()), stream);
}

SimEstimate estimate_cp(const SimConfig& cfg) {
  validate_config(cfg);
  const DesignPre dp = precompute(cfg.design);
  const ModelParams mp = ModelParams::canonical(cfg.gamma, cfg.delta, dp.N);

  const std::uint64_t n_blocks = (cfg.M + kBlock - 1) / kBlock;
  struct BlockOut {
    std::uint32_t covered = 0;
    std::uint32_t redraws = 0;
  };
  std::vector<BlockOut> blocks(n_blocks);

  run_blocks(n_blocks, cfg.threads, [&](std::uint64_t b) {
    std::vector<double> y, ybar_i;
    const std::uint64_t lo = b * kBlock;
    const std::uint64_t hi = std::min(cfg.M, lo + kBlock);
    BlockOut out;
    for (std::uint64_t k = lo; k < hi; ++k) {
      const RunStats rs =
          run_with_retries(dp, mp, cfg.master_seed, StreamPurpose::cp, k,
                           cfg.noise, y, ybar_i, out.redraws);
      const KnotFunctionPair pair = interpolate_pair(cfg.grid, rs.delta_hat);
      const double fo = pair.eval_odd(rs.h_hat);
      const double fe = pair.eval_even(rs.h_hat);
      if (-fo - fe <= rs.gL_hat && rs.gL_hat <= -fo + fe) ++out.covered;
    }
    blocks[b] = out;
  });

  std::uint64_t covered = 0, redraws = 0;
  for (const BlockOut& b : blocks) {
    covered += b.covered;
    redraws += b.redraws;
  }
  SimEstimate est;
  est.kind = SimKind::coverage;
  est.M = cfg.M;
  est.seed = cfg.master_seed;
  est.redraws = redraws;
  est.value = static_cast<double>(covered) / static_cast<double>(cfg.M);
  est.std_error =
      std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(cfg.M));
  return est;
}

ConfidenceCoefficient estimate_confidence_coefficient(
    const PanelData& design, const FunctionGrid& grid,
    const std::vector<double>& gamma_grid, const std::vector<double>& delta_grid,
    std::uint64_t M1, std::uint64_t M2, std::uint64_t M3,
    std::uint64_t master_seed, int threads) {
  require(!gamma_grid.empty() && !delta_grid.empty(),
          ErrorKind::invalid_argument, "search grids must be non-empty");
  require(M1 >= 1 && M1 <= M2 && M2 <= M3, ErrorKind::invalid_argument,
          "stage sizes must satisfy M1 <= M2 <= M3");

  struct Point {
    double gamma = 0.0, delta = 0.0;
    SimEstimate est;
  };
  auto run_point = [&](double gamma, double delta, std::uint64_t M) {
    SimConfig cfg;
    cfg.design = design;
    cfg.grid = grid;
    cfg.gamma = gamma;
    cfg.delta = delta;
    cfg.M = M;
    cfg.master_seed =
        derive_seed(master_seed, double_bits(gamma), double_bits(delta), M);
    cfg.threads = threads;
    Point p;
    p.gamma = gamma;
    p.delta = delta;
    p.est = estimate_cp(cfg);
    return p;
  };
  // deterministic order on equal estimates: smaller |gamma|, then delta
  auto before = [](const Point& a, const Point& b) {
    if (a.est.value != b.est.value) return a.est.value < b.est.value;
    if (std::fabs(a.gamma) != std::fabs(b.gamma))
      return std::fabs(a.gamma) < std::fabs(b.gamma);
    if (a.delta != b.delta) return a.delta < b.delta;
    return a.gamma < b.gamma;
  };

  std::vector<Point> finalists;
  for (double delta : delta_grid) {
    std::vector<Point> stage1;
    for (double gamma : gamma_grid)
      stage1.push_back(run_point(gamma, delta, M1));
    std::sort(stage1.begin(), stage1.end(), before);
    const std::size_t keep = std::min<std::size_t>(3, stage1.size());
    Point best;
    for (std::size_t j = 0; j < keep; ++j) {
      Point p = run_point(stage1[j].gamma, stage1[j].delta, M2);
      if (j == 0 || before(p, best)) best = p;
    }
    finalists.push_back(best);
  }
  Point winner = finalists.front();
  for (const Point& p : finalists)
    if (before(p, winner)) winner = p;

  ConfidenceCoefficient out;
  out.gamma_star = winner.gamma;
  out.delta_star = winner.delta;
  out.c_min = run_point(winner.gamma, winner.delta, M3).est;
  out.c_min.kind = SimKind::conf_coeff;
  return out;
}

SimEstimate estimate_sel(const SimConfig& cfg, double c_min) {
  validate_config(cfg);
  require(c_min > 0.0 && c_min < 1.0, ErrorKind::invalid_argument,
          "c_min must lie in (0,1)");
  const DesignPre dp = precompute(cfg.design);
  const ModelParams mp = ModelParams::canonical(cfg.gamma, cfg.delta, dp.N);

  const std::uint64_t n_blocks = (cfg.M + kBlock - 1) / kBlock;
  struct BlockOut {
    double num = 0.0, num2 = 0.0;    // sum and sum of squares, NUM set
    double term = 0.0, term2 = 0.0;  // same for the TERM set
    std::uint32_t redraws = 0;
  };
  std::vector<BlockOut> blocks(n_blocks);

  run_blocks(n_blocks, cfg.threads, [&](std::uint64_t b) {
    std::vector<double> y, ybar_i;
    const std::uint64_t lo = b * kBlock;
    const std::uint64_t hi = std::min(cfg.M, lo + kBlock);
    BlockOut out;
    CompensatedSum num, num2, term, term2;
    for (std::uint64_t k = lo; k < hi; ++k) {
      const RunStats a =
          run_with_retries(dp, mp, cfg.master_seed, StreamPurpose::sel_num, k,
                           cfg.noise, y, ybar_i, out.redraws);
      const KnotFunctionPair pair = interpolate_pair(cfg.grid, a.delta_hat);
      const double v = a.sigma_ratio * pair.eval_even(a.h_hat);
      num.add(v);
      num2.add(v * v);

      const RunStats bset =
          run_with_retries(dp, mp, cfg.master_seed, StreamPurpose::sel_term, k,
                           cfg.noise, y, ybar_i, out.redraws);
      term.add(bset.sigma_ratio);
      term2.add(bset.sigma_ratio * bset.sigma_ratio);
    }
    out.num = num.value();
    out.num2 = num2.value();
    out.term = term.value();
    out.term2 = term2.value();
    blocks[b] = out;
  });

  CompensatedSum num, num2, term, term2;
  std::uint64_t redraws = 0;
  for (const BlockOut& b : blocks) {
    num.add(b.num);
    num2.add(b.num2);
    term.add(b.term);
    term2.add(b.term2);
    redraws += b.redraws;
  }
  const double M = static_cast<double>(cfg.M);
  const double num_mean = num.value() / M;
  const double term_mean = term.value() / M;
  require(term_mean > 0.0, ErrorKind::invalid_argument,
          "degenerate TERM average");
  const double ztilde = two_sided_z(c_min);

  SimEstimate est;
  est.kind = SimKind::sel;
  est.M = cfg.M;
  est.seed = cfg.master_seed;
  est.redraws = redraws;
  est.value = num_mean / (ztilde * term_mean);
  // independent sets: relative variances add
  const double var_num =
      std::max(0.0, num2.value() / M - num_mean * num_mean) / M;
  const double var_term =
      std::max(0.0, term2.value() / M - term_mean * term_mean) / M;
  est.std_error = std::fabs(est.value) *
                  std::sqrt(var_num / (num_mean * num_mean) +
                            var_term / (term_mean * term_mean));
  return est;
}

}  // namespace exoci
