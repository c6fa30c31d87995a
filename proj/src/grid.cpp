#include "exoci/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "exoci/math.hpp"

namespace exoci {

namespace {

const double kGridRhos[11] = {0.0,  -0.1, -0.2, -0.3, -0.4, -0.5,
                              -0.6, -0.7, -0.8, -0.9, -0.97};

void validate_grid(const FunctionGrid& g) {
  require(g.N >= 2 && g.T >= 2, ErrorKind::invalid_argument,
          "grid needs N >= 2, T >= 2");
  require(g.ssw > 0.0 && g.ssb > 0.0, ErrorKind::invalid_argument,
          "grid needs positive ssw and ssb");
  require(g.alpha > 0.0 && g.alpha < 1.0, ErrorKind::invalid_argument,
          "grid alpha must lie in (0,1)");
  require(g.d > 0.0, ErrorKind::invalid_argument, "grid d must be > 0");
  require(g.entries.size() == 11, ErrorKind::invalid_argument,
          "grid must hold 11 entries");
  require(g.entries.front().rho == 0.0 && std::isinf(g.entries.front().delta),
          ErrorKind::invalid_argument,
          "first grid entry must be the standard one at rho 0");
  for (std::size_t j = 1; j < g.entries.size(); ++j) {
    require(g.entries[j].rho <= g.entries[j - 1].rho,
            ErrorKind::invalid_argument, "grid rho must not increase");
    require(g.entries[j].rho > -1.0 && g.entries[j].rho < 0.0,
            ErrorKind::invalid_argument, "grid rho must lie in (-1, 0)");
    require(g.entries[j].delta >= 0.0 && !std::isinf(g.entries[j].delta),
            ErrorKind::invalid_argument, "grid delta must be finite, >= 0");
  }
}

}  // namespace

FunctionGrid build_grid(const DesignSummary& ds, double alpha, int threads) {
  require(ds.N >= 2 && ds.T >= 2 && ds.ssw > 0.0 && ds.ssb > 0.0,
          ErrorKind::degenerate_design, "design summary is degenerate");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::invalid_argument,
          "alpha must lie in (0,1)");

  FunctionGrid g;
  g.N = ds.N;
  g.T = ds.T;
  g.ssw = ds.ssw;
  g.ssb = ds.ssb;
  g.r = ds.r;
  g.alpha = alpha;

  const double rho0 = rho_of_delta(ds.r, 0.0, ds.T);  // most negative reachable
  // Entries whose nominal rho is unreachable for this design (delta would
  // be negative) all collapse to the delta = 0 entry; optimize that rho once.
  std::vector<double> rho_run(11), delta_run(11);
  for (int j = 0; j < 11; ++j) {
    const double nominal = kGridRhos[j];
    if (j == 0) {
      rho_run[0] = 0.0;
      delta_run[0] = std::numeric_limits<double>::infinity();
    } else if (nominal <= rho0) {
      rho_run[static_cast<std::size_t>(j)] = rho0;
      delta_run[static_cast<std::size_t>(j)] = 0.0;
    } else {
      rho_run[static_cast<std::size_t>(j)] = nominal;
      delta_run[static_cast<std::size_t>(j)] = delta_of_rho(ds.r, nominal, ds.T);
    }
  }

  // distinct optimization jobs (clamped entries share one)
  std::vector<double> jobs;
  for (int j = 1; j < 11; ++j) {
    const double rho = rho_run[static_cast<std::size_t>(j)];
    if (std::find(jobs.begin(), jobs.end(), rho) == jobs.end())
      jobs.push_back(rho);
  }

  std::vector<OptimizedPair> results(jobs.size());
  std::vector<std::string> failures(jobs.size());
  {
    unsigned n_workers = threads > 0
                             ? static_cast<unsigned>(threads)
                             : std::max(1u, std::thread::hardware_concurrency());
    n_workers = std::min<unsigned>(n_workers, static_cast<unsigned>(jobs.size()));
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&]() {
      for (;;) {
        std::size_t j;
        {
          std::lock_guard<std::mutex> lk(mu);
          if (next >= jobs.size()) return;
          j = next++;
        }
        try {
          KGContext ctx = KGContext::make(jobs[j], alpha, g.d);
          results[j] = select_phi(ctx);
        } catch (const Error& e) {
          failures[j] = e.what();
        }
      }
    };
    if (n_workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "optimization failed at rho = %.6g: ",
                  jobs[j]);
    require(failures[j].empty(), ErrorKind::optimizer_failure,
            std::string(buf) + failures[j]);
  }

  g.entries.resize(11);
  g.entries[0].rho = 0.0;
  g.entries[0].delta = std::numeric_limits<double>::infinity();
  g.entries[0].phi_star = 1.0;
  {
    OptimizedPair std_opt;
    std_opt.pair = standard_pair(alpha, g.d);
    std_opt.phi = 1.0;
    std_opt.min_cp = 1.0 - alpha;
    std_opt.converged = true;
    g.entries[0].opt = std_opt;
  }
  for (int j = 1; j < 11; ++j) {
    GridEntry& e = g.entries[static_cast<std::size_t>(j)];
    e.rho = rho_run[static_cast<std::size_t>(j)];
    e.delta = delta_run[static_cast<std::size_t>(j)];
    const std::size_t job = static_cast<std::size_t>(
        std::find(jobs.begin(), jobs.end(), e.rho) - jobs.begin());
    e.opt = results[job];
    e.phi_star = e.opt.phi;
  }
  validate_grid(g);
  return g;
}

KnotFunctionPair interpolate_pair(const FunctionGrid& grid, double delta) {
  validate_grid(grid);
  require(std::isfinite(delta) || std::isinf(delta), ErrorKind::invalid_argument,
          "delta must not be NaN");
  require(!(delta < 0.0), ErrorKind::invalid_argument, "delta must be >= 0");

  // exact node hit returns the stored pair unchanged
  for (const GridEntry& e : grid.entries)
    if (delta == e.delta) return e.opt.pair;

  const double rho =
      std::isinf(delta) ? 0.0 : rho_of_delta(grid.r, delta, grid.T);
  const auto& es = grid.entries;
  if (rho >= es.front().rho) return es.front().opt.pair;
  if (rho <= es.back().rho) return es.back().opt.pair;

  std::size_t j = 0;
  while (j + 2 < es.size() && rho < es[j + 1].rho) ++j;
  const double r0 = es[j].rho, r1 = es[j + 1].rho;
  if (r0 == r1) return es[j].opt.pair;  // duplicated clamped entries
  const double t = (r0 - rho) / (r0 - r1);

  const std::vector<double>& o0 = es[j].opt.pair.odd_knots();
  const std::vector<double>& o1 = es[j + 1].opt.pair.odd_knots();
  const std::vector<double>& e0 = es[j].opt.pair.even_knots();
  const std::vector<double>& e1 = es[j + 1].opt.pair.even_knots();
  std::vector<double> odd(5), even(6);
  for (std::size_t k = 0; k < 5; ++k)
    odd[k] = (1.0 - t) * o0[k] + t * o1[k];
  for (std::size_t k = 0; k < 6; ++k) {
    even[k] = (1.0 - t) * e0[k] + t * e1[k];
    if (even[k] < 0.0) even[k] = 0.0;  // guard roundoff at a zero knot
  }
  return make_pair(odd, even, grid.alpha, grid.d);
}

void check_design_match(const FunctionGrid& grid, const DesignSummary& ds) {
  const bool nt_ok = grid.N == ds.N && grid.T == ds.T;
  auto close = [](double a, double b) {
    return std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b));
  };
  require(nt_ok && close(grid.ssw, ds.ssw) && close(grid.ssb, ds.ssb),
          ErrorKind::grid_mismatch,
          "grid was built for a different design (N/T/ssw/ssb mismatch)");
}

namespace {

void put_real(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void save_grid(std::ostream& out, const FunctionGrid& grid) {
  validate_grid(grid);
  out << "exoci-grid v1\n";
  out << "# interval-shape pairs optimized per correlation\n";
  out << "alpha ";
  put_real(out, grid.alpha);
  out << "\nd ";
  put_real(out, grid.d);
  out << "\nN " << grid.N << "\nT " << grid.T << "\nssw ";
  put_real(out, grid.ssw);
  out << "\nssb ";
  put_real(out, grid.ssb);
  out << "\n";
  for (const GridEntry& e : grid.entries) {
    out << "rho ";
    put_real(out, e.rho);
    out << " delta ";
    put_real(out, e.delta);
    out << " phi_star ";
    put_real(out, e.phi_star);
    out << "\nodd:";
    for (double v : e.opt.pair.odd_knots()) {
      out << ' ';
      put_real(out, v);
    }
    out << "\neven:";
    for (double v : e.opt.pair.even_knots()) {
      out << ' ';
      put_real(out, v);
    }
    out << "\n";
  }
  require(static_cast<bool>(out), ErrorKind::io_error, "grid write failed");
}

void save_grid_file(const std::string& path, const FunctionGrid& grid) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io_error,
          "cannot open for writing: " + path);
  save_grid(out, grid);
  out.flush();
  require(static_cast<bool>(out), ErrorKind::io_error,
          "grid write failed: " + path);
}

namespace {

struct LineReader {
  std::istream& in;
  int lineno = 0;
  // next content line, '#' comments and blank lines skipped
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      if (line[b] == '#') continue;
      std::size_t e = line.find_last_not_of(" \t\r");
      line = line.substr(b, e - b + 1);
      return true;
    }
    return false;
  }
  [[noreturn]] void bad(const std::string& what) const {
    char buf[32];
    std::snprintf(buf, sizeof buf, " (line %d)", lineno);
    fail(ErrorKind::parse_error, "grid file: " + what + buf);
  }
};

double parse_real_token(LineReader& lr, const std::string& tok) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') lr.bad("expected a number, got '" + tok + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

// "key value" line with a required key
double expect_scalar(LineReader& lr, const std::string& key) {
  std::string line;
  if (!lr.next(line)) lr.bad("unexpected end of file, wanted '" + key + "'");
  const auto toks = split_ws(line);
  if (toks.size() != 2 || toks[0] != key)
    lr.bad("expected '" + key + " <value>'");
  return parse_real_token(lr, toks[1]);
}

}  // namespace

FunctionGrid load_grid(std::istream& in) {
  LineReader lr{in};
  std::string line;
  if (!lr.next(line)) lr.bad("empty input");
  if (line != "exoci-grid v1") lr.bad("unrecognized header '" + line + "'");

  FunctionGrid g;
  g.alpha = expect_scalar(lr, "alpha");
  g.d = expect_scalar(lr, "d");
  const double n_real = expect_scalar(lr, "N");
  const double t_real = expect_scalar(lr, "T");
  if (n_real < 2 || t_real < 2 || n_real != std::floor(n_real) ||
      t_real != std::floor(t_real))
    lr.bad("N and T must be integers >= 2");
  g.N = static_cast<std::size_t>(n_real);
  g.T = static_cast<std::size_t>(t_real);
  g.ssw = expect_scalar(lr, "ssw");
  g.ssb = expect_scalar(lr, "ssb");
  if (!(g.ssw > 0.0) || !(g.ssb > 0.0)) lr.bad("ssw and ssb must be > 0");
  g.r = g.ssb / g.ssw;

  for (int j = 0; j < 11; ++j) {
    if (!lr.next(line)) lr.bad("unexpected end of file in entry block");
    auto toks = split_ws(line);
    if (toks.size() != 6 || toks[0] != "rho" || toks[2] != "delta" ||
        toks[4] != "phi_star")
      lr.bad("expected 'rho <v> delta <v> phi_star <v>'");
    GridEntry e;
    e.rho = parse_real_token(lr, toks[1]);
    e.delta = parse_real_token(lr, toks[3]);
    e.phi_star = parse_real_token(lr, toks[5]);

    if (!lr.next(line)) lr.bad("unexpected end of file, wanted odd knots");
    toks = split_ws(line);
    if (toks.size() != 6 || toks[0] != "odd:") lr.bad("expected 'odd: <5 values>'");
    std::vector<double> odd(5);
    for (int k = 0; k < 5; ++k)
      odd[static_cast<std::size_t>(k)] =
          parse_real_token(lr, toks[static_cast<std::size_t>(k + 1)]);

    if (!lr.next(line)) lr.bad("unexpected end of file, wanted even knots");
    toks = split_ws(line);
    if (toks.size() != 7 || toks[0] != "even:")
      lr.bad("expected 'even: <6 values>'");
    std::vector<double> even(6);
    for (int k = 0; k < 6; ++k)
      even[static_cast<std::size_t>(k)] =
          parse_real_token(lr, toks[static_cast<std::size_t>(k + 1)]);

    e.opt.pair = make_pair(odd, even, g.alpha, g.d);
    e.opt.phi = e.phi_star;
    g.entries.push_back(std::move(e));
  }
  if (lr.next(line)) lr.bad("trailing content after 11 entries");
  validate_grid(g);
  return g;
}

FunctionGrid load_grid_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io_error,
          "cannot open grid file: " + path);
  return load_grid(in);
}

CIResult known_ci(const GlsFit& fit, const DesignSummary& ds, double sigma_eps,
                  double delta, const FunctionGrid& grid) {
  check_design_match(grid, ds);
  require(sigma_eps > 0.0, ErrorKind::invalid_argument, "sigma_eps must be > 0");
  require(delta >= 0.0, ErrorKind::invalid_argument, "delta must be >= 0");

  CIResult out;
  out.sigma_used = sigma_eps;
  out.delta_used = delta;
  out.h_used = hausman_stat(fit, ds, sigma_eps, delta);

  const KnotFunctionPair pair = interpolate_pair(grid, delta);
  out.reverted = std::fabs(out.h_used) >= pair.d();
  out.center_shift = pair.eval_odd(out.h_used);
  out.half_width = pair.eval_even(out.h_used);

  // Written so that a reverted interval reproduces the fixed-effects one
  // bit-for-bit: f_o is exactly 0 and f_e exactly z there.
  const double center =
      fit.bw_hat + out.center_shift * sigma_eps / std::sqrt(ds.ssw);
  const double half = out.half_width * sigma_eps / std::sqrt(ds.ssw);
  out.lower = center - half;
  out.upper = center + half;
  return out;
}

CIResult known_ci(const PanelData& p, double sigma_eps, double delta,
                  const FunctionGrid& grid) {
  require(p.has_y(), ErrorKind::invalid_argument, "panel has no response");
  const DesignSummary ds = design_summary(p);
  return known_ci(fit_gls(p, ds), ds, sigma_eps, delta, grid);
}

CIResult plugin_ci(const PanelData& p, const FunctionGrid& grid) {
  require(p.has_y(), ErrorKind::invalid_argument, "panel has no response");
  const DesignSummary ds = design_summary(p);
  const FitResult fr = estimate_variance_components(p, ds);
  GlsFit fit;
  fit.a_hat = fr.a_hat;
  fit.bw_hat = fr.bw_hat;
  fit.bb_hat = fr.bb_hat;
  return known_ci(fit, ds, std::sqrt(fr.sigma_eps2_hat), fr.delta_hat, grid);
}

}  // namespace exoci
