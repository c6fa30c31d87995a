// Command line front end: panel fitting, grid building, interval
// construction, formula curves, and the simulation studies.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "exoci/grid.hpp"
#include "exoci/kg.hpp"
#include "exoci/math.hpp"
#include "exoci/mc.hpp"
#include "exoci/panel.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_u64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(v));
  return buf;
}

double parse_real(const std::string& tok, const std::string& what) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  exoci::require(end != s && *end == '\0', exoci::ErrorKind::invalid_argument,
                 what + ": expected a number, got '" + tok + "'");
  return v;
}

// "lo:step:hi" (inclusive, step > 0) or a comma separated list
std::vector<double> parse_value_grid(const std::string& text,
                                     const std::string& what) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    exoci::require(parts.size() == 3, exoci::ErrorKind::invalid_argument,
                   what + ": expected lo:step:hi");
    const double lo = parse_real(parts[0], what);
    const double step = parse_real(parts[1], what);
    const double hi = parse_real(parts[2], what);
    exoci::require(step > 0.0 && hi >= lo, exoci::ErrorKind::invalid_argument,
                   what + ": need step > 0 and hi >= lo");
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) out.push_back(lo + step * i);
  } else {
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(parse_real(tok, what));
    }
  }
  exoci::require(!out.empty(), exoci::ErrorKind::invalid_argument,
                 what + ": empty grid");
  return out;
}

std::uint64_t env_or(const char* name, std::uint64_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(v, &end, 10);
  exoci::require(end != v && *end == '\0', exoci::ErrorKind::invalid_argument,
                 std::string(name) + " must be an unsigned integer");
  return parsed;
}

std::string utc_now() {
  char buf[32];
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

using KV = std::vector<std::pair<std::string, std::string>>;

void write_manifest(const std::string& output_path, const KV& entries) {
  const std::string path = output_path + ".manifest";
  std::ofstream out(path);
  exoci::require(static_cast<bool>(out), exoci::ErrorKind::io_error,
                 "cannot write manifest: " + path);
  out << "version=" << kVersion << "\n";
  for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
  out << "timestamp=" << utc_now() << "\n";
  exoci::require(static_cast<bool>(out), exoci::ErrorKind::io_error,
                 "manifest write failed: " + path);
}

// CSV goes to --out when given, stdout otherwise; manifests only accompany
// real files.
void emit(const std::string& out_path, const std::string& csv, const KV& meta) {
  if (out_path.empty()) {
    std::cout << csv;
    return;
  }
  std::ofstream out(out_path);
  exoci::require(static_cast<bool>(out), exoci::ErrorKind::io_error,
                 "cannot open for writing: " + out_path);
  out << csv;
  out.flush();
  exoci::require(static_cast<bool>(out), exoci::ErrorKind::io_error,
                 "write failed: " + out_path);
  write_manifest(out_path, meta);
}

struct SimArgs {
  std::string panel_path, grid_path, out_path;
  std::string gamma_grid = "-200:10:200";
  std::string delta_grid = "0,2.5,5,7.5,10,12.5,15,20,30,50,80";
  std::uint64_t M = 100000;
  std::uint64_t M1 = 100000, M2 = 1000000, M3 = 4000000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
  double cmin = -1.0;  // sel only; default grid's 1 - alpha
};

std::uint64_t resolve_seed(const SimArgs& a) {
  return a.seed_set ? a.seed : env_or("EXOCI_SEED", 0);
}

int resolve_threads(int flag_value) {
  if (flag_value >= 0) return flag_value;
  return static_cast<int>(env_or("EXOCI_THREADS", 0));
}

int run_fit(const std::string& panel_path) {
  const exoci::PanelData p = exoci::load_panel_file(panel_path);
  const exoci::FitResult fr = exoci::estimate_variance_components(p);
  std::string csv =
      "a_hat,bw_hat,bb_hat,sigma_eps2_hat,sigma_eta2_hat,delta_hat,h_hat\n";
  csv += fmt17(fr.a_hat) + "," + fmt17(fr.bw_hat) + "," + fmt17(fr.bb_hat) +
         "," + fmt17(fr.sigma_eps2_hat) + "," + fmt17(fr.sigma_eta2_hat) + "," +
         fmt17(fr.delta_hat) + "," + fmt17(fr.h_hat) + "\n";
  std::cout << csv;
  return 0;
}

int run_grid_build(const std::string& panel_path, const std::string& out_path,
                   double alpha, int threads) {
  const exoci::PanelData p = exoci::load_panel_file(panel_path);
  const exoci::DesignSummary ds = exoci::design_summary(p);
  const exoci::FunctionGrid g =
      exoci::build_grid(ds, alpha, resolve_threads(threads));
  exoci::save_grid_file(out_path, g);
  write_manifest(out_path, {{"command", "grid build"},
                            {"input.panel", panel_path},
                            {"output.grid", out_path},
                            {"alpha", fmt17(alpha)}});
  std::cerr << "grid written to " << out_path << "\n";
  return 0;
}

int run_ci(const std::string& panel_path, const std::string& grid_path,
           double sigma_eps, double delta, bool known,
           const std::string& out_path) {
  const exoci::PanelData p = exoci::load_panel_file(panel_path);
  const exoci::FunctionGrid g = exoci::load_grid_file(grid_path);
  const exoci::CIResult ci = known ? exoci::known_ci(p, sigma_eps, delta, g)
                                   : exoci::plugin_ci(p, g);
  std::string csv =
      "lower,upper,center_shift,half_width,h,sigma_eps,delta,reverted\n";
  csv += fmt17(ci.lower) + "," + fmt17(ci.upper) + "," +
         fmt17(ci.center_shift) + "," + fmt17(ci.half_width) + "," +
         fmt17(ci.h_used) + "," + fmt17(ci.sigma_used) + "," +
         fmt17(ci.delta_used) + "," + (ci.reverted ? "true" : "false") + "\n";
  emit(out_path, csv,
       {{"command", "ci"},
        {"input.panel", panel_path},
        {"input.grid", grid_path},
        {"output.csv", out_path},
        {"mode", known ? "known" : "plugin"}});
  return 0;
}

int run_curves(bool want_cp, const std::string& grid_path, double delta,
               const std::string& psi_range, const std::string& out_path) {
  const exoci::FunctionGrid g = exoci::load_grid_file(grid_path);
  const std::vector<double> psis = parse_value_grid(psi_range, "--psi-range");
  const exoci::KnotFunctionPair pair = exoci::interpolate_pair(g, delta);
  const double rho = exoci::rho_of_delta(g.r, delta, g.T);
  const exoci::KGContext ctx = exoci::KGContext::make(rho, g.alpha, g.d);
  std::string csv = want_cp ? "psi,cp\n" : "psi,sel\n";
  for (double psi : psis) {
    const double v = want_cp ? exoci::coverage_probability(ctx, pair, psi)
                             : exoci::scaled_expected_length(ctx, pair, psi);
    csv += fmt17(psi) + "," + fmt17(v) + "\n";
  }
  emit(out_path, csv,
       {{"command", want_cp ? "curves cp" : "curves sel"},
        {"input.grid", grid_path},
        {"output.csv", out_path},
        {"delta", fmt17(delta)},
        {"rho", fmt17(rho)},
        {"psi_range", psi_range}});
  return 0;
}

int run_sim_cp_or_sel(bool want_cp, const SimArgs& a) {
  const exoci::PanelData p = exoci::load_panel_file(a.panel_path);
  const exoci::FunctionGrid g = exoci::load_grid_file(a.grid_path);
  const std::vector<double> gammas = parse_value_grid(a.gamma_grid, "--gamma-grid");
  const std::vector<double> deltas = parse_value_grid(a.delta_grid, "--delta-grid");
  const std::uint64_t seed = resolve_seed(a);
  const int threads = resolve_threads(a.threads);
  const double cmin = a.cmin >= 0.0 ? a.cmin : 1.0 - g.alpha;

  std::string csv = "gamma,delta,estimate,std_error,M,seed\n";
  for (double delta : deltas) {
    for (double gamma : gammas) {
      exoci::SimConfig cfg;
      cfg.design = p;
      cfg.grid = g;
      cfg.gamma = gamma;
      cfg.delta = delta;
      cfg.M = a.M;
      cfg.master_seed = exoci::derive_seed(seed, exoci::double_bits(gamma),
                                           exoci::double_bits(delta), a.M);
      cfg.threads = threads;
      const exoci::SimEstimate est =
          want_cp ? exoci::estimate_cp(cfg) : exoci::estimate_sel(cfg, cmin);
      csv += fmt17(gamma) + "," + fmt17(delta) + "," + fmt17(est.value) + "," +
             fmt17(est.std_error) + "," + fmt_u64(est.M) + "," +
             fmt_u64(est.seed) + "\n";
    }
  }
  KV meta = {{"command", want_cp ? "sim cp" : "sim sel"},
             {"input.panel", a.panel_path},
             {"input.grid", a.grid_path},
             {"output.csv", a.out_path},
             {"gamma_grid", a.gamma_grid},
             {"delta_grid", a.delta_grid},
             {"M", fmt_u64(a.M)},
             {"seed", fmt_u64(seed)}};
  if (!want_cp) meta.push_back({"cmin", fmt17(cmin)});
  emit(a.out_path, csv, meta);
  return 0;
}

int run_sim_confcoef(const SimArgs& a) {
  const exoci::PanelData p = exoci::load_panel_file(a.panel_path);
  const exoci::FunctionGrid g = exoci::load_grid_file(a.grid_path);
  const std::vector<double> gammas = parse_value_grid(a.gamma_grid, "--gamma-grid");
  const std::vector<double> deltas = parse_value_grid(a.delta_grid, "--delta-grid");
  const std::uint64_t seed = resolve_seed(a);
  const exoci::ConfidenceCoefficient cc = exoci::estimate_confidence_coefficient(
      p, g, gammas, deltas, a.M1, a.M2, a.M3, seed, resolve_threads(a.threads));
  std::string csv = "gamma,delta,estimate,std_error,M,seed\n";
  csv += fmt17(cc.gamma_star) + "," + fmt17(cc.delta_star) + "," +
         fmt17(cc.c_min.value) + "," + fmt17(cc.c_min.std_error) + "," +
         fmt_u64(cc.c_min.M) + "," + fmt_u64(cc.c_min.seed) + "\n";
  emit(a.out_path, csv,
       {{"command", "sim confcoef"},
        {"input.panel", a.panel_path},
        {"input.grid", a.grid_path},
        {"output.csv", a.out_path},
        {"gamma_grid", a.gamma_grid},
        {"delta_grid", a.delta_grid},
        {"M1", fmt_u64(a.M1)},
        {"M2", fmt_u64(a.M2)},
        {"M3", fmt_u64(a.M3)},
        {"seed", fmt_u64(seed)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence intervals for the slope in panel data models with "
               "uncertain exogeneity"};
  app.require_subcommand(1);

  // fit
  std::string fit_panel;
  CLI::App* fit = app.add_subcommand("fit", "Two-stage fit of a balanced panel");
  fit->add_option("panel", fit_panel, "panel CSV (unit,time,x,y)")->required();

  // grid build
  CLI::App* grid = app.add_subcommand("grid", "Grid of optimized pairs");
  grid->require_subcommand(1);
  std::string gb_panel, gb_out;
  double gb_alpha = 0.05;
  int gb_threads = -1;
  CLI::App* gbuild = grid->add_subcommand("build", "Optimize all 11 entries");
  gbuild->add_option("panel", gb_panel, "panel CSV (y optional)")->required();
  gbuild->add_option("--alpha", gb_alpha, "nominal level (default 0.05)");
  gbuild->add_option("--out", gb_out, "grid file to write")->required();
  gbuild->add_option("--threads", gb_threads, "worker threads (0 = all cores)");

  // ci
  std::string ci_panel, ci_grid, ci_out;
  double ci_sigma = 0.0, ci_delta = 0.0;
  CLI::App* ci = app.add_subcommand("ci", "Confidence interval for the slope");
  ci->add_option("panel", ci_panel, "panel CSV with y")->required();
  ci->add_option("--grid", ci_grid, "grid file")->required();
  CLI::Option* ci_sigma_opt =
      ci->add_option("--sigma-eps", ci_sigma, "use known sigma_eps");
  CLI::Option* ci_delta_opt =
      ci->add_option("--delta", ci_delta, "use known delta");
  ci_sigma_opt->needs(ci_delta_opt);
  ci_delta_opt->needs(ci_sigma_opt);
  ci->add_option("--out", ci_out, "CSV output path (default stdout)");

  // curves cp|sel
  CLI::App* curves = app.add_subcommand("curves", "Formula curves over psi");
  curves->require_subcommand(1);
  struct CurveArgs {
    std::string grid, out, psi_range = "0:0.05:10";
    double delta = 0.0;
  } cv_cp, cv_sel;
  for (auto& [name, args, help] :
       {std::tuple<const char*, CurveArgs*, const char*>{
            "cp", &cv_cp, "coverage probability curve"},
        {"sel", &cv_sel, "scaled expected length curve"}}) {
    CLI::App* c = curves->add_subcommand(name, help);
    c->add_option("--grid", args->grid, "grid file")->required();
    c->add_option("--delta", args->delta, "delta at which to interpolate")
        ->required();
    c->add_option("--psi-range", args->psi_range, "lo:step:hi (default 0:0.05:10)");
    c->add_option("--out", args->out, "CSV output path (default stdout)");
  }

  // sim cp|sel|confcoef
  CLI::App* sim = app.add_subcommand("sim", "Monte Carlo studies");
  sim->require_subcommand(1);
  SimArgs sa_cp, sa_sel, sa_cc;
  auto add_common = [](CLI::App* c, SimArgs& a) {
    c->add_option("panel", a.panel_path, "panel CSV (x design)")->required();
    c->add_option("--grid", a.grid_path, "grid file")->required();
    c->add_option("--gamma-grid", a.gamma_grid, "lo:step:hi or comma list");
    c->add_option("--delta-grid", a.delta_grid, "lo:step:hi or comma list");
    c->add_option("--seed", a.seed, "master seed (default $EXOCI_SEED or 0)")
        ->each([&a](const std::string&) { a.seed_set = true; });
    c->add_option("--threads", a.threads, "worker threads (0 = all cores)");
    c->add_option("--out", a.out_path, "CSV output path (default stdout)");
  };
  CLI::App* sim_cp = sim->add_subcommand("cp", "coverage of the plug-in interval");
  add_common(sim_cp, sa_cp);
  sim_cp->add_option("--M", sa_cp.M, "replications per point (default 1e5)");
  CLI::App* sim_sel = sim->add_subcommand("sel", "scaled expected length");
  add_common(sim_sel, sa_sel);
  sim_sel->add_option("--M", sa_sel.M, "replications per point (default 1e5)");
  sim_sel->add_option("--cmin", sa_sel.cmin,
                      "confidence coefficient (default 1 - alpha)");
  CLI::App* sim_cc =
      sim->add_subcommand("confcoef", "three-stage minimum coverage search");
  add_common(sim_cc, sa_cc);
  sim_cc->add_option("--M1", sa_cc.M1, "stage 1 replications (default 1e5)");
  sim_cc->add_option("--M2", sa_cc.M2, "stage 2 replications (default 1e6)");
  sim_cc->add_option("--M3", sa_cc.M3, "stage 3 replications (default 4e6)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return run_fit(fit_panel);
    if (gbuild->parsed()) return run_grid_build(gb_panel, gb_out, gb_alpha, gb_threads);
    if (ci->parsed())
      return run_ci(ci_panel, ci_grid, ci_sigma, ci_delta,
                    ci_sigma_opt->count() > 0, ci_out);
    for (auto& [args, is_cp] :
         {std::pair<CurveArgs*, bool>{&cv_cp, true}, {&cv_sel, false}}) {
      CLI::App* c = curves->get_subcommand(is_cp ? "cp" : "sel");
      if (c->parsed()) return run_curves(is_cp, args->grid, args->delta,
                                         args->psi_range, args->out);
    }
    if (sim_cp->parsed()) return run_sim_cp_or_sel(true, sa_cp);
    if (sim_sel->parsed()) return run_sim_cp_or_sel(false, sa_sel);
    if (sim_cc->parsed()) return run_sim_confcoef(sa_cc);
  } catch (const exoci::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
