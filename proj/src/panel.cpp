#include "exoci/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <utility>

#include "exoci/math.hpp"

namespace exoci {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_real(const std::string& cell, std::size_t line_no) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    fail(ErrorKind::parse_error,
         "non-numeric cell '" + cell + "' at line " + std::to_string(line_no));
  return v;
}

// Sort labels numerically when every label parses as a number, otherwise
// lexicographically; either way the order is deterministic.
std::vector<std::string> sorted_labels(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  bool numeric = true;
  std::vector<std::pair<double, std::string>> keyed;
  keyed.reserve(labels.size());
  for (const auto& s : labels) {
    const char* b = s.c_str();
    char* e = nullptr;
    double v = std::strtod(b, &e);
    if (e == b || *e != '\0' || !std::isfinite(v)) {
      numeric = false;
      break;
    }
    keyed.emplace_back(v, s);
  }
  if (numeric) {
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t i = 0; i < keyed.size(); ++i) labels[i] = keyed[i].second;
  }
  return labels;
}

}  // namespace

void PanelData::validate() const {
  const std::size_t N = n_units(), T = n_times();
  require(N >= 2 && T >= 2, ErrorKind::unbalanced_panel,
          "panel needs N >= 2 units and T >= 2 time points");
  require(x.size() == N * T, ErrorKind::unbalanced_panel, "x is not N*T");
  require(y.empty() || y.size() == N * T, ErrorKind::unbalanced_panel, "y is not N*T");
  for (double v : x)
    require(std::isfinite(v), ErrorKind::parse_error, "non-finite x value");
  for (double v : y)
    require(std::isfinite(v), ErrorKind::parse_error, "non-finite y value");
}

PanelData load_panel(std::istream& in, const ColumnNames& cols) {
  std::string line;
  std::size_t line_no = 0;

  // header
  if (!std::getline(in, line)) fail(ErrorKind::parse_error, "empty input");
  ++line_no;
  const auto header = split_csv(line);
  auto find_col = [&](const std::string& name) -> long {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<long>(i);
    return -1;
  };
  const long ci = find_col(cols.unit);
  const long ct = find_col(cols.time);
  const long cx = find_col(cols.x);
  const long cy = find_col(cols.y);
  if (ci < 0 || ct < 0 || cx < 0)
    fail(ErrorKind::parse_error, "header must contain columns '" + cols.unit + "','" +
                                     cols.time + "','" + cols.x + "'");
  const bool with_y = cy >= 0;

  struct Row {
    std::string unit, time;
    double x, y;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size())
      fail(ErrorKind::parse_error,
           "wrong field count at line " + std::to_string(line_no));
    Row r;
    r.unit = fields[static_cast<std::size_t>(ci)];
    r.time = fields[static_cast<std::size_t>(ct)];
    r.x = parse_real(fields[static_cast<std::size_t>(cx)], line_no);
    r.y = with_y ? parse_real(fields[static_cast<std::size_t>(cy)], line_no) : 0.0;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorKind::parse_error, "no data rows");

  std::vector<std::string> units, times;
  units.reserve(rows.size());
  times.reserve(rows.size());
  for (const auto& r : rows) {
    units.push_back(r.unit);
    times.push_back(r.time);
  }
  units = sorted_labels(std::move(units));
  times = sorted_labels(std::move(times));

  std::map<std::string, std::size_t> uidx, tidx;
  for (std::size_t i = 0; i < units.size(); ++i) uidx[units[i]] = i;
  for (std::size_t t = 0; t < times.size(); ++t) tidx[times[t]] = t;

  const std::size_t N = units.size(), T = times.size();
  PanelData p;
  p.unit_ids = units;
  p.times = times;
  p.x.assign(N * T, 0.0);
  if (with_y) p.y.assign(N * T, 0.0);
  std::vector<char> seen(N * T, 0);
  for (const auto& r : rows) {
    const std::size_t k = uidx[r.unit] * T + tidx[r.time];
    if (seen[k])
      fail(ErrorKind::duplicate_cell,
           "duplicate cell (" + r.unit + "," + r.time + ")");
    seen[k] = 1;
    p.x[k] = r.x;
    if (with_y) p.y[k] = r.y;
  }
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t t = 0; t < T; ++t)
      if (!seen[i * T + t])
        fail(ErrorKind::unbalanced_panel,
             "unit " + units[i] + " lacks time " + times[t]);
  p.validate();
  return p;
}

PanelData load_panel_file(const std::string& path, const ColumnNames& cols) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io_error, "cannot open '" + path + "'");
  return load_panel(in, cols);
}

DesignSummary design_summary(const PanelData& p) {
  p.validate();
  const std::size_t N = p.n_units(), T = p.n_times();
  DesignSummary ds;
  ds.N = N;
  ds.T = T;
  ds.xbar_i.resize(N);
  CompensatedSum grand;
  for (std::size_t i = 0; i < N; ++i) {
    CompensatedSum s;
    for (std::size_t t = 0; t < T; ++t) s.add(p.xat(i, t));
    ds.xbar_i[i] = s.value() / static_cast<double>(T);
    grand.add(s.value());
  }
  ds.xbar = grand.value() / static_cast<double>(N * T);
  CompensatedSum ssw, ssb;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const double d = p.xat(i, t) - ds.xbar_i[i];
      ssw.add(d * d);
    }
    const double d = ds.xbar_i[i] - ds.xbar;
    ssb.add(d * d);
  }
  ds.ssw = ssw.value();
  ds.ssb = ssb.value();
  require(ds.ssw > 0.0, ErrorKind::degenerate_design, "SSW = 0: no within variation");
  require(ds.ssb > 0.0, ErrorKind::degenerate_design, "SSB = 0: no between variation");
  ds.r = ds.ssb / ds.ssw;
  return ds;
}

GlsFit fit_gls(const PanelData& p, const DesignSummary& ds) {
  require(p.has_y(), ErrorKind::invalid_argument, "panel has no response column");
  const std::size_t N = p.n_units(), T = p.n_times();
  std::vector<double> ybar_i(N);
  CompensatedSum grand;
  for (std::size_t i = 0; i < N; ++i) {
    CompensatedSum s;
    for (std::size_t t = 0; t < T; ++t) s.add(p.yat(i, t));
    ybar_i[i] = s.value() / static_cast<double>(T);
    grand.add(s.value());
  }
  const double ybar = grand.value() / static_cast<double>(N * T);
  CompensatedSum sw, sb;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t)
      sw.add((p.xat(i, t) - ds.xbar_i[i]) * (p.yat(i, t) - ybar_i[i]));
    sb.add((ds.xbar_i[i] - ds.xbar) * (ybar_i[i] - ybar));
  }
  GlsFit fit;
  fit.bw_hat = sw.value() / ds.ssw;
  fit.bb_hat = sb.value() / ds.ssb;
  fit.a_hat = ybar - fit.bb_hat * ds.xbar;
  return fit;
}

GlsFit fit_gls(const PanelData& p) { return fit_gls(p, design_summary(p)); }

FitResult estimate_variance_components(const PanelData& p, const DesignSummary& ds) {
  const GlsFit fit = fit_gls(p, ds);
  const std::size_t N = p.n_units(), T = p.n_times();
  require(N * (T - 1) > 0, ErrorKind::degenerate_design, "N(T-1) = 0");

  std::vector<double> ybar_i(N);
  for (std::size_t i = 0; i < N; ++i) {
    CompensatedSum s;
    for (std::size_t t = 0; t < T; ++t) s.add(p.yat(i, t));
    ybar_i[i] = s.value() / static_cast<double>(T);
  }

  CompensatedSum ss_within, ss_between, msq_y;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const double r_it =
          (p.yat(i, t) - ybar_i[i]) - fit.bw_hat * (p.xat(i, t) - ds.xbar_i[i]);
      ss_within.add(r_it * r_it);
      msq_y.add(p.yat(i, t) * p.yat(i, t));
    }
    const double r_i = ybar_i[i] - (fit.a_hat + fit.bb_hat * ds.xbar_i[i]);
    ss_between.add(r_i * r_i);
  }

  FitResult out;
  out.a_hat = fit.a_hat;
  out.bw_hat = fit.bw_hat;
  out.bb_hat = fit.bb_hat;
  out.sigma_eps2_hat = ss_within.value() / static_cast<double>(N * (T - 1));
  // Below the roundoff floor of the residual computation the fit is exact.
  const double floor = 1e-24 * (msq_y.value() / static_cast<double>(N * T));
  require(out.sigma_eps2_hat > 0.0 && out.sigma_eps2_hat > floor,
          ErrorKind::zero_residual_variance, "residual variance is zero");
  out.sigma_eta2_hat = ss_between.value() / static_cast<double>(N) -
                       out.sigma_eps2_hat / static_cast<double>(T);
  out.delta_hat = std::max(0.0, out.sigma_eta2_hat / out.sigma_eps2_hat);
  out.h_hat = hausman_stat(fit, ds, std::sqrt(out.sigma_eps2_hat), out.delta_hat);
  return out;
}

FitResult estimate_variance_components(const PanelData& p) {
  return estimate_variance_components(p, design_summary(p));
}

double hausman_stat(const GlsFit& fit, const DesignSummary& ds, double sigma_eps,
                    double delta) {
  require(sigma_eps > 0.0, ErrorKind::invalid_argument, "sigma_eps must be > 0");
  require(delta >= 0.0, ErrorKind::invalid_argument, "delta must be >= 0");
  const double var_w = sigma_eps * sigma_eps / ds.ssw;
  const double var_b =
      sigma_eps * sigma_eps * (delta + 1.0 / static_cast<double>(ds.T)) / ds.ssb;
  return (fit.bw_hat - fit.bb_hat) / std::sqrt(var_w + var_b);
}

double hausman_stat(const PanelData& p, double sigma_eps, double delta) {
  const DesignSummary ds = design_summary(p);
  return hausman_stat(fit_gls(p, ds), ds, sigma_eps, delta);
}

double rho_of_delta(double r, double delta, std::size_t T) {
  require(r > 0.0, ErrorKind::invalid_argument, "r must be > 0");
  require(delta >= 0.0, ErrorKind::invalid_argument, "delta must be >= 0");
  require(T >= 2, ErrorKind::invalid_argument, "T must be >= 2");
  return -std::sqrt(r / (r + delta + 1.0 / static_cast<double>(T)));
}

double delta_of_rho(double r, double rho, std::size_t T) {
  require(r > 0.0, ErrorKind::invalid_argument, "r must be > 0");
  require(T >= 2, ErrorKind::invalid_argument, "T must be >= 2");
  if (rho == 0.0)
    fail(ErrorKind::no_finite_solution, "rho = 0 corresponds to delta = infinity");
  require(rho > -1.0 && rho < 0.0, ErrorKind::invalid_argument,
          "rho must lie in (-1, 0)");
  const double delta = r * (1.0 / (rho * rho) - 1.0) - 1.0 / static_cast<double>(T);
  return std::max(0.0, delta);
}

Interval fixed_effects_interval(const GlsFit& fit, const DesignSummary& ds,
                                double sigma_eps, double c) {
  require(sigma_eps > 0.0, ErrorKind::invalid_argument, "sigma_eps must be > 0");
  require(c >= 0.0 && c < 1.0, ErrorKind::invalid_argument, "c must lie in [0, 1)");
  const double half = two_sided_z(c) * sigma_eps / std::sqrt(ds.ssw);
  return {fit.bw_hat - half, fit.bw_hat + half};
}

Interval fixed_effects_interval(const PanelData& p, double sigma_eps, double c) {
  const DesignSummary ds = design_summary(p);
  return fixed_effects_interval(fit_gls(p, ds), ds, sigma_eps, c);
}

ModelParams ModelParams::make(double a, double b, double xi, double sigma_eps,
                              double delta, std::size_t N) {
  require(sigma_eps > 0.0, ErrorKind::invalid_argument, "sigma_eps must be > 0");
  require(delta >= 0.0, ErrorKind::invalid_argument, "delta must be >= 0");
  ModelParams mp;
  mp.a = a;
  mp.b = b;
  mp.xi = xi;
  mp.sigma_eps = sigma_eps;
  mp.delta = delta;
  mp.gamma = xi * std::sqrt(static_cast<double>(N)) / sigma_eps;
  return mp;
}

ModelParams ModelParams::canonical(double gamma, double delta, std::size_t N) {
  ModelParams mp;
  mp.a = 0.0;
  mp.b = 0.0;
  mp.sigma_eps = 1.0;
  mp.delta = delta;
  mp.gamma = gamma;
  mp.xi = gamma / std::sqrt(static_cast<double>(N));
  return mp;
}

}  // namespace exoci
