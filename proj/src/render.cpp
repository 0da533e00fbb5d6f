#include "dmldeep/render.hpp"

#include "dmldeep/dataset_io.hpp"
#include "dmldeep/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dmldeep {

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.rfind("-0.", 0) == 0 && std::stod(s) == 0.0) s.erase(0, 1);
  return s;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string join_mods(const std::vector<std::string>& mods) {
  std::string s;
  for (std::size_t i = 0; i < mods.size(); ++i) s += (i ? "+" : "") + mods[i];
  return s;
}

std::string cell(const std::optional<MeanSd>& v, bool flagged) {
  if (!v) return "n/a";
  return fixed(v->mean) + " ± " + fixed(v->sd) + (flagged ? "*" : "");
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string report_csv(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "kind,name,learner,modalities,repeats,r2_y_rel_mean,r2_y_rel_sd,r2_d_rel_mean,r2_d_rel_sd,"
         "theta_mean,theta_sd,r2_y_rel_above_ceiling,r2_d_rel_above_ceiling\n";
  for (const auto& row : r.rows) {
    out << "model," << row.name << ',' << row.learner << ',' << join_mods(row.modalities) << ',' << row.repeats << ','
        << (row.r2_y_rel ? format_double(row.r2_y_rel->mean) : "") << ','
        << (row.r2_y_rel ? format_double(row.r2_y_rel->sd) : "") << ','
        << (row.r2_d_rel ? format_double(row.r2_d_rel->mean) : "") << ','
        << (row.r2_d_rel ? format_double(row.r2_d_rel->sd) : "") << ',' << format_double(row.theta.mean) << ','
        << format_double(row.theta.sd) << ',' << (row.y_above_ceiling ? 1 : 0) << ',' << (row.d_above_ceiling ? 1 : 0)
        << '\n';
  }
  auto bound = [&](const char* name, const std::optional<double>& theta) {
    if (theta) out << "bound," << name << ",,,,,,,," << format_double(*theta) << ",,,\n";
  };
  bound("theta0", r.bounds.theta0);
  bound("ols", r.bounds.ols_theta);
  bound("attenuated_plim", r.bounds.attenuated_plim);
  if (r.bounds.oracle_r2_y || r.bounds.oracle_r2_d)
    out << "bound,oracle_r2,,,,," << opt(r.bounds.oracle_r2_y) << ",," << opt(r.bounds.oracle_r2_d) << ",,,,\n";
  return out.str();
}

std::string report_markdown(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "| |";
  for (const auto& row : r.rows) out << ' ' << row.name << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < r.rows.size(); ++i) out << "---|";
  out << "\n| r²(Y, l̂) |";
  for (const auto& row : r.rows) out << ' ' << cell(row.r2_y_rel, row.y_above_ceiling) << " |";
  out << "\n| r²(D, m̂) |";
  for (const auto& row : r.rows) out << ' ' << cell(row.r2_d_rel, row.d_above_ceiling) << " |";
  out << "\n| θ̂ |";
  for (const auto& row : r.rows) out << ' ' << cell(row.theta, false) << " |";
  out << "\n\n";
  out << "Bounds: θ₀ = " << fixed(r.bounds.theta0) << ", OLS = " << fixed(r.bounds.ols_theta);
  if (r.bounds.attenuated_plim) out << ", attenuated plim = " << fixed(*r.bounds.attenuated_plim);
  if (r.bounds.oracle_r2_y) out << "; oracle R²(Y) = " << fixed(*r.bounds.oracle_r2_y, 4);
  if (r.bounds.oracle_r2_d) out << ", oracle R²(D) = " << fixed(*r.bounds.oracle_r2_d, 4);
  out << ".\n\n";
  std::size_t repeats = r.rows.empty() ? 0 : r.rows.front().repeats;
  out << "Mean ± sd over " << repeats << " repeats, split " << r.scheme << ".";
  bool flagged = false;
  for (const auto& row : r.rows) flagged = flagged || row.y_above_ceiling || row.d_above_ceiling;
  if (flagged) out << " * some repeat exceeded the oracle ceiling.";
  if (!r.config_digest.empty()) out << " Config digest " << r.config_digest << ".";
  out << '\n';
  return out.str();
}

std::string trace_csv(const EpochTrace& t) {
  if (t.points.empty()) throw ValidationError("trace is empty");
  std::ostringstream out;
  out << "epoch,theta_hat,ci_low,ci_high,r2_y_rel,r2_d_rel\n";
  for (const auto& p : t.points)
    out << p.epoch << ',' << format_double(p.theta_hat) << ',' << format_double(p.ci_low) << ','
        << format_double(p.ci_high) << ',' << opt(p.r2_y_rel) << ',' << opt(p.r2_d_rel) << '\n';
  return out.str();
}

std::string trace_svg(const EpochTrace& t, std::optional<double> reference) {
  if (t.points.empty()) throw ValidationError("trace is empty");
  constexpr double W = 640, H = 360, left = 60, right = 20, top = 20, bottom = 40;
  double lo = t.points.front().ci_low, hi = t.points.front().ci_high;
  for (const auto& p : t.points) {
    lo = std::min({lo, p.ci_low, p.theta_hat});
    hi = std::max({hi, p.ci_high, p.theta_hat});
  }
  if (reference) {
    lo = std::min(lo, *reference);
    hi = std::max(hi, *reference);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double e0 = static_cast<double>(t.points.front().epoch);
  const double e1 = static_cast<double>(t.points.back().epoch);
  auto px = [&](double epoch) {
    return e1 > e0 ? left + (epoch - e0) / (e1 - e0) * (W - left - right) : left + (W - left - right) / 2;
  };
  auto py = [&](double v) { return top + (hi - v) / (hi - lo) * (H - top - bottom); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";

  out << "<polygon class=\"ci-band\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
  for (const auto& p : t.points) out << fixed(px(static_cast<double>(p.epoch))) << ',' << fixed(py(p.ci_high)) << ' ';
  for (auto it = t.points.rbegin(); it != t.points.rend(); ++it)
    out << fixed(px(static_cast<double>(it->epoch))) << ',' << fixed(py(it->ci_low)) << ' ';
  out << "\"/>\n";

  if (reference)
    out << "<line class=\"reference\" x1=\"" << left << "\" y1=\"" << fixed(py(*reference)) << "\" x2=\""
        << W - right << "\" y2=\"" << fixed(py(*reference)) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";

  out << "<polyline class=\"theta\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
  for (const auto& p : t.points) out << fixed(px(static_cast<double>(p.epoch))) << ',' << fixed(py(p.theta_hat)) << ' ';
  out << "\"/>\n";

  // Axis labels: first/last epoch and the value range.
  out << "<text x=\"" << left << "\" y=\"" << H - bottom + 18 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << t.points.front().epoch << "</text>\n";
  out << "<text x=\"" << W - right << "\" y=\"" << H - bottom + 18 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << t.points.back().epoch << "</text>\n";
  out << "<text x=\"" << (W + left - right) / 2 << "\" y=\"" << H - 6
      << "\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << fixed(py(hi)) << "\" font-size=\"12\" text-anchor=\"end\">"
      << fixed(hi) << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << fixed(py(lo)) << "\" font-size=\"12\" text-anchor=\"end\">"
      << fixed(lo) << "</text>\n";
  out << "<text x=\"14\" y=\"" << (top + H - bottom) / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 14 " << (top + H - bottom) / 2 << ")\">theta_hat</text>\n";
  out << "</svg>\n";
  return out.str();
}

void render_report(const BenchmarkReport& r, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "report.csv", report_csv(r));
  write_text_file(dir / "report.md", report_markdown(r));
}

void render_trace(const EpochTrace& t, const std::filesystem::path& dir, std::optional<double> reference) {
  const auto csv = trace_csv(t);
  const auto svg = trace_svg(t, reference);
  ensure_dir(dir);
  write_text_file(dir / "trace.csv", csv);
  write_text_file(dir / "trace.svg", svg);
}

}  // namespace dmldeep
