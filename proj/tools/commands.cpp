#include "commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>

#include <json.hpp>

#include "delayflow/svg.hpp"

#ifndef DELAYFLOW_VERSION
#define DELAYFLOW_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace delayflow::app {

std::string sha256_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Emitter {
 public:
  explicit Emitter(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
  }

  void emit(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = (fs::path(dir_) / name).string();
    {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw ConfigError("cannot write " + path);
      body(out);
      if (!out) throw ConfigError("write failed: " + path);
    }
    files_.push_back({name, fs::file_size(path), sha256_hex(path)});
  }

  void manifest(const std::string& config_echo, const std::string& started) {
    nlohmann::ordered_json j;
    j["config"] = config_echo;
    j["version"] = DELAYFLOW_VERSION;
    j["started"] = started;
    j["finished"] = utc_now();
    j["files"] = nlohmann::json::array();
    for (const auto& f : files_) j["files"].push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    std::ofstream out(fs::path(dir_) / "manifest.json");
    out << j.dump(2) << '\n';
  }

  const std::string& dir() const { return dir_; }
  const std::vector<EmittedFile>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<EmittedFile> files_;
};

void heatmap_svg(std::ostream& os, const DensityFieldRecord& rec, double rho_max, const std::string& title) {
  const std::size_t rows = rec.times.size(), cols = rec.cells();
  const std::size_t every = std::max<std::size_t>(1, (rows + 399) / 400);
  svg::Frame fr;
  fr.width = 400;
  fr.height = 400;
  fr.x0 = 0;
  fr.x1 = rec.dx * static_cast<double>(cols);
  fr.y0 = rows ? rec.times.front() : 0.0;
  fr.y1 = rows ? rec.times.back() : 1.0;
  if (fr.y1 <= fr.y0) fr.y1 = fr.y0 + 1.0;
  svg::Document doc(fr.left + fr.width + 20, fr.top + fr.height + 50);
  const double cw = fr.width / static_cast<double>(std::max<std::size_t>(cols, 1));
  const double rh = fr.height / static_cast<double>(std::max<std::size_t>((rows + every - 1) / every, 1));
  std::size_t band = 0;
  for (std::size_t k = 0; k < rows; k += every, ++band) {
    for (std::size_t i = 0; i < cols; ++i) {
      const double level = std::clamp(rec.fields[k][i] / rho_max, 0.0, 1.0);
      const int g = static_cast<int>(std::lround(255.0 * (1.0 - level)));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02x%02x", g, g, g);
      doc.rect(fr.left + static_cast<double>(i) * cw, fr.top + fr.height - static_cast<double>(band + 1) * rh, cw + 0.05,
               rh + 0.05, fill);
    }
  }
  fr.axes(doc, "x", "t");
  doc.text(fr.left + fr.width / 2, 14, title, 12, "middle");
  doc.write(os);
}

const char* verdict_color(Verdict v) {
  switch (v) {
    case Verdict::stable: return "#9fd89f";
    case Verdict::unstable: return "#e58f8f";
    case Verdict::marginal: return "#f2e28c";
    case Verdict::infeasible: return "#bdbdbd";
  }
  return "#ffffff";
}

}  // namespace

RunResult cmd_run(ScenarioConfig cfg, const OutputOptions& opt, std::ostream& log) {
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  if (opt.stride) {
    if (*opt.stride == 0) throw ConfigError("--stride must be >= 1");
    cfg.record_stride = *opt.stride;
  }
  const std::string started = utc_now();
  const RingConfig ring = cfg.ring();
  ring.validate();
  Emitter em(cfg.out_dir);
  RunResult result;
  result.out_dir = cfg.out_dir;

  const MicroState start = init_state(ring, cfg.init);
  std::optional<DensityFieldRecord> micro_cells, macro_field;

  if (cfg.has_micro()) {
    const auto rec = run_from(ring, start, cfg.t_end);
    em.emit("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, rec); });
    em.emit("fd_micro.csv", [&](std::ostream& os) {
      std::vector<FDSample> all;
      for (std::size_t i = 0; i < ring.n_agents; ++i) {
        const auto s = fd_series(rec, i);
        all.insert(all.end(), s.begin(), s.end());
      }
      write_fd_series_csv(os, all);
    });
    if (cfg.has_macro() || opt.svg) micro_cells = micro_to_cells(rec, cfg.dx, cfg.n_cells());
    double min_gap = kInf;
    for (const auto& s : rec.samples)
      for (double g : s.spacing) min_gap = std::min(min_gap, g);
    log << "micro: " << rec.samples.size() << " samples, min spacing " << csv::num(min_gap) << '\n';
  }

  if (cfg.has_macro()) {
    auto grid = make_grid(ring.ov, micro_to_cells(start, cfg.dx, cfg.n_cells()), cfg.dx, cfg.tau, cfg.dt, cfg.scheme, cfg.bounds);
    const double mass0 = grid.mass();
    macro_field = run_macro(std::move(grid), cfg.t_end, cfg.record_stride);
    em.emit("density.csv", [&](std::ostream& os) { write_density_csv(os, *macro_field, ring.ov, cfg.tau); });
    em.emit("heatmap.csv", [&](std::ostream& os) { write_heatmap_csv(os, *macro_field); });
    em.emit("fd_macro.csv", [&](std::ostream& os) {
      std::vector<FDSample> all;
      for (std::size_t i = 0; i < macro_field->cells(); ++i) {
        const auto s = fd_series(*macro_field, ring.ov, cfg.tau, i);
        all.insert(all.end(), s.begin(), s.end());
      }
      write_fd_series_csv(os, all);
    });
    double mass1 = 0.0;
    for (double r : macro_field->fields.back()) mass1 += r * cfg.dx;
    log << "macro (" << scheme_name(cfg.scheme) << "): " << macro_field->times.size() << " samples, mass drift "
        << csv::num(std::abs(mass1 - mass0) / mass0) << '\n';
  }

  if (cfg.model == ModelKind::both) {
    result.comparison = compare_fields(*micro_cells, *macro_field);
    em.emit("compare.csv", [&](std::ostream& os) { write_compare_csv(os, *result.comparison); });
    const auto& c = *result.comparison;
    log << "wave speed micro " << (c.wave_speed_a ? csv::num(*c.wave_speed_a) : "undefined") << ", macro "
        << (c.wave_speed_b ? csv::num(*c.wave_speed_b) : "undefined") << ", max L1 " << csv::num(c.max_l1()) << '\n';
  }

  if (opt.svg) {
    const double top = 1.0 / cfg.ell;
    if (micro_cells) em.emit("heatmap_micro.svg", [&](std::ostream& os) { heatmap_svg(os, *micro_cells, top, "micro density"); });
    if (macro_field) em.emit("heatmap_macro.svg", [&](std::ostream& os) { heatmap_svg(os, *macro_field, top, "macro density"); });
  }

  em.manifest(echo(cfg), started);
  result.files = em.files();
  return result;
}

StabilityResult cmd_stability(const MapSpec& spec, const OutputOptions& opt, std::ostream& log) {
  const std::string started = utc_now();
  Emitter em(opt.out_dir.value_or("out/stability"));
  StabilityResult result{em.dir(), {}, stability_map(spec), scan_stability(spec.base)};
  em.emit("stability_map.csv", [&](std::ostream& os) { write_map_csv(os, result.map); });

  std::size_t counts[4] = {0, 0, 0, 0}, disagree = 0;
  for (const auto& c : result.map.cells) {
    ++counts[static_cast<int>(c.eigen)];
    disagree += c.disagree ? 1 : 0;
  }

  if (opt.svg) {
    em.emit("stability_map.svg", [&](std::ostream& os) {
      svg::Frame fr;
      fr.x0 = spec.tau_min;
      fr.x1 = spec.tau_max > spec.tau_min ? spec.tau_max : spec.tau_min + 1.0;
      fr.y0 = spec.y_min;
      fr.y1 = spec.y_max > spec.y_min ? spec.y_max : spec.y_min + 1.0;
      svg::Document doc(fr.left + fr.width + 20, fr.top + fr.height + 50);
      const double cw = fr.width / static_cast<double>(spec.tau_n), ch = fr.height / static_cast<double>(spec.y_n);
      for (std::size_t iy = 0; iy < spec.y_n; ++iy)
        for (std::size_t it = 0; it < spec.tau_n; ++it)
          doc.rect(fr.left + static_cast<double>(it) * cw, fr.top + fr.height - static_cast<double>(iy + 1) * ch, cw + 0.05,
                   ch + 0.05, verdict_color(result.map.at(it, iy).eigen));
      const double y_op = spec.axis == MapAxis::dt ? spec.base.dt : spec.base.rho_e;
      if (spec.base.tau >= fr.x0 && spec.base.tau <= fr.x1 && y_op >= fr.y0 && y_op <= fr.y1) {
        doc.circle(fr.px(spec.base.tau), fr.py(y_op), 4, "black");
        doc.text(fr.px(spec.base.tau) + 6, fr.py(y_op) - 6, std::string("operating point: ") + verdict_name(result.operating_point.eigen_verdict), 11);
      }
      fr.axes(doc, "tau", spec.axis == MapAxis::dt ? "dt" : "rho_e");
      doc.write(os);
    });
  }

  std::ostringstream echo_spec;
  echo_spec << "scheme = " << enum_label(spec.base.scheme, stability_scheme_names()) << '\n'
            << "axis = " << (spec.axis == MapAxis::dt ? "dt" : "rho_e") << '\n'
            << "rho_e = " << detail::exact(spec.base.rho_e) << "\ntau = " << detail::exact(spec.base.tau) << '\n'
            << "t_gap = " << detail::exact(spec.base.t_gap) << "\nell = " << detail::exact(spec.base.ell) << '\n'
            << "dx = " << detail::exact(spec.base.dx) << "\ndt = " << detail::exact(spec.base.dt) << '\n'
            << "n_cells = " << spec.base.n_cells << "\nv0 = " << detail::exact(spec.base.v0) << '\n'
            << "tau_min = " << detail::exact(spec.tau_min) << "\ntau_max = " << detail::exact(spec.tau_max) << '\n'
            << "tau_n = " << spec.tau_n << "\ny_min = " << detail::exact(spec.y_min) << '\n'
            << "y_max = " << detail::exact(spec.y_max) << "\ny_n = " << spec.y_n << '\n';
  em.manifest(echo_spec.str(), started);
  result.files = em.files();

  log << "cells: " << result.map.cells.size() << " (stable " << counts[0] << ", marginal " << counts[1] << ", unstable "
      << counts[2] << ", infeasible " << counts[3] << "), closed-form disagreements " << disagree << '\n';
  log << "operating point tau=" << csv::num(spec.base.tau) << " dt=" << csv::num(spec.base.dt) << ": "
      << verdict_name(result.operating_point.eigen_verdict) << " (max |lambda|^2 = " << csv::num(result.operating_point.max_modulus_sq)
      << " at l = " << result.operating_point.argmax_mode << ", " << result.operating_point.branch << ")\n";
  return result;
}

FDResult cmd_fd(const FDParams& p, const std::optional<std::string>& data_path, const OutputOptions& opt, std::ostream& log) {
  const std::string started = utc_now();
  const TriangularOV ov(p.v0, p.ell, p.t_gap);
  const auto curves = bound_curves(ov, p.tau, p.n_points);
  Emitter em(opt.out_dir.value_or("out/fd"));
  FDResult result{em.dir(), {}, std::nullopt, {}};
  em.emit("fd_bounds.csv", [&](std::ostream& os) { write_bound_curves_csv(os, curves); });

  EmpiricalSet data;
  if (data_path) {
    std::ifstream in(*data_path);
    if (!in) throw ConfigError("cannot open data file '" + *data_path + "'");
    data = parse_empirical(in);
    result.data_errors = data.errors;
    result.overlay = envelope_overlay(data, ov, p.tau, p.eps >= 0.0 ? std::optional<double>(p.eps) : std::nullopt);
    em.emit("fd_overlay.csv", [&](std::ostream& os) {
      os << "density,speed,inside\n";
      csv::RowWriter w(os);
      for (std::size_t k = 0; k < data.points.size(); ++k)
        w.row(data.points[k].density, data.points[k].speed, result.overlay->inside[k] ? 1 : 0);
    });
  }

  if (opt.svg) {
    em.emit("fd_bounds.svg", [&](std::ostream& os) {
      svg::Document doc(1100, 440);
      svg::Frame sp;
      sp.x1 = 1.0 / p.ell;
      sp.y1 = p.v0 * 1.05;
      svg::Frame fl = sp;
      fl.left = 600;
      double qmax = 0.0;
      for (const auto& c : curves) qmax = std::max(qmax, c.density * c.v_upper);
      fl.y1 = qmax > 0.0 ? qmax * 1.1 : 1.0;
      auto line = [&](const svg::Frame& f, auto get, const char* color, const char* dash) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& c : curves) pts.emplace_back(f.px(c.density), f.py(get(c)));
        doc.polyline(pts, color, 1.5, dash);
      };
      line(sp, [](const BoundCurvePoint& c) { return c.v; }, "black", "");
      line(sp, [](const BoundCurvePoint& c) { return c.v_upper; }, "#c0392b", "6,3");
      line(sp, [](const BoundCurvePoint& c) { return c.v_lower; }, "#2471a3", "6,3");
      line(fl, [](const BoundCurvePoint& c) { return c.density * c.v; }, "black", "");
      line(fl, [](const BoundCurvePoint& c) { return c.density * c.v_upper; }, "#c0392b", "6,3");
      line(fl, [](const BoundCurvePoint& c) { return c.density * c.v_lower; }, "#2471a3", "6,3");
      for (const auto& pt : data.points) {
        doc.circle(sp.px(pt.density), sp.py(std::min(pt.speed, sp.y1)), 1.5, "#555555");
        doc.circle(fl.px(pt.density), fl.py(std::min(pt.density * pt.speed, fl.y1)), 1.5, "#555555");
      }
      sp.axes(doc, "density", "speed");
      fl.axes(doc, "density", "flow");
      doc.text(sp.left + 10, sp.top + 14, "V (solid), V+ (red), V- (blue)", 11);
      doc.write(os);
    });
  }

  std::ostringstream echo_params;
  echo_params << "v0 = " << detail::exact(p.v0) << "\nell = " << detail::exact(p.ell) << "\nt_gap = " << detail::exact(p.t_gap)
              << "\ntau = " << detail::exact(p.tau) << "\nn_points = " << p.n_points << "\neps = " << detail::exact(p.eps) << '\n';
  em.manifest(echo_params.str(), started);
  result.files = em.files();

  log << "curves: " << curves.size() << " densities in [0, " << csv::num(1.0 / p.ell) << "]\n";
  if (result.overlay) {
    log << "overlay: " << data.points.size() << " points, coverage "
        << (result.overlay->coverage ? csv::num(*result.overlay->coverage) : "undefined") << " (eps " << csv::num(result.overlay->eps)
        << ")\n";
  }
  return result;
}

}  // namespace delayflow::app
