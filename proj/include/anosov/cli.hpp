#pragma once

// Batch experiments behind the command-line front end. Each run_* reads its
// block from the configuration, validates it, computes, and writes files into
// the output directory. All randomness comes from the configured seed.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anosov/dirichlet.hpp"
#include "anosov/distance.hpp"
#include "anosov/extension.hpp"
#include "anosov/geodesic.hpp"
#include "anosov/io.hpp"
#include "anosov/norms.hpp"
#include "anosov/random.hpp"

namespace anosov::cli {

namespace fs = std::filesystem;
using io::ConfigError;
using io::CsvWriter;
using io::Section;

struct Options {
  std::string command;
  fs::path config;
  fs::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kConfigInvalid = 2;
inline constexpr int kRefused = 3;

/// Parsed top level shared by every subcommand.
struct Run {
  io::ConfigFile file;
  io::RunInfo info;
  int threads = 1;
  fs::path out;

  Section block(const std::string& name) const { return file.root.child(name); }
  fs::path path(const std::string& name) const { return out / name; }

  void write_text(const std::string& name, const std::string& body, const std::string& comment = "# ") const {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path(name).string() + "'");
    f << info.header(comment) << body;
  }

  void write_json(const std::string& name, nlohmann::json j) const {
    j["_run"] = {{"version", io::kVersion},
                 {"command", info.command},
                 {"seed", info.seed},
                 {"config_hash", info.hash_hex()}};
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path(name).string() + "'");
    f << j.dump(2) << "\n";
  }
};

inline Run open_run(const Options& opt) {
  Run r;
  r.file = io::load_config(opt.config);
  const Section& root = r.file.root;
  root.only({"seed", "threads", "metric", "metric2", "lens", "distance", "prescribe", "extend", "diagnose"});
  if (opt.seed) {
    r.info.seed = *opt.seed;
  } else {
    if (!root.has("seed")) throw ConfigError("seed", 0, "seed must be given in the config or with --seed");
    r.info.seed = root.get<std::uint64_t>("seed");
  }
  r.threads = opt.threads ? *opt.threads : static_cast<int>(root.count("threads", 1));
  if (r.threads < 1) throw ConfigError("threads", 0, "must be at least 1");
  r.info.command = opt.command;
  r.info.config_hash = r.file.hash;
  r.out = opt.out;
  fs::create_directories(r.out);
  return r;
}

namespace detail {

/// Boundary entry number `index` drawn like a Liouville sample.
inline BoundaryEntry entry_sample(const BoundaryFrame& frame, std::uint64_t seed, std::uint64_t index) {
  SplitMix64 rng = SplitMix64::stream(seed, index);
  const double g = rng.uniform() * frame.total_length();
  int comp = 0;
  while (comp + 1 < static_cast<int>(frame.curves().size()) && g >= frame.offset(comp + 1)) ++comp;
  return {comp, g - frame.offset(comp), std::asin(2.0 * rng.uniform() - 1.0)};
}

inline BoundaryPoint point_sample(const BoundaryFrame& frame, SplitMix64& rng) {
  const double g = rng.uniform() * frame.total_length();
  int comp = 0;
  while (comp + 1 < static_cast<int>(frame.curves().size()) && g >= frame.offset(comp + 1)) ++comp;
  return {comp, g - frame.offset(comp)};
}

inline std::vector<double> numbers(const Section& s, const std::string& key, std::vector<double> fallback) {
  auto v = s.get<std::vector<double>>(key, std::move(fallback));
  if (v.empty()) throw ConfigError(s.field(key), s.line_at(key), "must not be empty");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------- lens

inline int run_lens(const Options& opt) {
  const Run run = open_run(opt);
  const Metric m = io::parse_metric(run.file.root.child("metric"));
  const Section s = run.block("lens");
  s.only({"samples", "t_max", "tol"});
  const long n = s.count("samples", 100);
  const double t_max = s.positive("t_max", 100.0);
  const double tol = s.positive("tol", 1e-10);

  const BoundaryFrame frame(m);
  std::vector<BoundaryEntry> entries;
  std::vector<UnitTangent> starts;
  for (long i = 0; i < n; ++i) {
    entries.push_back(detail::entry_sample(frame, run.info.seed, static_cast<std::uint64_t>(i)));
    starts.push_back(frame.inward_state(entries.back().component, entries.back().s, entries.back().alpha));
  }
  const auto records = lens_data(m, starts, t_max, tol, run.threads);

  CsvWriter csv(run.path("lens.csv"), run.info,
                {"index", "entry_component", "entry_s", "entry_alpha", "trapped", "exit_component", "exit_s",
                 "exit_alpha", "travel_time", "winding", "status"},
                {"metric: " + m.name(), "t_max: " + io::fmt(t_max), "tol: " + io::fmt(tol)});
  long trapped = 0, failed = 0;
  for (long i = 0; i < n; ++i) {
    const LensRecord& r = records[static_cast<std::size_t>(i)];
    const BoundaryEntry& e = entries[static_cast<std::size_t>(i)];
    const bool out = r.ok() && !r.trapped;
    trapped += r.ok() && r.trapped;
    failed += !r.ok();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    csv.row() << i << e.component << e.s << e.alpha << r.trapped << (out ? r.exit_component : -1)
              << (out ? frame.arc_length(r.exit.base) : nan) << (out ? frame.angle(r.exit, false) : nan)
              << r.travel_time << r.winding << (r.ok() ? std::string("ok") : "error: " + r.error);
  }
  std::cout << "lens: " << n << " samples, " << trapped << " trapped, " << failed << " failed -> "
            << run.path("lens.csv").string() << "\n";
  return failed ? kFailure : kOk;
}

// ---------------------------------------------------------------- distance

namespace detail {

inline int distance_pairs(const Run& run, const Metric& m, const Section& s) {
  DistanceOptions dopt;
  dopt.tol = s.positive("tol", dopt.tol);
  dopt.scan = static_cast<int>(s.count("scan", dopt.scan, 16));
  dopt.t_max = s.positive("t_max", dopt.t_max);
  const BoundaryFrame frame(m);
  std::vector<DistanceQuery> queries;
  if (s.has("queries")) {
    const auto q = s.get<std::vector<std::vector<double>>>("queries");
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (q[i].size() != 5)
        throw ConfigError(s.field("queries") + "[" + std::to_string(i) + "]", s.line_at("queries"),
                          "expected [x_component, x_s, y_component, y_s, winding]");
      const int cx = static_cast<int>(q[i][0]), cy = static_cast<int>(q[i][2]);
      if (cx < 0 || cy < 0 || cx >= static_cast<int>(frame.curves().size()) ||
          cy >= static_cast<int>(frame.curves().size()))
        throw ConfigError(s.field("queries") + "[" + std::to_string(i) + "]", s.line_at("queries"),
                          "boundary component out of range");
      const int n = static_cast<int>(q[i][4]);
      queries.emplace_back(BoundaryPoint{cx, q[i][1]}, BoundaryPoint{cy, q[i][3]},
                           m.chart().kind == ChartKind::Collar ? MarkedClass::winding(n) : MarkedClass::trivial());
    }
  } else {
    const long n = s.count("pairs", 100);
    const int w = s.get<int>("winding", 0);
    for (long i = 0; i < n; ++i) {
      SplitMix64 rng = SplitMix64::stream(run.info.seed, static_cast<std::uint64_t>(i));
      const BoundaryPoint x = point_sample(frame, rng), y = point_sample(frame, rng);
      queries.emplace_back(x, y,
                           m.chart().kind == ChartKind::Collar ? MarkedClass::winding(w) : MarkedClass::trivial());
    }
  }
  const auto table = distance_table(m, queries, dopt, run.threads);
  const bool chord = m.is_euclidean();
  std::vector<std::string> cols{"index", "x_component", "x_s", "y_component", "y_s", "class", "length",
                                "method", "residual", "shooting_angle"};
  if (chord) cols.push_back("chord");
  cols.push_back("status");
  CsvWriter csv(run.path("distance.csv"), run.info, cols, {"mode: pairs", "metric: " + m.name()});
  long failed = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const DistanceSample& d = table[i];
    failed += !d.ok();
    auto row = csv.row();
    row << i << d.x.component << d.x.s << d.y.component << d.y.s << d.cls.label() << d.length << d.method
        << d.residual << d.shooting_angle;
    if (chord) {
      const double R = m.chart().radius;
      row << 2.0 * R * std::abs(std::sin(0.5 * (d.y.s - d.x.s) / R));
    }
    row << (d.ok() ? std::string("ok") : "error: " + d.error);
  }
  std::cout << "distance: " << table.size() << " pairs, " << failed << " failed -> "
            << run.path("distance.csv").string() << "\n";
  return failed ? kFailure : kOk;
}

inline int distance_winding(const Run& run, const Metric& m, const Section& s) {
  if (!m.warped() || m.chart().kind != ChartKind::Collar)
    throw ConfigError("metric.kind", 0, "winding mode needs a warped metric");
  const ClairautSolver cs(*m.warped());
  if (!cs.applicable())
    throw ConfigError("metric", 0, "winding mode needs a profile with a single nondegenerate core minimum");
  const int comp = static_cast<int>(s.count("component", 0, 0));
  if (comp > 1) throw ConfigError(s.field("component"), s.line_at("component"), "must be 0 or 1");
  const double x_s = s.get<double>("s", 0.0);
  const int n_max = static_cast<int>(s.count("n_max", 20));
  const double tol = s.positive("tol", 1e-10);
  const WarpedMetric& w = *m.warped();
  const double L = cs.core_length();
  const double dist_core = std::abs((comp == 0 ? w.t_min : w.t_max) - cs.core());
  CsvWriter csv(run.path("distance.csv"), run.info,
                {"n", "d", "d_over_n", "gap", "lower", "upper", "lower_ok", "upper_ok", "status"},
                {"mode: winding", "core_length: " + io::fmt(L), "dist_to_core: " + io::fmt(dist_core)});
  long failed = 0;
  double prev_gap = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  for (int n = 1; n <= n_max; ++n) {
    DistanceSample d;
    try {
      d = cs.solve({comp, x_s}, {comp, x_s}, MarkedClass::winding(n), tol);
    } catch (const std::exception& e) {
      d.error = e.what();
    }
    failed += !d.ok();
    const double gap = std::abs(d.length / n - L);
    decreasing = decreasing && gap < prev_gap;
    prev_gap = gap;
    const double lo = n * L, hi = n * L + 2.0 * dist_core;
    csv.row() << n << d.length << d.length / n << gap << lo << hi << (d.length >= lo) << (d.length <= hi)
              << (d.ok() ? std::string("ok") : "error: " + d.error);
  }
  std::cout << "distance: winding sweep n = 1.." << n_max << ", |d/n - L_core| "
            << (decreasing ? "decreasing" : "NOT decreasing") << " -> " << run.path("distance.csv").string() << "\n";
  return failed ? kFailure : kOk;
}

inline int distance_compare(const Run& run, const Metric& m, const Section& s) {
  if (!run.file.root.has("metric2")) throw ConfigError("metric2", 0, "compare mode needs a second metric");
  const Metric m2 = io::parse_metric(run.file.root.child("metric2"));
  const long n = s.count("samples", 200);
  const double t_max = s.positive("t_max", 100.0);
  const double tol = s.positive("tol", 1e-11);
  const auto classes = s.get<std::vector<int>>("classes", {});
  const BoundaryFrame frame(m);
  std::vector<BoundaryEntry> entries;
  for (long i = 0; i < n; ++i) entries.push_back(entry_sample(frame, run.info.seed, static_cast<std::uint64_t>(i)));
  LensComparison cmp;
  try {
    cmp = lens_compare(m, m2, entries, classes, t_max, tol, run.threads);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("metric2", 0, e.what());
  }
  CsvWriter csv(run.path("distance.csv"), run.info,
                {"class", "samples", "sup_exit_position", "sup_exit_angle", "sup_travel_time"},
                {"mode: compare", "trapped_mismatch: " + std::to_string(cmp.trapped_mismatch),
                 "class_mismatch: " + std::to_string(cmp.class_mismatch),
                 "failures: " + std::to_string(cmp.failures)});
  for (const auto& c : cmp.per_class)
    csv.row() << ("w" + std::to_string(c.winding)) << c.samples << c.exit_position << c.exit_angle << c.travel_time;
  csv.row() << "all" << cmp.samples << cmp.exit_position << cmp.exit_angle << cmp.travel_time;
  run.write_json("distance_report.json", cmp.to_json());
  std::cout << "distance: compared " << cmp.samples << " samples, sup discrepancy " << io::fmt(cmp.sup()) << " -> "
            << run.path("distance.csv").string() << "\n";
  return cmp.failures ? kFailure : kOk;
}

}  // namespace detail

inline int run_distance(const Options& opt) {
  const Run run = open_run(opt);
  const Metric m = io::parse_metric(run.file.root.child("metric"));
  const Section s = run.block("distance");
  const std::string mode = s.get<std::string>("mode", "pairs");
  if (mode == "pairs") {
    s.only({"mode", "pairs", "queries", "winding", "tol", "scan", "t_max"});
    return detail::distance_pairs(run, m, s);
  }
  if (mode == "winding") {
    s.only({"mode", "component", "s", "n_max", "tol"});
    return detail::distance_winding(run, m, s);
  }
  if (mode == "compare") {
    s.only({"mode", "samples", "t_max", "tol", "classes"});
    return detail::distance_compare(run, m, s);
  }
  throw ConfigError(s.field("mode"), s.line_at("mode"), "unknown mode '" + mode + "' (pairs, winding, compare)");
}

// ---------------------------------------------------------------- prescribe

inline int run_prescribe(const Options& opt) {
  const Run run = open_run(opt);
  const Metric m = io::parse_metric(run.file.root.child("metric"));
  const Section s = run.block("prescribe");
  s.only({"grid", "h", "h_sup", "tol", "max_iter", "dimension", "sweep", "gap_tol"});
  const Section gs = s.child("grid");
  gs.only({"nu", "nphi"});
  const int nu = static_cast<int>(gs.count("nu", 65, 9));
  const int nphi = static_cast<int>(gs.count("nphi", nu - 1, 8));
  const Expression hx = io::detail::expression(s, "h", {"x", "y"});
  const double tol = s.positive("tol", 1e-8);
  const int max_iter = static_cast<int>(s.count("max_iter", 30));
  const int dim = static_cast<int>(s.count("dimension", 2, 2));
  const int sweep = static_cast<int>(s.count("sweep", 0, 0));
  const double gap_tol = s.positive("gap_tol", 1e-8);

  const GridMetric g = GridMetric::sample(m, nu, nphi);
  const DirichletOperator op = assemble(g, dim);
  GridField h = g.sample_field([&](double x, double y) { return hx(x, y); });
  if (s.has("h_sup")) {
    const double sup = GridMetric::sup(h);
    if (sup > 0.0) h *= s.positive("h_sup", 1.0) / sup;
  }

  const LpscVerdict verdict = lpsc_test(op, gap_tol);
  if (!verdict.lpsc) {
    const SpectralWindow w = kernel_window(op, std::max(gap_tol, 2.0 * std::abs(verdict.lambda)));
    std::ostringstream os;
    os << "refused: " << verdict.label() << "\nlambda: " << io::fmt(verdict.lambda)
       << "\ngap_tol: " << io::fmt(verdict.gap_tol) << "\nresidual: " << io::fmt(verdict.residual) << "\nwindow:\n";
    for (std::size_t k = 0; k < w.eigenvalues.size(); ++k)
      os << "  " << io::fmt(w.eigenvalues[k]) << " residual " << io::fmt(w.residuals[k]) << "\n";
    run.write_text("prescribe_refusal.txt", os.str());
    std::cerr << "prescribe: refused, eigenvalue " << io::fmt(verdict.lambda) << " within " << io::fmt(gap_tol)
              << "; spectral report in " << run.path("prescribe_refusal.txt").string() << "\n";
    return kRefused;
  }
  const Prescription p = prescribe(op, h, tol, max_iter, false);

  {
    CsvWriter csv(run.path("prescribe_field.csv"), run.info, {"i", "j", "x", "y", "f"},
                  {"grid: " + std::to_string(nu) + "x" + std::to_string(nphi),
                   "boundary_vanishing_order: " +
                       (p.f.infinite_order ? std::string("infinite") : std::to_string(p.f.boundary_vanishing_order))});
    for (int i = 0; i < g.nu(); ++i)
      for (int j = 0; j < g.nphi(); ++j) {
        const ChartPoint c = g.chart_point(i, j);
        csv.row() << i << j << c.x << c.y << p.f.field(i, j);
      }
  }
  {
    CsvWriter csv(run.path("prescribe_trace.csv"), run.info, {"iteration", "residual", "step", "damping"});
    for (const auto& r : p.trace) csv.row() << r.iteration << r.residual << r.step << r.damping;
  }
  nlohmann::json summary{{"residual", p.residual},
                         {"iterations", p.iterations},
                         {"h_C0", GridMetric::sup(h)},
                         {"f_C0", GridMetric::sup(p.f.field)},
                         {"f_C2", cm_norm(g, p.f.field, 2)}};
  if (sweep > 0) {
    CsvWriter csv(run.path("prescribe_sweep.csv"), run.info, {"k", "h_C0", "f_C2", "ratio", "iterations", "residual"});
    std::vector<double> hs, fs_;
    double num = 0.0, den = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int k = 0; k <= sweep; ++k) {
      const GridField hk = h * std::ldexp(1.0, -k);
      const Prescription pk = prescribe(op, hk, tol * std::ldexp(1.0, -k), max_iter, false);
      const double a = GridMetric::sup(hk), b = cm_norm(g, pk.f.field, 2);
      csv.row() << k << a << b << b / a << pk.iterations << pk.residual;
      num += a * b;
      den += a * a;
      lo = std::min(lo, b / a);
      hi = std::max(hi, b / a);
    }
    summary["sweep"] = {{"fitted_C", num / den}, {"ratio_min", lo}, {"ratio_max", hi}, {"spread", hi / lo - 1.0}};
  }
  run.write_json("prescribe_summary.json", summary);
  std::cout << "prescribe: residual " << io::fmt(p.residual) << " after " << p.iterations << " iterations -> "
            << run.path("prescribe_field.csv").string() << "\n";
  return p.residual <= tol ? kOk : kFailure;
}

// ---------------------------------------------------------------- extend

inline int run_extend(const Options& opt) {
  const Run run = open_run(opt);
  const Section s = run.block("extend");
  s.only({"delta0", "epsilon", "ell", "delta", "r0", "kappa0", "period", "mollify", "sweep", "samples"});
  CollarSpec spec;
  spec.delta0 = s.positive("delta0", spec.delta0);
  spec.epsilon = s.positive("epsilon", spec.epsilon);
  spec.ell = s.positive("ell", spec.ell);
  spec.delta = s.positive("delta", spec.delta);
  spec.r0 = s.positive("r0", spec.r0);
  spec.kappa0 = s.positive("kappa0", spec.kappa0);
  spec.period = s.positive("period", spec.period);
  if (!(spec.delta < 0.5 * spec.epsilon))
    throw ConfigError(s.field("delta"), s.line_at("delta"), "mollifier width must be below epsilon/2");
  if (!(spec.tail_joint() + spec.delta < 4.0))
    throw ConfigError(s.field("epsilon"), s.line_at("epsilon"), "collar joints must stay below t = 4");
  const bool mollify = s.get<bool>("mollify", true);
  const int samples = static_cast<int>(s.count("samples", 2000, 10));
  const auto ells = detail::numbers(s, "sweep", {spec.ell});

  Collar collar;
  std::optional<Profile> band;
  if (run.file.root.has("metric")) {
    const Metric m = io::parse_metric(run.file.root.child("metric"));
    if (!m.warped()) throw ConfigError("metric.kind", 0, "extension needs a warped metric");
    WarpedMetric ext;
    try {
      ext = equidistant_extend(*m.warped(), spec.delta0);
    } catch (const ConvexityLost& e) {
      throw ConfigError(s.field("delta0"), s.line_at("delta0"), e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("metric", 0, e.what());
    }
    collar = collar_from_extension(ext, spec.delta0, spec.epsilon, spec.ell, spec.delta);
    spec = collar.spec;
    band = collar.band;
  } else {
    collar = build_collar(spec);
  }
  if (mollify) collar.profile = mollify_joints(collar.profile, spec.delta);
  const CollarCertificate cert = certify(collar);
  const CollarSweep sw = collar_sweep(spec, ells, mollify, band, run.threads);

  const PiecewiseProfile& p = collar.profile;
  {
    CsvWriter csv(run.path("extend_profile.csv"), run.info, {"t", "w", "dw", "K", "region"},
                  {"ell: " + io::fmt(spec.ell), "kappa: " + io::fmt(collar.tail.kappa),
                   "r_tilde: " + io::fmt(collar.tail.r_tilde), std::string("mollified: ") + (mollify ? "1" : "0")});
    for (int i = 0; i <= samples; ++i) {
      const double t = p.t_min() + (p.t_max() - p.t_min()) * i / samples;
      const Side side = i == samples ? Side::Left : Side::Right;
      const int region = static_cast<int>(p.piece_at(t, side)) + 1;
      csv.row() << t << p.w(t, side) << p.dw(t, side) << p.curvature(t, side) << region;
    }
  }
  std::ostringstream text;
  text << cert.text();
  text << "sweep:\n";
  for (const auto& c : sw.certificates)
    text << "  ell " << c.ell << ": kappa " << io::fmt(c.kappa) << ", K max on [eps,4] " << c.k_max_outer
         << (c.negative_outer ? "" : " (not negative)") << "\n";
  text << "ell0: " << (sw.ell0 ? io::fmt(*sw.ell0) : std::string("none")) << "\n"
       << "kappa increasing: " << (sw.kappa_increasing ? "yes" : "no") << "\n";
  run.write_text("extend_certificate.txt", text.str());
  run.write_json("extend_summary.json", {{"certificate", cert.to_json()}, {"sweep", sw.to_json()}});
  std::cout << "extend: kappa " << io::fmt(collar.tail.kappa) << ", region-4 defect " << cert.region4_defect
            << ", ell0 " << (sw.ell0 ? io::fmt(*sw.ell0) : std::string("none")) << " -> "
            << run.path("extend_certificate.txt").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- diagnose

inline int run_diagnose(const Options& opt) {
  const Run run = open_run(opt);
  const Metric m = io::parse_metric(run.file.root.child("metric"));
  const Section s = run.block("diagnose");
  s.only({"boundary_samples", "conjugate_samples", "conjugate_t_max", "trapped_samples", "horizons", "lyapunov_T",
          "tol"});
  const int bsamples = static_cast<int>(s.count("boundary_samples", 256, 8));
  const long csamples = s.count("conjugate_samples", 64);
  const double ct_max = s.positive("conjugate_t_max", 50.0);
  const long tsamples = s.count("trapped_samples", 10000, 100);
  const auto horizons = detail::numbers(s, "horizons", {5.0, 10.0, 20.0, 40.0});
  const double lyap_T = s.positive("lyapunov_T", 40.0);
  const double tol = s.positive("tol", 1e-9);
  for (double h : horizons)
    if (!(h > 0.0)) throw ConfigError(s.field("horizons"), s.line_at("horizons"), "horizons must be positive");

  nlohmann::json rep;
  std::ostringstream text;
  const BoundaryFrame frame(m);

  double kmin = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < frame.curves().size(); ++c) {
    const auto k = boundary_second_fundamental_form(frame.curves()[c], bsamples);
    const double lo = *std::min_element(k.begin(), k.end());
    rep["convexity"]["min_geodesic_curvature"].push_back(lo);
    kmin = std::min(kmin, lo);
  }
  const bool convex = kmin > 0.0;
  rep["convexity"]["strict"] = convex;
  text << "convex boundary:        " << (convex ? "yes" : "no") << " (min geodesic curvature " << io::fmt(kmin)
       << ")\n";

  std::vector<std::optional<double>> conj(static_cast<std::size_t>(csamples));
  parallel_for(conj.size(), run.threads, [&](std::size_t i) {
    conj[i] = first_conjugate_point(m, liouville_sample(frame, run.info.seed, i), ct_max, 1e-10);
  });
  long found = 0;
  double first = std::numeric_limits<double>::infinity();
  for (const auto& c : conj)
    if (c) {
      ++found;
      first = std::min(first, *c);
    }
  rep["conjugate_points"] = {{"samples", csamples}, {"found", found}, {"t_max", ct_max}};
  if (found) rep["conjugate_points"]["earliest"] = first;
  text << "no conjugate points:    " << (found ? "no" : "yes") << " (" << found << " of " << csamples
       << " sampled geodesics";
  if (found) text << ", earliest at length " << io::fmt(first);
  text << ")\n";

  const auto tf = trapped_measure(m, horizons, tsamples, run.info.seed, tol, run.threads);
  bool nonincreasing = true;
  for (std::size_t i = 1; i < tf.size(); ++i) nonincreasing = nonincreasing && tf[i].fraction <= tf[i - 1].fraction;
  const bool decays = nonincreasing && (tf.back().fraction == 0.0 || tf.back().fraction < tf.front().fraction);
  {
    CsvWriter csv(run.path("diagnose_trapped.csv"), run.info,
                  {"horizon", "fraction", "half_width", "trapped", "samples", "failures"});
    for (const auto& f : tf) {
      csv.row() << f.horizon << f.fraction << f.half_width << f.trapped << f.samples << f.failures;
      rep["trapped"].push_back({{"horizon", f.horizon}, {"fraction", f.fraction}, {"half_width", f.half_width}});
    }
  }
  text << "trapped fraction decays: " << (decays ? "yes" : "no") << " (";
  for (std::size_t i = 0; i < tf.size(); ++i)
    text << (i ? ", " : "") << "T=" << tf[i].horizon << ": " << io::fmt(tf[i].fraction);
  text << ")\n";

  // Lyapunov exponent along the closed core geodesic of a warped annulus.
  if (m.warped() && m.chart().kind == ChartKind::Collar && ClairautSolver(*m.warped()).applicable()) {
    const double tc = ClairautSolver(*m.warped()).core();
    const UnitTangent u = make_unit(m, {tc, 0.0}, Eigen::Vector2d(0.0, 1.0));
    const LyapunovEstimate le = lyapunov_estimate(m, u, lyap_T, 1e-10);
    rep["lyapunov"] = {{"exponent", le.exponent}, {"time", le.time_used}, {"exited", le.exited}};
    text << "core Lyapunov exponent: " << io::fmt(le.exponent) << " over length " << io::fmt(le.time_used) << "\n";
  } else {
    rep["lyapunov"] = nullptr;
    text << "core Lyapunov exponent: n/a (no closed core geodesic)\n";
  }
  rep["verdict"] = {{"convex", convex}, {"no_conjugate_points", found == 0}, {"trapped_decays", decays}};
  run.write_text("diagnose_report.txt", text.str());
  run.write_json("diagnose_report.json", rep);
  std::cout << text.str();
  return kOk;
}

/// Dispatches, mapping configuration problems to exit code 2.
inline int run(const Options& opt) {
  try {
    if (opt.command == "lens") return run_lens(opt);
    if (opt.command == "distance") return run_distance(opt);
    if (opt.command == "prescribe") return run_prescribe(opt);
    if (opt.command == "extend") return run_extend(opt);
    if (opt.command == "diagnose") return run_diagnose(opt);
    std::cerr << "unknown command '" << opt.command << "'\n";
    return kConfigInvalid;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace anosov::cli
