#pragma once
// Run configurations, the homogenize / simulate / sweep pipelines and their
// on-disk outputs.
//
// Config format: one `key = value` per line, `#` starts a comment, keys are
// dotted names from the table in `detail::config_keys`. Unknown or repeated
// keys are rejected.

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "corrector.hpp"

namespace mshom {

inline constexpr const char* kVersion = "1.0.0";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Least-squares slope of log(error) against log(eps).
inline double fit_slope(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 2) detail::fail_validation("fit_slope: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& [e, err] : pairs) {
    if (!(e > 0.0) || !(err > 0.0)) detail::fail_validation("fit_slope: epsilon and error values must be positive");
    mx += std::log(e);
    my += std::log(err);
  }
  mx /= static_cast<double>(pairs.size());
  my /= static_cast<double>(pairs.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [e, err] : pairs) {
    const double dx = std::log(e) - mx;
    sxy += dx * (std::log(err) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) detail::fail_validation("fit_slope: epsilon values must not all coincide");
  return sxy / sxx;
}

struct RunConfig {
  std::string mode = "homogenize";  ///< homogenize | simulate | sweep
  int dim = 2;
  int scales = 1;
  double alpha = 1.0;
  double beta = 1.0;

  struct Field {
    std::string family = "constant";
    std::vector<double> base{1.0};  ///< one value (times I) or m*m row-major entries
    std::vector<Factor> profiles;
    Factor trig{1, 0, 1.0, 0.0, 0.0};
    double slow_amplitude = 0.0;
    std::string expression;
  } a, b;

  double epsilon = 0.25;
  std::vector<int> ratios;
  std::vector<double> epsilons;  ///< sweep

  std::vector<double> extents{1.0, 1.0};
  std::vector<int> cell_n{64};
  int x_samples = 9;
  std::vector<int> y_samples{16};
  int homogenized_n = 64;
  int fine_n = 0;  ///< simulate: explicit fine subdivisions (0: from fine_per_period)
  int fine_per_period = 32;

  double final_time = 0.5;
  double dt = 0.0;  ///< 0: half the mesh width of the coarsest mesh in the run
  int stride = 1;

  std::string g0 = "zero", g1 = "zero", f = "zero";
  std::string model = "homogenized";  ///< simulate: homogenized | fine | both
  std::string corrector = "pointwise";  ///< pointwise | multiscale | both
  bool recover = true;
  double tol = 1e-10;
  int workers = 1;

  CoefficientSpec spec() const;
  Point extent_point() const {
    Point p{1.0, 1.0, 1.0};
    for (std::size_t j = 0; j < extents.size() && j < 3; ++j) p[j] = extents[j];
    return p;
  }
  void validate() const;
  /// Sorted `key = value` lines with every resolved value; the hashing input.
  /// run.workers is left out since results do not depend on it.
  std::string canonical() const;
  std::uint64_t fingerprint() const { return fnv1a(canonical()); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& v, const char* sep = " ") {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? sep : "") << v[i];
  return os.str();
}

inline double to_double(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || trim(s.substr(pos)).size() != 0 || !std::isfinite(v))
    fail_validation("config: " + key + ": expected a number, got '" + s + "'");
  return v;
}

inline int to_int(const std::string& key, const std::string& s) {
  const double v = to_double(key, s);
  if (v != std::floor(v) || std::abs(v) > 1e9) fail_validation("config: " + key + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& w : words(s)) out.push_back(to_double(key, w));
  return out;
}

inline std::vector<int> to_ints(const std::string& key, const std::string& s) {
  std::vector<int> out;
  for (const auto& w : words(s)) out.push_back(to_int(key, w));
  return out;
}

inline bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail_validation("config: " + key + ": expected true or false, got '" + s + "'");
}

inline std::string choice(const std::string& key, const std::string& s, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (s == a) return s;
    list += std::string(list.empty() ? "" : ", ") + a;
  }
  fail_validation("config: " + key + ": '" + s + "' is not one of " + list);
}

/// "level:axis:mean:amplitude:phase; ..."
inline std::vector<Factor> to_profiles(const std::string& key, const std::string& s) {
  std::vector<Factor> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ';')) {
    const auto p = split(item, ':');
    if (p.size() != 5) fail_validation("config: " + key + ": profile '" + item + "' must be level:axis:mean:amplitude:phase");
    out.push_back({to_int(key, p[0]), to_int(key, p[1]) - 1, to_double(key, p[2]), to_double(key, p[3]), to_double(key, p[4])});
  }
  return out;
}

inline std::string profiles_text(const std::vector<Factor>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? "; " : "") + std::to_string(v[i].level) + ":" + std::to_string(v[i].axis + 1) + ":" + fmt(v[i].mean) + ":" +
           fmt(v[i].amplitude) + ":" + fmt(v[i].phase);
  return out;
}

/// "level:mean:amplitude:phase"
inline Factor to_trig(const std::string& key, const std::string& s) {
  const auto p = split(s, ':');
  if (p.size() != 4) fail_validation("config: " + key + ": expected level:mean:amplitude:phase");
  return {to_int(key, p[0]), 0, to_double(key, p[1]), to_double(key, p[2]), to_double(key, p[3])};
}

inline std::string trig_text(const Factor& f) {
  return std::to_string(f.level) + ":" + fmt(f.mean) + ":" + fmt(f.amplitude) + ":" + fmt(f.phase);
}

struct ConfigKey {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto add = [&](std::string name, std::function<void(RunConfig&, const std::string&)> set, std::function<std::string(const RunConfig&)> get) {
      k.push_back({name, std::move(set), std::move(get)});
    };
    add("mode", [](RunConfig& c, const std::string& v) { c.mode = choice("mode", v, {"homogenize", "simulate", "sweep"}); },
        [](const RunConfig& c) { return c.mode; });
    add("dim", [](RunConfig& c, const std::string& v) { c.dim = to_int("dim", v); }, [](const RunConfig& c) { return std::to_string(c.dim); });
    add("scales", [](RunConfig& c, const std::string& v) { c.scales = to_int("scales", v); },
        [](const RunConfig& c) { return std::to_string(c.scales); });
    add("coef.alpha", [](RunConfig& c, const std::string& v) { c.alpha = to_double("coef.alpha", v); }, [](const RunConfig& c) { return fmt(c.alpha); });
    add("coef.beta", [](RunConfig& c, const std::string& v) { c.beta = to_double("coef.beta", v); }, [](const RunConfig& c) { return fmt(c.beta); });
    for (const char* which : {"a", "b"}) {
      const std::string w = which;
      auto fld = [w](RunConfig& c) -> RunConfig::Field& { return w == "a" ? c.a : c.b; };
      auto cfld = [w](const RunConfig& c) -> const RunConfig::Field& { return w == "a" ? c.a : c.b; };
      auto name = [&](const std::string& s) { return w + "." + s; };
      add(name("family"),
          [fld, w](RunConfig& c, const std::string& v) {
            fld(c).family = choice(w + ".family", v, {"constant", "layered", "trigonometric", "separable-product", "expression"});
          },
          [cfld](const RunConfig& c) { return cfld(c).family; });
      add(name("base"), [fld, w](RunConfig& c, const std::string& v) { fld(c).base = to_doubles(w + ".base", v); },
          [cfld](const RunConfig& c) { return join(cfld(c).base); });
      add(name("profiles"), [fld, w](RunConfig& c, const std::string& v) { fld(c).profiles = to_profiles(w + ".profiles", v); },
          [cfld](const RunConfig& c) { return profiles_text(cfld(c).profiles); });
      add(name("trig"), [fld, w](RunConfig& c, const std::string& v) { fld(c).trig = to_trig(w + ".trig", v); },
          [cfld](const RunConfig& c) { return trig_text(cfld(c).trig); });
      add(name("slow_amplitude"), [fld, w](RunConfig& c, const std::string& v) { fld(c).slow_amplitude = to_double(w + ".slow_amplitude", v); },
          [cfld](const RunConfig& c) { return fmt(cfld(c).slow_amplitude); });
      add(name("expression"), [fld](RunConfig& c, const std::string& v) { fld(c).expression = v; },
          [cfld](const RunConfig& c) { return cfld(c).expression; });
    }
    add("schedule.epsilon", [](RunConfig& c, const std::string& v) { c.epsilon = to_double("schedule.epsilon", v); },
        [](const RunConfig& c) { return fmt(c.epsilon); });
    add("schedule.ratios", [](RunConfig& c, const std::string& v) { c.ratios = to_ints("schedule.ratios", v); },
        [](const RunConfig& c) { return join(c.ratios); });
    add("sweep.epsilons", [](RunConfig& c, const std::string& v) { c.epsilons = to_doubles("sweep.epsilons", v); },
        [](const RunConfig& c) { return join(c.epsilons); });
    add("domain.extents", [](RunConfig& c, const std::string& v) { c.extents = to_doubles("domain.extents", v); },
        [](const RunConfig& c) { return join(c.extents); });
    add("cell.n", [](RunConfig& c, const std::string& v) { c.cell_n = to_ints("cell.n", v); }, [](const RunConfig& c) { return join(c.cell_n); });
    add("cell.x_samples", [](RunConfig& c, const std::string& v) { c.x_samples = to_int("cell.x_samples", v); },
        [](const RunConfig& c) { return std::to_string(c.x_samples); });
    add("cell.y_samples", [](RunConfig& c, const std::string& v) { c.y_samples = to_ints("cell.y_samples", v); },
        [](const RunConfig& c) { return join(c.y_samples); });
    add("mesh.homogenized_n", [](RunConfig& c, const std::string& v) { c.homogenized_n = to_int("mesh.homogenized_n", v); },
        [](const RunConfig& c) { return std::to_string(c.homogenized_n); });
    add("mesh.fine_n", [](RunConfig& c, const std::string& v) { c.fine_n = to_int("mesh.fine_n", v); },
        [](const RunConfig& c) { return std::to_string(c.fine_n); });
    add("mesh.fine_per_period", [](RunConfig& c, const std::string& v) { c.fine_per_period = to_int("mesh.fine_per_period", v); },
        [](const RunConfig& c) { return std::to_string(c.fine_per_period); });
    add("time.final", [](RunConfig& c, const std::string& v) { c.final_time = to_double("time.final", v); },
        [](const RunConfig& c) { return fmt(c.final_time); });
    add("time.dt", [](RunConfig& c, const std::string& v) { c.dt = to_double("time.dt", v); }, [](const RunConfig& c) { return fmt(c.dt); });
    add("time.stride", [](RunConfig& c, const std::string& v) { c.stride = to_int("time.stride", v); },
        [](const RunConfig& c) { return std::to_string(c.stride); });
    add("data.g0", [](RunConfig& c, const std::string& v) { c.g0 = choice("data.g0", v, {"zero", "cavity", "mixed"}); },
        [](const RunConfig& c) { return c.g0; });
    add("data.g1", [](RunConfig& c, const std::string& v) { c.g1 = choice("data.g1", v, {"zero", "cavity", "mixed"}); },
        [](const RunConfig& c) { return c.g1; });
    add("data.f", [](RunConfig& c, const std::string& v) { c.f = choice("data.f", v, {"zero", "smooth"}); }, [](const RunConfig& c) { return c.f; });
    add("simulate.model", [](RunConfig& c, const std::string& v) { c.model = choice("simulate.model", v, {"homogenized", "fine", "both"}); },
        [](const RunConfig& c) { return c.model; });
    add("corrector.kind",
        [](RunConfig& c, const std::string& v) { c.corrector = choice("corrector.kind", v, {"pointwise", "multiscale", "both"}); },
        [](const RunConfig& c) { return c.corrector; });
    add("corrector.recover", [](RunConfig& c, const std::string& v) { c.recover = to_bool("corrector.recover", v); },
        [](const RunConfig& c) { return std::string(c.recover ? "true" : "false"); });
    add("solver.tol", [](RunConfig& c, const std::string& v) { c.tol = to_double("solver.tol", v); }, [](const RunConfig& c) { return fmt(c.tol); });
    add("run.workers", [](RunConfig& c, const std::string& v) { c.workers = to_int("run.workers", v); },
        [](const RunConfig& c) { return std::to_string(c.workers); });
    return k;
  }();
  return keys;
}

inline SymMatrix base_matrix(const std::vector<double>& v, int m, const std::string& key) {
  if (v.size() == 1) return v[0] * identity_matrix(m);
  if (static_cast<int>(v.size()) != m * m)
    fail_validation("config: " + key + ": expected 1 or " + std::to_string(m * m) + " entries, got " + std::to_string(v.size()));
  SymMatrix s(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) s(r, c) = v[static_cast<std::size_t>(r * m + c)];
  return s;
}

}  // namespace detail

inline CoefficientSpec RunConfig::spec() const {
  CoefficientSpec s;
  s.dim = dim;
  s.scales = scales;
  s.alpha = alpha;
  s.beta = beta;
  for (Which w : {Which::a, Which::b}) {
    const Field& src = w == Which::a ? a : b;
    FieldSpec& dst = w == Which::a ? s.a : s.b;
    const std::string tag = which_name(w);
    dst.family = parse_family(src.family);
    dst.base = detail::base_matrix(src.base, s.matrix_size(w), tag + ".base");
    dst.factors = src.profiles;
    dst.trig = src.trig;
    dst.slow_amplitude = src.slow_amplitude;
    if (dst.family == Family::expression) dst.expression = Expression::parse(src.expression);
  }
  return s;
}

inline void RunConfig::validate() const {
  if (dim != 2 && dim != 3) detail::fail_validation("config: dim must be 2 or 3");
  if (static_cast<int>(extents.size()) != dim) detail::fail_validation("config: domain.extents needs " + std::to_string(dim) + " values");
  for (double e : extents)
    if (!(e > 0.0)) detail::fail_validation("config: domain.extents must be positive");
  spec().validate();
  if (static_cast<int>(ratios.size()) != scales - 1)
    detail::fail_validation("config: schedule.ratios needs " + std::to_string(scales - 1) + " values for " + std::to_string(scales) + " scales");
  if (mode == "sweep") {
    if (epsilons.size() < 3) detail::fail_validation("config: sweep.epsilons needs at least 3 values for a slope fit");
    for (double e : epsilons) ScaleSchedule{e, ratios, true}.validate(scales);
  } else if (mode == "simulate" && model != "homogenized") {
    ScaleSchedule{epsilon, ratios, true}.validate(scales);
  }
  if (homogenized_n < 1) detail::fail_validation("config: mesh.homogenized_n must be >= 1");
  if (fine_n < 0) detail::fail_validation("config: mesh.fine_n must be >= 0");
  if (fine_per_period < 1) detail::fail_validation("config: mesh.fine_per_period must be >= 1");
  if (!(final_time > 0.0)) detail::fail_validation("config: time.final must be positive");
  if (dt < 0.0) detail::fail_validation("config: time.dt must be >= 0");
  if (stride < 1) detail::fail_validation("config: time.stride must be >= 1");
  if (!(tol > 0.0 && tol < 1.0)) detail::fail_validation("config: solver.tol must lie in (0,1)");
  if (workers < 1) detail::fail_validation("config: run.workers must be >= 1");
}

inline std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  for (const auto& k : detail::config_keys())
    if (k.name != "run.workers") kv[k.name] = k.get(*this);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

inline RunConfig parse_config(std::istream& is, const std::string& source = "config") {
  RunConfig c;
  std::map<std::string, int> seen;
  std::map<std::string, const detail::ConfigKey*> table;
  for (const auto& k : detail::config_keys()) table[k.name] = &k;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) detail::fail_validation(where + ": expected 'key = value'");
    const std::string key = detail::trim(t.substr(0, eq)), value = detail::trim(t.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) detail::fail_validation(where + ": unknown key '" + key + "'");
    if (seen.count(key)) detail::fail_validation(where + ": key '" + key + "' repeated (first on line " + std::to_string(seen[key]) + ")");
    seen[key] = lineno;
    try {
      it->second->set(c, value);
    } catch (const ValidationError& e) {
      detail::fail_validation(where + ": " + e.what());
    }
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::fail_validation("config: cannot open " + path.string());
  return parse_config(in, path.filename().string());
}

// ---------------------------------------------------------------------------
// Pipelines

struct SweepRun {
  double eps = 0.0;
  int fine_n = 0;
  bool completed = false;
  std::string failure;
  ErrorSeries pointwise;
  ErrorSeries multiscale;
  double runtime = 0.0;  ///< seconds; kept out of the deterministic outputs
};

struct ConvergenceReport {
  std::vector<SweepRun> runs;
  double slope = std::numeric_limits<double>::quiet_NaN();     ///< of max_t (E_vel + E_curl)
  double slope_ms = std::numeric_limits<double>::quiet_NaN();  ///< of max_t E_ms
  bool partial = false;
  std::string fingerprint;
};

struct RunResult {
  RunConfig config;
  std::optional<HomogenizationResult> hom;
  std::optional<WaveProblem> problem;  ///< simulate: the run written to trajectory.csv
  std::optional<WaveTrajectory> trajectory;
  std::optional<ErrorSeries> errors;     ///< simulate with model both
  std::optional<ErrorSeries> ms_errors;  ///< simulate with model both and a multiscale corrector
  std::optional<ConvergenceReport> report;
};

namespace detail {

inline HomogenizationOptions hom_options(const RunConfig& c) {
  HomogenizationOptions o;
  o.cell_n = c.cell_n;
  o.x_samples = c.x_samples;
  o.y_samples = c.y_samples;
  o.workers = c.workers;
  o.rel_tol = c.tol;
  o.extents = c.extent_point();
  return o;
}

inline TimeOptions time_options(const RunConfig& c) {
  TimeOptions t;
  t.final_time = c.final_time;
  t.dt = c.dt;
  t.snapshot_stride = c.stride;
  t.rel_tol = c.tol;
  return t;
}

inline int fine_subdivisions(const RunConfig& c, const ScaleSchedule& s) {
  if (c.fine_n > 0) return c.fine_n;
  double lmax = 0.0;
  for (double e : c.extents) lmax = std::max(lmax, e);
  return static_cast<int>(std::lround(c.fine_per_period * lmax / s.finest()));
}

inline std::string fmt_or_nan(double v) { return std::isfinite(v) ? fmt(v) : std::string("nan"); }

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail_validation("cannot write " + p.string());
  out << text;
  if (!out) fail_validation("failed writing " + p.string());
}

struct CorrectorErrors {
  ErrorSeries pointwise;
  ErrorSeries multiscale;
};

/// Runs the fine problem and evaluates the requested correctors at every stamp
/// without storing the fine snapshots.
inline CorrectorErrors fine_run_with_errors(const RunConfig& c, const HomogenizationResult& hom, const WaveProblem& coarse,
                                            const WaveTrajectory& u0, const ScaleSchedule& sched, const WaveProblem& fine, int workers) {
  const bool pw = c.corrector != "multiscale", ms = c.corrector != "pointwise";
  CorrectorOptions co;
  co.recover = c.recover;
  std::optional<CorrectorField> point;
  std::optional<MultiscaleCorrector> multi;
  if (pw) point.emplace(coarse, u0, hom, sched, co);
  if (ms) multi.emplace(coarse, u0, hom, sched);
  CorrectorErrors out;
  int stamp = 0;
  IntegrateOptions io;
  io.store_snapshots = false;
  io.observer = [&](int, double t, const Vector& u, const Vector& v) {
    if (stamp >= static_cast<int>(u0.stamps.size()) || std::abs(u0.stamps[static_cast<std::size_t>(stamp)] - t) > 1e-9 * std::max(1.0, t))
      fail_validation("corrector error: grid mismatch (fine and homogenized stamps differ)");
    if (pw) {
      point->prepare(stamp);
      out.pointwise.push(t, stamp_error(fine, u, v, *point, stamp, workers));
    }
    if (ms) {
      multi->prepare(stamp);
      out.multiscale.push(t, stamp_error(fine, u, v, *multi, stamp, workers));
    }
    ++stamp;
  };
  integrate(fine, io);
  if (stamp != static_cast<int>(u0.stamps.size())) fail_validation("corrector error: grid mismatch (stamp counts differ)");
  return out;
}

inline std::string manifest_header(const RunConfig& c) {
  std::ostringstream os;
  os << "mshom run manifest\n";
  os << "version = " << kVersion << "\n";
  os << "eigen = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  os << "mode = " << c.mode << "\n";
  os << "fingerprint = " << hex64(c.fingerprint()) << "\n";
  os << "workers = " << c.workers << "\n";
  os << "\n[config]\n" << c.canonical();
  return os.str();
}

inline std::string problem_lines(const std::string& tag, const WaveProblem& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << tag << ".n = " << p.mesh.subdivisions() << "\n";
  os << tag << ".dofs = " << p.mass.size() << "\n";
  os << tag << ".dt = " << p.dt << "\n";
  os << tag << ".steps = " << p.steps << "\n";
  os << tag << ".quadrature = " << p.quadrature << "\n";
  return os.str();
}

inline std::string error_rows(double eps, const ErrorSeries* pw, const ErrorSeries* ms) {
  std::ostringstream os;
  const ErrorSeries& ref = pw ? *pw : *ms;
  for (std::size_t k = 0; k < ref.t.size(); ++k) {
    os << fmt_or_nan(eps) << ',' << fmt(ref.t[k]) << ',';
    if (pw) os << fmt(pw->vel[k]) << ',' << fmt(pw->curl[k]);
    else os << "nan,nan";
    os << ',' << (ms ? fmt(ms->vel[k] + ms->curl[k]) : std::string("nan")) << '\n';
  }
  return os.str();
}

inline std::string tensors_text(const HomogenizationResult& hom) {
  std::ostringstream os;
  hom.dump(os);
  return os.str();
}

}  // namespace detail

/// Runs the configured pipeline, writing outputs into `out` (created if
/// needed). Throws ValidationError or NumericalError; a sweep with failed runs
/// still writes its outputs before throwing.
inline RunResult execute(RunConfig cfg, const std::filesystem::path& out, std::ostream* log = nullptr) {
  cfg.validate();
  std::filesystem::create_directories(out);
  RunResult res;
  res.config = cfg;
  const CoefficientSpec spec = cfg.spec();
  const int d = cfg.dim;
  const ClosedFormData data = builtin_data(cfg.g0, cfg.g1, cfg.f, d);
  const TimeOptions time = detail::time_options(cfg);
  std::string derived;
  auto say = [&](const std::string& s) {
    if (log) *log << s << std::endl;
  };
  using clock = std::chrono::steady_clock;

  auto homogenize_step = [&]() {
    say("homogenizing (" + std::to_string(spec.scales) + " level(s))");
    res.hom = homogenize(spec, detail::hom_options(cfg));
    detail::write_file(out / "tensors.txt", detail::tensors_text(*res.hom));
  };

  std::ostringstream report;
  report << std::setprecision(17);

  if (cfg.mode == "homogenize") {
    homogenize_step();
    const SymMatrix b0 = res.hom->b0({}), a0 = res.hom->a0({});
    report << "quantity,row,col,value\n";
    for (int r = 0; r < b0.rows(); ++r)
      for (int c = 0; c < b0.cols(); ++c) report << "b0," << r + 1 << ',' << c + 1 << ',' << detail::fmt(b0(r, c)) << '\n';
    for (int r = 0; r < a0.rows(); ++r)
      for (int c = 0; c < a0.cols(); ++c) report << "a0," << r + 1 << ',' << c + 1 << ',' << detail::fmt(a0(r, c)) << '\n';
    if (spec.depends_on_x()) report << "note,,,tensors at x = 0; tensors.txt lists every sample\n";
  } else if (cfg.mode == "simulate") {
    const Point ext = cfg.extent_point();
    std::optional<WaveProblem> coarse;
    std::optional<WaveTrajectory> u0;
    if (cfg.model != "fine") {
      homogenize_step();
      coarse = setup_homogenized(*res.hom, DomainMesh(d, cfg.homogenized_n, ext), data, time);
      derived += detail::problem_lines("homogenized", *coarse);
      say("homogenized run: " + std::to_string(coarse->mass.size()) + " dofs, " + std::to_string(coarse->steps) + " steps");
      u0 = integrate(*coarse);
    }
    if (cfg.model == "homogenized") {
      res.problem = *coarse;
      res.trajectory = std::move(*u0);
    } else {
      const ScaleSchedule sched{cfg.epsilon, cfg.ratios, true};
      TimeOptions ft = time;
      if (coarse) ft.dt = coarse->dt;  // shared time grid
      const WaveProblem fine = setup_fine(spec, sched, DomainMesh(d, detail::fine_subdivisions(cfg, sched), ext), data, ft);
      derived += detail::problem_lines("fine", fine);
      say("fine run: " + std::to_string(fine.mass.size()) + " dofs, " + std::to_string(fine.steps) + " steps");
      if (cfg.model == "fine") {
        res.trajectory = integrate(fine);
      } else {
        const bool pw = cfg.corrector != "multiscale", ms = cfg.corrector != "pointwise";
        WaveTrajectory tr = integrate(fine);
        CorrectorOptions co;
        co.recover = cfg.recover;
        if (pw) {
          CorrectorField corr(*coarse, *u0, *res.hom, sched, co);
          res.errors = corrector_error(fine, tr, corr, cfg.workers);
        }
        if (ms) {
          MultiscaleCorrector corr(*coarse, *u0, *res.hom, sched);
          res.ms_errors = multiscale_corrector_error(fine, tr, corr, cfg.workers);
        }
        res.trajectory = std::move(tr);
        std::ostringstream e;
        e << "eps,t,E_vel,E_curl,E_ms\n"
          << detail::error_rows(cfg.epsilon, res.errors ? &*res.errors : nullptr, res.ms_errors ? &*res.ms_errors : nullptr);
        detail::write_file(out / "errors.csv", e.str());
      }
      res.problem = fine;
    }
    std::ostringstream traj;
    write_trajectory_csv(traj, *res.problem, *res.trajectory);
    detail::write_file(out / "trajectory.csv", traj.str());
    const WaveTrajectory& tr = *res.trajectory;
    double drift = 0.0;
    for (double e : tr.energy) drift = std::max(drift, std::abs(e - tr.energy.front()));
    report << "quantity,value\n";
    report << "model," << cfg.model << '\n';
    report << "steps," << res.problem->steps << '\n';
    report << "dt," << detail::fmt(res.problem->dt) << '\n';
    report << "energy_initial," << detail::fmt(tr.energy.front()) << '\n';
    report << "energy_final," << detail::fmt(tr.energy.back()) << '\n';
    report << "energy_max_drift," << detail::fmt(drift) << '\n';
    if (res.errors) {
      report << "E_vel," << detail::fmt(res.errors->max_vel) << '\n';
      report << "E_curl," << detail::fmt(res.errors->max_curl) << '\n';
    }
    if (res.ms_errors) report << "E_ms," << detail::fmt(res.ms_errors->max_total) << '\n';
  } else {
    // sweep
    homogenize_step();
    const Point ext = cfg.extent_point();
    const WaveProblem coarse = setup_homogenized(*res.hom, DomainMesh(d, cfg.homogenized_n, ext), data, time);
    derived += detail::problem_lines("homogenized", coarse);
    say("homogenized run: " + std::to_string(coarse.mass.size()) + " dofs, " + std::to_string(coarse.steps) + " steps");
    const WaveTrajectory u0 = integrate(coarse);
    TimeOptions ft = time;
    ft.dt = coarse.dt;

    ConvergenceReport rep;
    rep.fingerprint = hex64(cfg.fingerprint());
    rep.runs.resize(cfg.epsilons.size());
    const int outer = std::min<int>(cfg.workers, static_cast<int>(cfg.epsilons.size()));
    const int inner = std::max(1, cfg.workers / std::max(1, outer));
    std::vector<std::exception_ptr> validation(cfg.epsilons.size());
    detail::parallel_for(static_cast<int>(cfg.epsilons.size()), outer, [&](int i) {
      SweepRun& run = rep.runs[static_cast<std::size_t>(i)];
      run.eps = cfg.epsilons[static_cast<std::size_t>(i)];
      const ScaleSchedule sched{run.eps, cfg.ratios, true};
      const auto t0 = clock::now();
      try {
        run.fine_n = detail::fine_subdivisions(cfg, sched);
        const WaveProblem fine = setup_fine(spec, sched, DomainMesh(d, run.fine_n, ext), data, ft);
        const detail::CorrectorErrors e = detail::fine_run_with_errors(cfg, *res.hom, coarse, u0, sched, fine, inner);
        run.pointwise = e.pointwise;
        run.multiscale = e.multiscale;
        run.completed = true;
      } catch (const NumericalError& e) {
        run.failure = e.what();
      } catch (const ValidationError&) {
        validation[static_cast<std::size_t>(i)] = std::current_exception();
      }
      run.runtime = std::chrono::duration<double>(clock::now() - t0).count();
    });
    for (const auto& e : validation)
      if (e) std::rethrow_exception(e);

    const bool pw = cfg.corrector != "multiscale", ms = cfg.corrector != "pointwise";
    std::vector<std::pair<double, double>> tot, msp;
    std::ostringstream errs, timing;
    errs << "eps,t,E_vel,E_curl,E_ms\n";
    timing << std::setprecision(6);
    for (const SweepRun& r : rep.runs) {
      timing << "eps " << detail::fmt(r.eps) << " fine_n " << r.fine_n << " seconds " << r.runtime << '\n';
      say("eps " + detail::fmt(r.eps) + (r.completed ? " done" : " FAILED: " + r.failure));
      if (!r.completed) {
        rep.partial = true;
        continue;
      }
      derived += "run.eps_" + detail::fmt(r.eps) + ".fine_n = " + std::to_string(r.fine_n) + "\n";
      errs << detail::error_rows(r.eps, pw ? &r.pointwise : nullptr, ms ? &r.multiscale : nullptr);
      if (pw) tot.push_back({r.eps, r.pointwise.max_total});
      if (ms) msp.push_back({r.eps, r.multiscale.max_total});
    }
    if (tot.size() >= 2) rep.slope = fit_slope(tot);
    if (msp.size() >= 2) rep.slope_ms = fit_slope(msp);
    detail::write_file(out / "errors.csv", errs.str());
    detail::write_file(out / "timing.txt", timing.str());

    report << "kind,eps,fine_n,E_vel,E_curl,E_total,E_ms\n";
    for (const SweepRun& r : rep.runs) {
      report << "run," << detail::fmt(r.eps) << ',' << r.fine_n << ',';
      if (!r.completed) {
        report << "failed,failed,failed,failed\n";
        continue;
      }
      if (pw) report << detail::fmt(r.pointwise.max_vel) << ',' << detail::fmt(r.pointwise.max_curl) << ',' << detail::fmt(r.pointwise.max_total);
      else report << "nan,nan,nan";
      report << ',' << (ms ? detail::fmt(r.multiscale.max_total) : std::string("nan")) << '\n';
    }
    report << "slope,,,,," << detail::fmt_or_nan(rep.slope) << ',' << detail::fmt_or_nan(rep.slope_ms) << '\n';
    report << "status,,,,," << (rep.partial ? "partial" : "complete") << ",\n";
    report << "config,,,,," << rep.fingerprint << ",\n";
    res.report = rep;
  }

  detail::write_file(out / "report.csv", report.str());
  std::string manifest = detail::manifest_header(cfg);
  manifest += "\n[derived]\n" + derived;
  manifest += "\n[outputs]\n";
  for (const char* f : {"tensors.txt", "trajectory.csv", "errors.csv", "report.csv"})
    if (std::filesystem::exists(out / f)) manifest += std::string(f) + "\n";
  detail::write_file(out / "manifest.txt", manifest);

  if (res.report && res.report->partial) {
    std::string msg = "sweep: some runs failed (report.csv marks them)";
    for (const SweepRun& r : res.report->runs)
      if (!r.completed) msg += "; eps " + detail::fmt(r.eps) + ": " + r.failure;
    detail::fail_numerical(msg);
  }
  return res;
}

}  // namespace mshom
