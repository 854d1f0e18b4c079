#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mshom/harness.hpp"

using namespace mshom;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is, "test.cfg");
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mshom_harness_" + name);
  fs::remove_all(p);
  return p;
}

/// Report lines split into fields.
std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.push_back("");
    rows.push_back(f);
  }
  return rows;
}

const char* kSmallSimulate = R"(
mode = simulate
coef.alpha = 1
coef.beta = 3
a.family = trigonometric
a.trig = 1:2:1:0
b.family = trigonometric
b.trig = 1:2:1:0
schedule.epsilon = 0.25
cell.n = 16
mesh.homogenized_n = 8
mesh.fine_per_period = 8
time.final = 0.125
time.dt = 0.03125
time.stride = 2
data.g1 = mixed
data.f = smooth
simulate.model = both
corrector.kind = both
)";

}  // namespace

TEST(FitSlope, ExactSquareRootLaw) {
  std::vector<std::pair<double, double>> p;
  for (double e : {0.5, 0.25, 0.125, 0.0625}) p.push_back({e, 3.7 * std::sqrt(e)});
  EXPECT_NEAR(fit_slope(p), 0.5, 1e-12);
}

TEST(FitSlope, TwoPointsDoubling) {
  const std::vector<std::pair<double, double>> p{{1.0 / 8, 2e-2}, {1.0 / 16, 1e-2}};
  EXPECT_NEAR(fit_slope(p), 1.0, 1e-12);
}

TEST(FitSlope, ExponentArithmetic) {
  const double s = 1.0, rate = s / (1.0 + s);
  std::vector<std::pair<double, double>> p;
  for (double e : {0.2, 0.1, 0.05}) p.push_back({e, 0.3 * std::pow(e, rate)});
  EXPECT_NEAR(fit_slope(p), 0.5, 1e-12);
}

TEST(FitSlope, RejectsBadInput) {
  const std::vector<std::pair<double, double>> one{{0.1, 1.0}};
  const std::vector<std::pair<double, double>> neg{{0.1, 1.0}, {0.05, -1.0}};
  const std::vector<std::pair<double, double>> zero{{0.0, 1.0}, {0.05, 1.0}};
  const std::vector<std::pair<double, double>> same{{0.1, 1.0}, {0.1, 2.0}};
  EXPECT_THROW(fit_slope(one), ValidationError);
  EXPECT_THROW(fit_slope(neg), ValidationError);
  EXPECT_THROW(fit_slope(zero), ValidationError);
  EXPECT_THROW(fit_slope(same), ValidationError);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Config, ParsesValuesCommentsAndBlanks) {
  const RunConfig c = parse(R"(
# comment
dim = 3   # trailing comment
domain.extents = 1 2 0.5
a.family = separable-product
a.base = 1 0 0  0 2 0  0 0 3
a.profiles = 1:2:2:1:0.5; 2:3:1.5:0.5:0
schedule.ratios = 4
scales = 2
corrector.recover = false
)");
  EXPECT_EQ(c.dim, 3);
  EXPECT_EQ(c.extents, (std::vector<double>{1.0, 2.0, 0.5}));
  ASSERT_EQ(c.a.profiles.size(), 2u);
  EXPECT_EQ(c.a.profiles[0].axis, 1);
  EXPECT_EQ(c.a.profiles[1].level, 2);
  EXPECT_DOUBLE_EQ(c.a.profiles[1].amplitude, 0.5);
  EXPECT_FALSE(c.recover);
  const CoefficientSpec s = c.spec();
  EXPECT_EQ(s.a.family, Family::separable_product);
  EXPECT_DOUBLE_EQ(s.a.base(2, 2), 3.0);
}

TEST(Config, UnknownKeyNamesLine) {
  const std::string e = parse_error("dim = 2\n\ncell.nn = 4\n");
  EXPECT_NE(e.find("test.cfg:3"), std::string::npos) << e;
  EXPECT_NE(e.find("cell.nn"), std::string::npos) << e;
}

TEST(Config, RepeatedKeyRejected) {
  const std::string e = parse_error("dim = 2\ndim = 3\n");
  EXPECT_NE(e.find("repeated"), std::string::npos) << e;
  EXPECT_NE(e.find("line 1"), std::string::npos) << e;
}

TEST(Config, FieldLevelMessages) {
  EXPECT_NE(parse_error("time.dt = fast\n").find("time.dt"), std::string::npos);
  EXPECT_NE(parse_error("cell.n = 3.5\n").find("integer"), std::string::npos);
  EXPECT_NE(parse_error("data.g1 = wobble\n").find("data.g1"), std::string::npos);
  EXPECT_NE(parse_error("a.family = fractal\n").find("a.family"), std::string::npos);
  EXPECT_NE(parse_error("a.profiles = 1:1:2\n").find("a.profiles"), std::string::npos);
  EXPECT_NE(parse_error("no equals sign\n").find("key = value"), std::string::npos);
}

TEST(Config, ValidationRules) {
  RunConfig c;
  c.mode = "sweep";
  c.epsilons = {0.25, 0.125};
  EXPECT_THROW(c.validate(), ValidationError);
  c.epsilons = {0.25, 0.125, 0.0625};
  EXPECT_NO_THROW(c.validate());
  c.epsilons = {0.25, 0.125, 0.3};
  EXPECT_THROW(c.validate(), ValidationError);  // 1/0.3 is not an integer
  c.epsilons = {0.25, 0.125, 0.0625};
  c.scales = 2;
  EXPECT_THROW(c.validate(), ValidationError);  // ratios missing
  c.ratios = {4};
  EXPECT_NO_THROW(c.validate());
  c.extents = {1.0};
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Config, FingerprintStableAndSensitive) {
  const RunConfig a = parse("dim = 2\ncell.n = 32\n");
  const RunConfig b = parse("cell.n = 32\n\ndim = 2 # same\n");
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  RunConfig c = a;
  c.workers = 7;
  EXPECT_EQ(a.fingerprint(), c.fingerprint());
  c.cell_n = {64};
  EXPECT_NE(a.fingerprint(), c.fingerprint());
}

TEST(Config, CanonicalRoundTrip) {
  const RunConfig a = parse(kSmallSimulate);
  const RunConfig b = parse(a.canonical());
  EXPECT_EQ(a.canonical(), b.canonical());
}

TEST(Execute, HomogenizeConstantDumpsInputs) {
  const fs::path out = scratch("hom");
  RunConfig c = parse("coef.alpha = 1\ncoef.beta = 4\na.base = 3\nb.base = 2 0.5 0.5 1.5\ncell.n = 8\n");
  execute(c, out);
  const auto rows = csv(slurp(out / "report.csv"));
  const double expect_b[2][2] = {{2.0, 0.5}, {0.5, 1.5}};
  int seen = 0;
  for (const auto& r : rows) {
    if (r[0] == "b0") {
      EXPECT_NEAR(std::stod(r[3]), expect_b[std::stoi(r[1]) - 1][std::stoi(r[2]) - 1], 1e-12);
      ++seen;
    } else if (r[0] == "a0") {
      EXPECT_NEAR(std::stod(r[3]), 3.0, 1e-12);
      ++seen;
    }
  }
  EXPECT_EQ(seen, 5);
  EXPECT_TRUE(fs::exists(out / "tensors.txt"));
  const std::string manifest = slurp(out / "manifest.txt");
  EXPECT_NE(manifest.find("fingerprint = " + hex64(c.fingerprint())), std::string::npos);
  EXPECT_NE(manifest.find(c.canonical()), std::string::npos);
}

TEST(Execute, SimulateZeroDataGivesZeroEnergy) {
  const fs::path out = scratch("zero");
  RunConfig c = parse("mode = simulate\ncell.n = 4\nmesh.homogenized_n = 4\ntime.final = 0.25\n");
  const RunResult r = execute(c, out);
  for (double e : r.trajectory->energy) EXPECT_EQ(e, 0.0);
  const auto rows = csv(slurp(out / "trajectory.csv"));
  ASSERT_GT(rows.size(), 2u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stod(rows[i][1]), 0.0);
}

TEST(Execute, SimulateBothWritesErrorsAndIsReproducible) {
  const fs::path o1 = scratch("rep1"), o2 = scratch("rep2");
  RunConfig c = parse(kSmallSimulate);
  const RunResult r = execute(c, o1);
  ASSERT_TRUE(r.errors && r.ms_errors);
  EXPECT_GT(r.errors->max_total, 0.0);
  c.workers = 3;
  execute(c, o2);
  for (const char* f : {"report.csv", "errors.csv", "trajectory.csv", "tensors.txt"}) EXPECT_EQ(slurp(o1 / f), slurp(o2 / f)) << f;
  const auto rows = csv(slurp(o1 / "errors.csv"));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"eps", "t", "E_vel", "E_curl", "E_ms"}));
  EXPECT_EQ(rows.size(), r.errors->t.size() + 1);
}

TEST(Execute, SweepReportLayout) {
  const fs::path out = scratch("sweep");
  RunConfig c = parse(kSmallSimulate);
  c.mode = "sweep";
  c.epsilons = {0.5, 0.25, 0.125};
  c.corrector = "pointwise";
  const RunResult r = execute(c, out);
  ASSERT_TRUE(r.report);
  EXPECT_FALSE(r.report->partial);
  std::vector<std::pair<double, double>> pairs;
  for (const SweepRun& s : r.report->runs) {
    EXPECT_TRUE(s.completed);
    EXPECT_EQ(s.fine_n, static_cast<int>(std::lround(8 / s.eps)));
    pairs.push_back({s.eps, s.pointwise.max_total});
  }
  EXPECT_DOUBLE_EQ(r.report->slope, fit_slope(pairs));
  EXPECT_TRUE(std::isnan(r.report->slope_ms));
  const auto rows = csv(slurp(out / "report.csv"));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[1][0], "run");
  EXPECT_EQ(rows[4][0], "slope");
  EXPECT_EQ(rows[5][5], "complete");
  EXPECT_EQ(rows[6][5], hex64(c.fingerprint()));
  EXPECT_EQ(slurp(out / "report.csv").find("seconds"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "timing.txt"));
}

TEST(Execute, LayeredSweepSlopeInWindow) {
  const fs::path out = scratch("layered");
  RunConfig c = parse(R"(
mode = sweep
coef.alpha = 1
coef.beta = 3
a.family = layered
a.profiles = 1:1:2:1:0
b.family = layered
b.profiles = 1:1:2:1:0
sweep.epsilons = 0.25 0.125 0.0625
cell.n = 64
mesh.homogenized_n = 32
mesh.fine_per_period = 16
time.final = 0.25
time.dt = 0.015625
time.stride = 4
data.g1 = mixed
data.f = smooth
)");
  const RunResult r = execute(c, out);
  const auto& runs = r.report->runs;
  for (std::size_t i = 1; i < runs.size(); ++i) EXPECT_LT(runs[i].pointwise.max_total, runs[i - 1].pointwise.max_total);
  EXPECT_GE(r.report->slope, 0.35);
  EXPECT_LE(r.report->slope, 1.1);
}

TEST(Execute, InvalidConfigWritesNothing) {
  const fs::path out = scratch("invalid");
  RunConfig c;
  c.mode = "sweep";
  EXPECT_THROW(execute(c, out), ValidationError);
  EXPECT_FALSE(fs::exists(out / "report.csv"));
}
