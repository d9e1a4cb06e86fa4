#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "anosov/cli.hpp"

namespace fs = std::filesystem;
using namespace anosov;

namespace {

const fs::path kExamples = ANOSOV_EXAMPLES_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("anosov_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.yaml";
  std::ofstream(p) << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Data rows of a CSV file, split on commas (no quoted cells in these files).
std::vector<std::vector<std::string>> rows(const fs::path& p) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(slurp(p));
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    out.push_back(cells);
  }
  return out;
}

struct Outcome {
  int code;
  std::string err;
};

Outcome run(const std::string& cmd, const fs::path& config, const fs::path& out,
            std::optional<std::uint64_t> seed = std::nullopt, std::optional<int> threads = std::nullopt) {
  testing::internal::CaptureStdout();
  testing::internal::CaptureStderr();
  const int code = cli::run({cmd, config, out, seed, threads});
  testing::internal::GetCapturedStdout();
  return {code, testing::internal::GetCapturedStderr()};
}

}  // namespace

TEST(CliLens, FlatDiskTenSamplesUntrapped) {
  const fs::path out = scratch("flat");
  ASSERT_EQ(run("lens", kExamples / "flat_disk_lens.yaml", out).code, 0);
  const auto r = rows(out / "lens.csv");
  ASSERT_EQ(r.size(), 10u);
  for (const auto& row : r) {
    EXPECT_EQ(row[4], "0");
    EXPECT_EQ(row.back(), "ok");
    // Chords of the unit disk: travel time 2 cos(alpha), exit angle equals entry angle.
    EXPECT_NEAR(std::stod(row[8]), 2.0 * std::cos(std::stod(row[3])), 1e-8);
    EXPECT_NEAR(std::stod(row[7]), std::stod(row[3]), 1e-8);
  }
}

TEST(CliLens, ByteIdenticalReruns) {
  const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  ASSERT_EQ(run("lens", kExamples / "cosh_lens.yaml", a).code, 0);
  ASSERT_EQ(run("lens", kExamples / "cosh_lens.yaml", b).code, 0);
  ASSERT_EQ(run("lens", kExamples / "cosh_lens.yaml", c, std::nullopt, 3).code, 0);
  EXPECT_EQ(slurp(a / "lens.csv"), slurp(b / "lens.csv"));
  EXPECT_EQ(slurp(a / "lens.csv"), slurp(c / "lens.csv"));
  EXPECT_NE(slurp(a / "lens.csv").find("# seed: 42\n"), std::string::npos);
  EXPECT_NE(slurp(a / "lens.csv").find("# config_hash: fnv1a64:"), std::string::npos);
}

TEST(CliLens, SeedOverrideIsRecordedAndChangesSamples) {
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(run("lens", kExamples / "flat_disk_lens.yaml", a).code, 0);
  ASSERT_EQ(run("lens", kExamples / "flat_disk_lens.yaml", b, 9).code, 0);
  EXPECT_NE(slurp(b / "lens.csv").find("# seed: 9\n"), std::string::npos);
  EXPECT_NE(rows(a / "lens.csv")[0][2], rows(b / "lens.csv")[0][2]);
}

TEST(CliConfig, DiagnosticsNameTheField) {
  const fs::path dir = scratch("bad");
  const auto fails_on = [&](const std::string& body, const std::string& command, const std::string& needle) {
    const Outcome o = run(command, write_config(dir, body), dir / "out");
    EXPECT_EQ(o.code, cli::kConfigInvalid) << body;
    EXPECT_NE(o.err.find(needle), std::string::npos) << o.err;
  };
  fails_on("seed: 1\nmetric: {kind: euclidean_disk}\nlens:\n  samples: ten\n", "lens", "'lens.samples' (line 4)");
  fails_on("seed: 1\nmetric: {kind: euclidean_disk}\nlens:\n  sample: 3\n", "lens", "'lens.sample'");
  fails_on("metric: {kind: euclidean_disk}\nlens: {samples: 3}\n", "lens", "'seed'");
  fails_on("seed: 1\nmetric: {kind: torus}\n", "lens", "'metric.kind'");
  fails_on("seed: 1\nmetric: {kind: warped, profile: cosh(t, t_min: -1, t_max: 1}\n", "lens", "'metric.profile'");
  fails_on("seed: 1\nmetric: {kind: warped, profile: 't - 2', t_min: -1, t_max: 1}\n", "lens", "'metric'");
  fails_on("seed: 1\nmetric: {file: missing.yaml}\n", "lens", "'metric.file'");
  fails_on("seed: 1\nmetric: [1, 2\n", "lens", "line");
  fails_on("seed: 1\nmetric: {kind: euclidean_disk}\ndistance: {mode: sideways}\n", "distance", "'distance.mode'");
  fails_on("seed: 1\nmetric: {kind: euclidean_disk}\ndistance: {mode: compare}\n", "distance", "'metric2'");
  fails_on("seed: 1\nmetric: {kind: euclidean_disk}\nmetric2: {kind: spherical_cap, c: 0.5}\n"
           "distance: {mode: compare, samples: 4}\n",
           "distance", "boundary metrics differ");
}

TEST(CliExtend, RejectsWideMollifier) {
  const fs::path dir = scratch("wide");
  const Outcome o = run("extend", write_config(dir, "seed: 0\nextend: {epsilon: 0.1, delta: 0.05}\n"), dir / "out");
  EXPECT_EQ(o.code, cli::kConfigInvalid);
  EXPECT_NE(o.err.find("'extend.delta'"), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(dir / "out" / "extend_profile.csv"));
}

TEST(CliExtend, ReferenceCertificateAndThreshold) {
  const fs::path out = scratch("collar");
  ASSERT_EQ(run("extend", kExamples / "collar.yaml", out).code, 0);
  const auto j = nlohmann::json::parse(slurp(out / "extend_summary.json"));
  EXPECT_LE(j["certificate"]["region4_defect"].get<double>(), 1e-8);
  EXPECT_LE(j["certificate"]["max_c1_residual"].get<double>(), 1e-10);
  EXPECT_EQ(j["sweep"]["ell0"].get<double>(), 4.0);
  EXPECT_TRUE(j["sweep"]["kappa_increasing"].get<bool>());
  const auto prof = rows(out / "extend_profile.csv");
  EXPECT_EQ(prof.size(), 2001u);
  EXPECT_EQ(prof.front().back(), "1");
  EXPECT_EQ(prof.back().back(), "4");
}

TEST(CliDistance, DiskChordsMatchFormula) {
  const fs::path out = scratch("chords");
  ASSERT_EQ(run("distance", kExamples / "disk_chords.yaml", out).code, 0);
  const auto r = rows(out / "distance.csv");
  ASSERT_EQ(r.size(), 100u);
  for (const auto& row : r) EXPECT_NEAR(std::stod(row[6]), std::stod(row[10]), 1e-6);
}

TEST(CliDistance, WindingSweepColumns) {
  const fs::path dir = scratch("winding");
  const fs::path cfg = write_config(dir,
                                    "seed: 1\nmetric: {file: " + (kExamples / "cosh_annulus.yaml").string() +
                                        "}\ndistance: {mode: winding, n_max: 4}\n");
  ASSERT_EQ(run("distance", cfg, dir / "out").code, 0);
  const auto r = rows(dir / "out" / "distance.csv");
  ASSERT_EQ(r.size(), 4u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i][6], "1");
    EXPECT_EQ(r[i][7], "1");
    EXPECT_EQ(r[i][8], "ok");
    if (i) {
      EXPECT_LT(std::stod(r[i][3]), std::stod(r[i - 1][3]));
    }
  }
}

TEST(CliDistance, IdenticalMetricsCompareToZero) {
  const fs::path dir = scratch("same");
  const fs::path cfg = write_config(dir,
                                    "seed: 4\nmetric: {kind: conformal_disk, phi: 0.1*x}\n"
                                    "metric2: {kind: conformal_disk, phi: 0.1*x}\n"
                                    "distance: {mode: compare, samples: 20}\n");
  ASSERT_EQ(run("distance", cfg, dir / "out").code, 0);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "distance_report.json"));
  EXPECT_EQ(j["sup_exit_position"].get<double>(), 0.0);
  EXPECT_EQ(j["sup_exit_angle"].get<double>(), 0.0);
  EXPECT_EQ(j["sup_travel_time"].get<double>(), 0.0);
}

TEST(CliPrescribe, ZeroCurvatureChangeGivesZeroField) {
  const fs::path dir = scratch("pzero");
  const fs::path cfg = write_config(
      dir, "seed: 1\nmetric: {kind: conformal_disk, phi: 0.1*x*y}\nprescribe: {grid: {nu: 17, nphi: 16}, h: '0'}\n");
  ASSERT_EQ(run("prescribe", cfg, dir / "out").code, 0);
  for (const auto& row : rows(dir / "out" / "prescribe_field.csv")) EXPECT_EQ(std::stod(row[4]), 0.0);
  EXPECT_TRUE(rows(dir / "out" / "prescribe_trace.csv").empty());
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "out" / "prescribe_summary.json"))["iterations"].get<int>(), 0);
}

TEST(CliPrescribe, SweepFitsConstantAndKernelIsRefused) {
  const fs::path dir = scratch("psweep");
  const fs::path cfg = write_config(dir,
                                    "seed: 1\nmetric: {kind: conformal_disk, phi: 0.1*x*x - 0.05*x*y + 0.05*y}\n"
                                    "prescribe: {grid: {nu: 33, nphi: 32}, h: 'cos(2*x)', h_sup: 0.05, sweep: 3}\n");
  ASSERT_EQ(run("prescribe", cfg, dir / "out").code, 0);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "prescribe_summary.json"));
  EXPECT_GT(j["sweep"]["fitted_C"].get<double>(), 0.0);
  EXPECT_LT(j["sweep"]["spread"].get<double>(), 0.2);
  EXPECT_EQ(rows(dir / "out" / "prescribe_sweep.csv").size(), 4u);

  const fs::path out = scratch("prefuse");
  EXPECT_EQ(run("prescribe", kExamples / "prescribe_hemisphere.yaml", out).code, cli::kRefused);
  EXPECT_NE(slurp(out / "prescribe_refusal.txt").find("kernel within tolerance"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "prescribe_field.csv"));
}

TEST(CliDiagnose, FlatDiskAndCap) {
  const fs::path flat = scratch("dflat"), cap = scratch("dcap");
  ASSERT_EQ(run("diagnose", kExamples / "diagnose_flat.yaml", flat).code, 0);
  const auto f = nlohmann::json::parse(slurp(flat / "diagnose_report.json"));
  EXPECT_TRUE(f["verdict"]["convex"].get<bool>());
  EXPECT_TRUE(f["verdict"]["no_conjugate_points"].get<bool>());
  for (const auto& t : f["trapped"]) EXPECT_EQ(t["fraction"].get<double>(), 0.0);

  ASSERT_EQ(run("diagnose", kExamples / "diagnose_cap.yaml", cap).code, 0);
  const auto c = nlohmann::json::parse(slurp(cap / "diagnose_report.json"));
  EXPECT_FALSE(c["verdict"]["no_conjugate_points"].get<bool>());
  EXPECT_NEAR(c["conjugate_points"]["earliest"].get<double>(), std::numbers::pi, 1e-6);
}
