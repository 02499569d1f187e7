#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "confgame/confgame.hpp"
#include "confgame/harness.hpp"

using namespace confgame;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("confgame_h_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(const std::string& args, const fs::path& dir) {
  fs::path log = dir / "stdout.txt";
  std::string cmd = std::string(CONFGAME_CLI) + " " + args + " > " + log.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, slurp(log)};
}

ExperimentConfig small(const fs::path& out) {
  ExperimentConfig c;
  c.id = "smoke";
  c.n_grid = {400, 1600};
  c.seeds = {1, 2};
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST(Experiment, WritesAllFiles) {
  fs::path out = scratch("files");
  ExperimentConfig c = small(out);
  c.n_grid = {100};
  ExperimentResult r = run_experiment(c);
  for (const char* f : {"report.csv", "summary.csv", "timing.csv", "manifest"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(slurp(out / "report.csv").rfind("experiment,n,seed,metric,value,status,message\n", 0), 0u);
  EXPECT_EQ(r.rows.size(), 2 * metric_names().size());
  EXPECT_NE(r.manifest.find("version=" + std::string(kVersion)), std::string::npos);
}

TEST(Experiment, ByteIdenticalAcrossRunsAndThreads) {
  ExperimentConfig c = small(scratch("det"));
  c.threads = 1;
  ExperimentResult a = run_experiment(c, false);
  c.threads = 4;
  ExperimentResult b = run_experiment(c, false);
  EXPECT_EQ(a.report_csv, b.report_csv);
  EXPECT_EQ(a.summary_csv, b.summary_csv);
  EXPECT_EQ(a.manifest, b.manifest);
}

TEST(Experiment, FailedCellDoesNotSpoilOthers) {
  ExperimentConfig c = small(scratch("fail"));
  c.n_grid = {2, 2000};
  c.seeds = {3};
  ExperimentResult r = run_experiment(c, false);
  int failed = 0, good = 0;
  for (const auto& row : r.rows) {
    if (row.n == 2) {
      EXPECT_FALSE(row.ok);
      EXPECT_FALSE(row.message.empty());
      ++failed;
    } else {
      EXPECT_TRUE(row.ok) << row.metric << " " << row.message;
      ++good;
    }
  }
  EXPECT_EQ(failed, good);
  EXPECT_NE(r.report_csv.find(",failed,"), std::string::npos);
}

TEST(Experiment, PopulationSizedSampleHasSmallErrors) {
  ExperimentConfig c = small(scratch("acc"));
  c.n_grid = {50000};
  c.seeds = {5};
  ExperimentResult r = run_experiment(c, false);
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.ok) << row.message;
    if (row.metric == "rmse_theta" || row.metric == "j_error") {
      EXPECT_LT(row.value, 0.05) << row.metric;
    }
    if (row.metric == "gap") {
      EXPECT_GE(row.value, 0.0);
    }
  }
}

TEST(Experiment, ManifestHashTracksConfig) {
  ExperimentConfig a = small(scratch("hash")), b = a;
  b.eta.c_eta *= 2;
  EXPECT_NE(fnv1a(a.canonical()), fnv1a(b.canonical()));
  EXPECT_EQ(fnv1a(a.canonical()), fnv1a(small(scratch("hash")).canonical()));
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig c = small(scratch("cfg"));
  c.n_grid = {};
  EXPECT_THROW(run_experiment(c, false), ConfigError);
  c.n_grid = {100, 100};
  EXPECT_THROW(validate_config(c), ConfigError);
  c.n_grid = {100};
  c.seeds = {};
  EXPECT_THROW(validate_config(c), ConfigError);
  c.seeds = {1};
  c.spec = "no_such_spec";
  EXPECT_THROW(validate_config(c), ConfigError);
  EXPECT_THROW(parse_class("greedy"), ConfigError);
}

TEST(Stats, QuantileType7) {
  std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(median(v), 2.5);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.9), 7.0);
}

TEST(Cli, ValidateFixture) {
  fs::path d = scratch("cli_validate");
  CliRun r = cli("validate --spec " + std::string(CONFGAME_FIXTURE_DIR) + "/t1.spec", d);
  EXPECT_EQ(r.code, 0) << r.out;
  std::string control = (d / "shared_v1.spec").string();
  write_spec(control, make_t1_shared_v1());
  EXPECT_EQ(cli("validate --spec " + control, d).code, 1);
}

TEST(Cli, UsageErrors) {
  fs::path d = scratch("cli_usage");
  CliRun r = cli("frobnicate", d);
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.out.find("usage: confgame"), std::string::npos);
  EXPECT_EQ(cli("simulate --spec t1 --n ten --out x.csv", d).code, 64);
  EXPECT_EQ(cli("identify --data " + (d / "missing.csv").string(), d).code, 2);
}

TEST(Cli, EndToEnd) {
  fs::path d = scratch("cli_e2e");
  std::string data = (d / "t1.csv").string();
  ASSERT_EQ(cli("simulate --spec t1 --n 20000 --seeds 4 --out " + data, d).code, 0);
  EXPECT_EQ(read_dataset(data).size(), 20000u);

  CliRun id = cli("identify --data " + data + " --spec t1", d);
  ASSERT_EQ(id.code, 0) << id.out;
  EXPECT_NE(id.out.find("step,player,s,u,theta_a,theta_z,theta_az"), std::string::npos);
  EXPECT_NE(id.out.find("step,player,linf_error"), std::string::npos);

  std::string pol = (d / "learned.policy").string();
  CliRun ln = cli("learn --data " + data + " --out " + pol, d);
  ASSERT_EQ(ln.code, 0) << ln.out;
  ASSERT_TRUE(fs::exists(pol));

  std::string qh = (d / "qhat.csv").string();
  CliRun ev = cli("evaluate --data " + data + " --policy " + pol + " --spec t1 --out " + qh, d);
  ASSERT_EQ(ev.code, 0) << ev.out;
  EXPECT_EQ(slurp(qh).rfind("step,player,s,u,theta,gamma,omega,zeta\n", 0), 0u);

  fs::path bench = d / "bench";
  CliRun bm = cli("benchmark --spec t1 --n 500,1000 --seeds 1-2 --out " + bench.string(), d);
  ASSERT_EQ(bm.code, 0) << bm.out;
  EXPECT_TRUE(fs::exists(bench / "summary.csv"));
}
