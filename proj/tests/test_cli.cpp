// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "cli.hpp"
#include "support.hpp"

namespace lesa {
namespace {

using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "lesa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  const auto bytes = binary::read_file(p);
  return {bytes.begin(), bytes.end()};
}

TEST(Cli, FlopsLine) {
  const auto r = run({"flops", "--steps", "50", "--n", "10", "--stages", "16,41"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "50,10,16,41,8,42,6.25\n");
  EXPECT_EQ(run({"flops", "--n", "7"}).out, "50,7,16,41,10,40,5\n");
  EXPECT_EQ(run({"flops", "--n", "5", "--header"}).out, "steps,N,b1,b2,full,predict,speedup\n50,5,16,41,13,37,3.84615385\n");
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = run({"bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
}

TEST(Cli, UnknownFlagRejected) {
  const auto r = run({"flops", "--speed", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST(Cli, HelpListsFlagsAndDefaults) {
  const std::map<std::string, std::vector<std::string>> flags{
      {"record", {"--backbone", "--seeds", "--steps", "--dim", "--out", "--config"}},
      {"train",
       {"--data", "--stages", "--windows", "--modulator", "--m-components", "--grid", "--n", "--epochs-gt",
        "--epochs-cl", "--lr", "--wd", "--clip", "--seed", "--out", "--log"}},
      {"run", {"--model", "--method", "--n", "--seed", "--backbone-config", "--out", "--stages"}},
      {"eval", {"--ref", "--test", "--csv"}},
      {"flops", {"--steps", "--n", "--stages"}},
      {"report", {"--methods", "--ns", "--seeds", "--out", "--backbone-config", "--jobs"}},
  };
  for (const auto& [cmd, names] : flags) {
    const auto r = run({cmd, "--help"});
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : names) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
  const auto train = run({"train", "--help"}).out;
  EXPECT_NE(train.find("0.0001"), std::string::npos);
  EXPECT_NE(train.find("4,8,8"), std::string::npos);
}

TEST(Cli, ValidationErrorsExitOne) {
  const auto r = run({"flops", "--n", "0"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: validation: ", 0), 0u) << r.err;
  EXPECT_EQ(run({"flops", "--stages", "16"}).code, 1);
  EXPECT_EQ(run({"flops", "--stages", "a,b"}).code, 1);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  TempDir dir;
  const auto r = run({"eval", "--ref", (dir / "missing.lesa").string(), "--test", (dir / "x.lesa").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: io: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, SeedRanges) {
  EXPECT_EQ(cli::parse_seeds("0..4"), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(cli::parse_seeds("4..4"), (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(cli::parse_seeds("7"), (std::vector<std::uint64_t>{7}));
  EXPECT_EQ(cli::parse_seeds("3,1"), (std::vector<std::uint64_t>{3, 1}));
  EXPECT_THROW(cli::parse_seeds("5..4"), Error);
  EXPECT_THROW(cli::parse_seeds("x..3"), Error);
}

TEST(Cli, RecordWritesOneFilePerSeed) {
  TempDir dir;
  const auto out = (dir / "d").string();
  const auto r = run({"record", "--backbone", "synth", "--seeds", "0..4", "--steps", "50", "--dim", "16", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(out)) files += e.path().extension() == ".lesa";
  EXPECT_EQ(files, 5u);
  const auto t = read_trajectory(std::filesystem::path(out) / "traj_4.lesa");
  EXPECT_EQ(t.steps(), 50u);
  EXPECT_EQ(t.feature_dim(), 16u);
}

TEST(Cli, RecordConfigFileAndOverrides) {
  TempDir dir;
  cli::write_text(dir / "bb.cfg", "backbone=gmm\ndim=3\nsteps=20\ngmm.components=2\n");
  ASSERT_EQ(run({"record", "--config", (dir / "bb.cfg").string(), "--seeds", "1", "--out", (dir / "a").string()}).code,
            0);
  EXPECT_EQ(read_trajectory(dir / "a" / "traj_1.lesa").feature_dim(), 3u);
  ASSERT_EQ(run({"record", "--config", (dir / "bb.cfg").string(), "--dim", "5", "--seeds", "1", "--out",
                 (dir / "b").string()})
                .code,
            0);
  const auto t = read_trajectory(dir / "b" / "traj_1.lesa");
  EXPECT_EQ(t.feature_dim(), 5u);
  EXPECT_EQ(t.steps(), 20u);
  cli::write_text(dir / "bad.cfg", "colour=red\n");
  const auto r = run({"record", "--config", (dir / "bad.cfg").string(), "--out", (dir / "c").string()});
  EXPECT_EQ(r.code, 1);
}

// record -> train -> run -> eval -> report, twice, with byte-identical outputs.
TEST(Cli, PipelineIsReproducible) {
  TempDir dir;
  cli::write_text(dir / "bb.cfg", "backbone=synth\ndim=8\nsteps=50\n");
  std::vector<std::string> outputs;
  for (int rep = 0; rep < 2; ++rep) {
    const std::string tag = std::to_string(rep);
    const auto data = (dir / ("data" + tag)).string();
    const auto model = (dir / ("m" + tag + ".lesm")).string();
    const auto log = (dir / ("log" + tag + ".csv")).string();
    const auto traj = (dir / ("t" + tag + ".lesa")).string();
    const auto ref = (dir / ("ref" + tag + ".lesa")).string();
    const auto csv = (dir / ("eval" + tag + ".csv")).string();
    const auto rep_csv = (dir / ("report" + tag + ".csv")).string();
    ASSERT_EQ(run({"record", "--config", (dir / "bb.cfg").string(), "--seeds", "0..2", "--out", data}).code, 0);
    auto r = run({"train", "--data", data, "--n", "10", "--epochs-gt", "2", "--epochs-cl", "1", "--lr", "1e-3",
                  "--seed", "4", "--out", model, "--log", log});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"run", "--model", model, "--method", "lesa", "--n", "10", "--seed", "9", "--backbone-config",
             (dir / "bb.cfg").string(), "--out", traj});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"run", "--method", "full", "--seed", "9", "--backbone-config", (dir / "bb.cfg").string(), "--out", ref});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"eval", "--ref", ref, "--test", traj, "--csv", csv});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"report", "--methods", "full,reuse,taylor:2,lesa", "--ns", "10", "--seeds", "20..23", "--model", model,
             "--backbone-config", (dir / "bb.cfg").string(), "--jobs", "2", "--out", rep_csv});
    ASSERT_EQ(r.code, 0) << r.err;
    outputs.push_back(slurp(model) + slurp(log) + slurp(traj) + slurp(csv) + slurp(rep_csv));

    const auto log_text = slurp(log);
    EXPECT_EQ(log_text.rfind("phase,epoch,trajectory,mean_l1\n", 0), 0u);
    EXPECT_EQ(std::count(log_text.begin(), log_text.end(), '\n'), 1 + 3 * 2 + 3 * 1);
    const auto report = parse_csv(slurp(rep_csv));
    ASSERT_EQ(report.rows.size(), 4u);
    EXPECT_EQ(report.rows[3].method, "lesa");
    EXPECT_EQ(slurp(csv).rfind("steps,dim,endpoint_rel_err,feature_mae\n50,8,", 0), 0u);
  }
  EXPECT_EQ(outputs[0], outputs[1]);
}

TEST(Cli, RunRejectsMismatchedModel) {
  TempDir dir;
  PredictorSpec spec;
  spec.dim = 16;
  write_model(make_stage_predictor(spec), dir / "m.lesm");
  const auto r = run({"run", "--model", (dir / "m.lesm").string(), "--method", "lesa", "--out", (dir / "t").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dim"), std::string::npos);
  EXPECT_EQ(run({"run", "--method", "lesa", "--out", (dir / "t").string()}).code, 1);
}

TEST(Cli, ReportToStdout) {
  const auto r = run({"report", "--methods", "full,taylor:1", "--ns", "5,10", "--seeds", "0..2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = parse_csv(r.out);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.rows[3].speedup, 6.25);
}

}  // namespace
}  // namespace lesa
