#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "densepoint/io.hpp"
#include "densepoint/metrics.hpp"
#include "densepoint/micronet.hpp"
#include "densepoint/rng.hpp"

namespace fs = std::filesystem;
using namespace densepoint;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("densepoint_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> small_data_args(const fs::path& dir, const std::string& seed) {
  return {"gen-data", "--out", dir.string(), "--train", "3", "--val", "2", "--test", "2",
          "--seed", seed, "--image-size", "32", "--count-min", "1", "--count-max", "3"};
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
  EXPECT_EQ(invoke({}).code, cli::kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kUsage);
}

TEST(Cli, HelpIsSuccess) { EXPECT_EQ(invoke({"--help"}).code, cli::kOk); }

TEST(Cli, NegativeCountIsUsageError) {
  const Outcome o = invoke({"gen-data", "--out", fresh("neg").string(), "--train", "-1"});
  EXPECT_EQ(o.code, cli::kUsage);
}

TEST(Cli, MissingRequiredIsUsageError) {
  EXPECT_EQ(invoke({"train", "--out", "x"}).code, cli::kUsage);
}

TEST(Cli, MissingDatasetIsDataError) {
  const Outcome o = invoke({"train", "--data", "/nonexistent/densepoint", "--out",
                            fresh("missing").string(), "--epochs", "0"});
  EXPECT_EQ(o.code, cli::kData);
  EXPECT_NE(o.err.find("does not exist"), std::string::npos);
}

TEST(Cli, InfeasibleSceneIsDataError) {
  const Outcome o = invoke({"gen-data", "--out", fresh("infeasible").string(), "--train", "1",
                            "--image-size", "20", "--count-min", "30", "--count-max", "30"});
  EXPECT_EQ(o.code, cli::kData);
}

TEST(Cli, GenDataIsByteDeterministic) {
  const fs::path a = fresh("gen_a");
  const fs::path b = fresh("gen_b");
  ASSERT_EQ(invoke(small_data_args(a, "11")).code, cli::kOk);
  ASSERT_EQ(invoke(small_data_args(b, "11")).code, cli::kOk);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(read_binary_file(entry.path()), read_binary_file(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 3u + 7u + 1u);
  EXPECT_TRUE(fs::exists(a / "manifest.gen-data.json"));
}

TEST(Cli, TargetsWriteGridPerImage) {
  const fs::path data = fresh("tgt_data");
  const fs::path out = fresh("tgt_out");
  ASSERT_EQ(invoke(small_data_args(data, "3")).code, cli::kOk);
  ASSERT_EQ(invoke({"targets", "--data", data.string(), "--split", "val", "--out", out.string()}).code,
            cli::kOk);
  const DenseGrid h = load_grid(out / "val_0000_heatmap.dpg");
  const DenseGrid d = load_grid(out / "val_0000_density.dpg");
  EXPECT_EQ(h.width(), 32u);
  EXPECT_EQ(d.width(), 16u);
  EXPECT_EQ(h.max(), 1.0);
}

TEST(Cli, ZeroEpochTrainSavesInitialization) {
  const fs::path data = fresh("init_data");
  const fs::path run = fresh("init_run");
  ASSERT_EQ(invoke(small_data_args(data, "4")).code, cli::kOk);
  ASSERT_EQ(invoke({"train", "--data", data.string(), "--out", run.string(), "--epochs", "0",
                    "--seed", "17", "--crop", "32"})
                .code,
            cli::kOk);
  const MicroNet net = load_checkpoint(run / "checkpoint.dpw", default_micronet_spec());
  Rng init(mix64(17ull ^ 0x696e6974ULL));
  const MicroNet expected = MicroNet::initialized(default_micronet_spec(), init);
  EXPECT_TRUE(std::equal(net.parameters().begin(), net.parameters().end(),
                         expected.parameters().begin(), expected.parameters().end()));
  EXPECT_EQ(read_text_file(run / "loss_curve.csv"), "epoch,l_nsf,l_fp,l_r,total\n");
}

TEST(Cli, TrainEvalPlotPipeline) {
  const fs::path data = fresh("pipe_data");
  const fs::path run = fresh("pipe_run");
  const fs::path rep = fresh("pipe_eval");
  const fs::path plot = fresh("pipe_plot");
  ASSERT_EQ(invoke(small_data_args(data, "5")).code, cli::kOk);
  const Outcome t = invoke({"train", "--data", data.string(), "--out", run.string(), "--epochs",
                            "2", "--crop", "32", "--quiet"});
  ASSERT_EQ(t.code, cli::kOk) << t.err;
  EXPECT_EQ(t.out.find("epoch "), std::string::npos);
  const std::string csv = read_text_file(run / "loss_curve.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  const Outcome e = invoke({"eval", "--data", data.string(), "--checkpoint",
                            (run / "checkpoint.dpw").string(), "--out", rep.string(), "--json"});
  ASSERT_EQ(e.code, cli::kOk) << e.err;
  const EvalReport from_stdout = report_from_json(e.out);
  const EvalReport from_file = report_from_json(read_text_file(rep / "report.json"));
  EXPECT_EQ(from_stdout, from_file);
  EXPECT_EQ(from_file.images, 2u);
  ASSERT_TRUE(from_file.threshold.has_value());
  EXPECT_GE(*from_file.threshold, 0.3);
  EXPECT_LE(*from_file.threshold, 0.5);
  EXPECT_TRUE(fs::exists(rep / "detections.jsonl"));
  EXPECT_TRUE(fs::exists(rep / "manifest.eval.json"));

  const Outcome table = invoke({"eval", "--data", data.string(), "--checkpoint",
                                (run / "checkpoint.dpw").string()});
  EXPECT_NE(table.out.find("sigma_l"), std::string::npos);

  ASSERT_EQ(invoke({"plot", "--data", data.string(), "--split", "test", "--index", "1",
                    "--checkpoint", (run / "checkpoint.dpw").string(), "--out", plot.string()})
                .code,
            cli::kOk);
  EXPECT_TRUE(fs::exists(plot / "test_0001_pred_overlay.ppm"));
  EXPECT_TRUE(fs::exists(plot / "test_0001_pred_heatmap.pgm"));
  ASSERT_EQ(invoke({"plot", "--data", data.string(), "--out", plot.string()}).code, cli::kOk);
  EXPECT_TRUE(fs::exists(plot / "test_0000_gt_density.pgm"));
  EXPECT_EQ(invoke({"plot", "--data", data.string(), "--index", "9", "--out", plot.string()}).code,
            cli::kData);
}

TEST(Cli, PlotSingleGrid) {
  const fs::path dir = fresh("grid");
  fs::create_directories(dir);
  store_grid(DenseGrid(4, 6, 0.25), dir / "g.dpg");
  ASSERT_EQ(invoke({"plot", "--grid", (dir / "g.dpg").string(), "--out", dir.string()}).code,
            cli::kOk);
  EXPECT_TRUE(fs::exists(dir / "g.pgm"));
  EXPECT_EQ(invoke({"plot", "--out", dir.string()}).code, cli::kUsage);
}

TEST(Cli, CorruptCheckpointIsDataError) {
  const fs::path data = fresh("bad_ckpt");
  ASSERT_EQ(invoke(small_data_args(data, "6")).code, cli::kOk);
  write_text_file(data / "bogus.dpw", "nope");
  EXPECT_EQ(invoke({"eval", "--data", data.string(), "--checkpoint", (data / "bogus.dpw").string()})
                .code,
            cli::kData);
}

TEST(RunManifest, StableDigest) {
  cli::RunManifest m;
  m.command = "x";
  m.config_json = R"({"a":1})";
  const std::string j = m.to_json();
  EXPECT_EQ(j, m.to_json());
  EXPECT_NE(j.find("\"version\": \"0.1.0\""), std::string::npos);
}
