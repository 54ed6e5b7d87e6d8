#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "higarment/image.hpp"
#include "higarment/synth.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace hg;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig =
    "image_size=16\nd_model=8\npatch=4\nnum_queries=2\ndenoiser_width1=4\ndenoiser_width2=8\n"
    "time_dim=8\nsteps=3\nbatch=2\nddim_steps=5\n";

// One small dataset and trained run shared by the tests below.
struct Fixture {
  fs::path root, data, run;
  Fixture() {
    root = test::scratch_dir("cli_fixture");
    data = root / "data";
    run = root / "run";
    write_text_file(root / "tiny.cfg", kTinyConfig);
    const Result g = run_or_die({"gen-data", "--n", "4", "--seed", "1", "--size", "16", "--out", data.string()});
    const Result t = run_or_die({"train", "--config", (root / "tiny.cfg").string(), "--data", data.string(), "--out",
                                 this->run.string()});
    (void)g;
    (void)t;
  }
  static Result run_or_die(std::vector<std::string> args) {
    Result r = ::run(std::move(args));
    EXPECT_EQ(r.code, 0) << r.err;
    return r;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"gen-data", "--n", "0", "--out", "/tmp/x"}).code, cli::kUsage);
  EXPECT_EQ(run({"no-such-command"}).code, cli::kUsage);
  EXPECT_EQ(run({"sweep-alpha", "--ckpt", "x", "--out", "y", "--grid", "0.6:1.0"}).code, cli::kValidation);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, GenDataManifestHashStable) {
  const fs::path a = test::scratch_dir("cli_gen_a"), b = test::scratch_dir("cli_gen_b");
  const Result ra = run({"gen-data", "--n", "3", "--seed", "5", "--size", "16", "--out", a.string()});
  const Result rb = run({"gen-data", "--n", "3", "--seed", "5", "--size", "16", "--out", b.string()});
  ASSERT_EQ(ra.code, 0) << ra.err;
  const auto line = [](const std::string& s) { return s.substr(s.find("manifest ")); };
  EXPECT_EQ(line(ra.out), line(rb.out));
  EXPECT_EQ(read_text_file(a / "manifest.jsonl"), read_text_file(b / "manifest.jsonl"));
  EXPECT_TRUE(fs::exists(a / "fabric_db" / "db.jsonl"));
  EXPECT_TRUE(fs::exists(a / "run_manifest.json"));
}

TEST(Cli, TrainRejectsUnknownConfigKey) {
  const fs::path dir = test::scratch_dir("cli_badcfg");
  write_text_file(dir / "bad.cfg", "learning_rate=0.1\n");
  const Result r = run({"train", "--config", (dir / "bad.cfg").string(), "--data", fixture().data.string(), "--out",
                        (dir / "run").string()});
  EXPECT_EQ(r.code, cli::kValidation);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos) << r.err;
}

TEST(Cli, TrainWritesRunDirectory) {
  const fs::path run_dir = fixture().run;
  for (const char* f : {"model.hgck", "config.txt", "vocab.tsv", "loss.csv", "fabric_db/db.jsonl", "run_manifest.json"})
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  const cli::LoadedRun loaded = cli::load_run(run_dir);
  EXPECT_EQ(loaded.config.model.image_size, 16u);
  EXPECT_EQ(loaded.config.steps, 3u);
}

TEST(Cli, FabricQueryTrace) {
  const std::string db = (fixture().data / "fabric_db" / "db.jsonl").string();
  const Result known = run({"fabric-db", "query", "--db", db, "--prompt", "blue jeans jacket"});
  ASSERT_EQ(known.code, 0) << known.err;
  EXPECT_NE(known.out.find("denim"), std::string::npos) << known.out;
  const Result none = run({"fabric-db", "query", "--db", db, "--prompt", "blue jacket"});
  ASSERT_EQ(none.code, 0) << none.err;
  EXPECT_EQ(none.out.find("denim"), std::string::npos) << none.out;
  const Result list = run({"fabric-db", "list", "--db", db});
  EXPECT_NE(list.out.find("jeans"), std::string::npos);
}

TEST(Cli, GradcheckFaultInjectionFails) {
  const Result ok = run({"gradcheck", "--module", "hca"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  const Result bad = run({"gradcheck", "--module", "hca", "--inject-fault", "0.01"});
  EXPECT_EQ(bad.code, cli::kNumeric);
  EXPECT_EQ(run({"gradcheck", "--module", "nope"}).code, cli::kValidation);
}

TEST(Cli, SampleWritesImageAndDiagnostics) {
  const fs::path out = test::scratch_dir("cli_sample");
  const Result r = run({"sample", "--ckpt", fixture().run.string(), "--sketch",
                        (fixture().data / "sketch_0000.pgm").string(), "--prompt", "red jeans tshirt", "--seed", "2",
                        "--steps", "50", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("denoiser_evals 50"), std::string::npos) << r.out;
  const Image img = read_netpbm(out / "sample.ppm");
  EXPECT_EQ(img.width(), 16u);
  const auto diag = nlohmann::json::parse(read_text_file(out / "sample_diagnostics.json"));
  EXPECT_TRUE(diag.contains("alpha"));
}

TEST(Cli, SweepProducesOneImagePerAlpha) {
  const fs::path out = test::scratch_dir("cli_sweep");
  const Result r = run({"sweep-alpha", "--ckpt", fixture().run.string(), "--input", fixture().data.string(), "--index",
                        "1", "--grid", "0.6:1.0:0.1", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t images = 0;
  for (const auto& e : fs::directory_iterator(out)) images += e.path().extension() == ".ppm";
  EXPECT_EQ(images, 5u);
  std::istringstream csv(read_text_file(out / "sweep.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line))
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) ++rows;
  EXPECT_EQ(rows, 5u);
}

TEST(Cli, EvalTargetsAgainstThemselves) {
  const fs::path out = test::scratch_dir("cli_eval");
  const std::string data = fixture().data.string();
  const Result r = run({"eval", "--generated-dir", data, "--reference-manifest", data + "/manifest.jsonl", "--out",
                        out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = nlohmann::json::parse(read_text_file(out / "summary.json"));
  const auto& mean = summary.contains("mean") ? summary.at("mean") : summary;
  EXPECT_EQ(mean.at("silhouette_iou").get<double>(), 1.0);
  EXPECT_EQ(mean.at("color_err").get<double>(), 0.0);
  EXPECT_EQ(mean.at("texture_chi2").get<double>(), 0.0);
}

TEST(Cli, EvalReportsMissingAndExtraFiles) {
  const fs::path gen = test::scratch_dir("cli_eval_missing");
  const std::string data = fixture().data.string();
  for (const auto& e : fs::directory_iterator(fixture().data))
    if (e.path().extension() == ".ppm") fs::copy_file(e.path(), gen / e.path().filename());
  fs::remove(gen / "target_0002.ppm");
  const Result missing = run({"eval", "--generated-dir", gen.string(), "--reference-manifest", data + "/manifest.jsonl",
                              "--out", (gen / "o").string()});
  EXPECT_EQ(missing.code, cli::kValidation);
  EXPECT_NE(missing.err.find("target_0002.ppm"), std::string::npos) << missing.err;
  fs::copy_file(fixture().data / "target_0001.ppm", gen / "target_0002.ppm");
  fs::copy_file(fixture().data / "target_0001.ppm", gen / "extra.ppm");
  const Result extra = run({"eval", "--generated-dir", gen.string(), "--reference-manifest", data + "/manifest.jsonl",
                            "--out", (gen / "o").string()});
  EXPECT_EQ(extra.code, cli::kValidation);
}

TEST(Cli, ReplayReportsIdentical) {
  const fs::path out = test::scratch_dir("cli_replay");
  const Result r = run({"sample", "--ckpt", fixture().run.string(), "--sketch",
                        (fixture().data / "sketch_0000.pgm").string(), "--prompt", "blue tshirt", "--seed", "4",
                        "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Result rp = run({"replay", "--manifest", (out / "run_manifest.json").string()});
  EXPECT_EQ(rp.code, 0) << rp.out << rp.err;
  EXPECT_NE(rp.out.find("replay identical"), std::string::npos) << rp.out;
  EXPECT_EQ(rp.out.find("MISMATCH"), std::string::npos);

  // Tampering with an output is detected.
  write_text_file(out / "sample_diagnostics.json", "{}\n");
  const fs::path tampered = test::scratch_dir("cli_replay_tamper");
  auto m = nlohmann::json::parse(read_text_file(out / "run_manifest.json"));
  m["stdout_hash"] = "0000000000000000000000000000000000000000";
  write_text_file(tampered / "m.json", m.dump());
  EXPECT_EQ(run({"replay", "--manifest", (tampered / "m.json").string()}).code, cli::kValidation);
}
