#include "flick/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "flick/ingestion.hpp"
#include "flick/synth.hpp"
#include "json.hpp"
#include "test_paths.hpp"

namespace flick {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "flick");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(slurp(path)); }

/// Small fixture so every run stays well under a second.
fs::path make_fixture(const fs::path& root, double noise = 0.0) {
  const fs::path dir = root / "data";
  const auto r = invoke({"synth", "--out", dir.string(), "--n-unlabeled", "600", "--n-heldout",
                         "150", "--dim", "16", "--noise", std::to_string(noise), "--seed", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir;
}

fs::path write_config(const fs::path& root) {
  const fs::path path = root / "config.json";
  std::ofstream(path) << R"({"profile": "proxy", "hidden_size": 32})";
  return path;
}

TEST(Cli, SynthWritesLoadableFixture) {
  const auto root = testing::scratch_dir();
  const auto dir = make_fixture(root, 0.3);
  const auto labeled = load_labels(dir / synth_files::labeled_labels);
  EXPECT_EQ(labeled.class_count(), 3u);
  EXPECT_EQ(labeled.size(), 100u);
  EXPECT_EQ(load_embeddings(dir / synth_files::unlabeled).size(), 600u);
  EXPECT_EQ(load_embeddings(dir / synth_files::heldout).dim(), 16u);
  EXPECT_EQ(read_json(dir / synth_files::manifest).at("swapped").get<std::size_t>(), 180u);
}

TEST(Cli, RunFlickWritesReport) {
  const auto root = testing::scratch_dir();
  const auto data = make_fixture(root);
  const auto report = root / "report";
  const auto r = invoke({"run", "--data", data.string(), "--out", report.string(), "--config",
                         write_config(root).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("macro"), std::string::npos);
  for (const char* name : {"config.json", "cluster_model.json", "cluster_report.json",
                           "plft_model.json", "final_model.json", "metrics.json", "result.json"}) {
    EXPECT_TRUE(fs::exists(report / name)) << name;
  }
  const auto cluster_report = read_json(report / "cluster_report.json");
  EXPECT_EQ(cluster_report.at("rows").size(), 20u);
  EXPECT_EQ(cluster_report.at("selection").size(), 15u);
  const auto result = read_json(report / "result.json");
  EXPECT_TRUE(result.contains("generated_at"));
  EXPECT_EQ(result.at("mode"), "flick");
}

TEST(Cli, BaselineHasNoClusterArtifacts) {
  const auto root = testing::scratch_dir();
  const auto data = make_fixture(root);
  const auto report = root / "report";
  const auto r = invoke({"run", "--data", data.string(), "--out", report.string(), "--mode",
                         "baseline", "--config", write_config(root).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(fs::exists(report / "cluster_model.json"));
  EXPECT_FALSE(fs::exists(report / "cluster_report.json"));
  EXPECT_FALSE(fs::exists(report / "plft_model.json"));
  EXPECT_TRUE(fs::exists(report / "metrics.json"));
}

TEST(Cli, RunIsIdempotentApartFromTimestamp) {
  const auto root = testing::scratch_dir();
  const auto data = make_fixture(root);
  const auto cfg = write_config(root);
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(invoke({"run", "--data", data.string(), "--out", (root / out).string(), "--config",
                      cfg.string(), "--seed", "11"})
                  .code,
              0);
  }
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const auto name = entry.path().filename();
    if (name == "result.json") {
      auto a = read_json(root / "a" / name);
      auto b = read_json(root / "b" / name);
      a.erase("generated_at");
      b.erase("generated_at");
      EXPECT_EQ(a, b);
    } else {
      EXPECT_EQ(slurp(entry.path()), slurp(root / "b" / name)) << name;
    }
  }
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = invoke({"run", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(invoke({}).code, 2); }

TEST(Cli, HelpSucceeds) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("run"), std::string::npos);
}

TEST(Cli, MalformedEmbeddingsIsDataExit) {
  const auto root = testing::scratch_dir();
  std::ofstream(root / "bad.flke") << "NOPE";
  const auto r = invoke({"cluster", "--embeddings", (root / "bad.flke").string(), "--out",
                         (root / "out").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("format"), std::string::npos);
}

TEST(Cli, InvalidConfigValueIsArgumentExit) {
  const auto root = testing::scratch_dir();
  const auto data = make_fixture(root);
  const auto r = invoke({"run", "--data", data.string(), "--out", (root / "r").string(), "--k",
                         "0"});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, DivergentTrainingIsNumericExit) {
  const auto root = testing::scratch_dir();
  const auto data = make_fixture(root);
  std::ofstream(root / "hot.json") << R"({"clsft_train": {"learning_rate": 1e300}, "hidden_size": 8})";
  const auto r = invoke({"train", "--embeddings", (data / synth_files::labeled).string(),
                         "--labels", (data / synth_files::labeled_labels).string(), "--out",
                         (root / "m").string(), "--config", (root / "hot.json").string()});
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("epoch"), std::string::npos);
}

TEST(Cli, StagewiseSubcommandsChain) {
  const auto root = testing::scratch_dir();
  const auto data = make_fixture(root);
  const auto cfg = write_config(root).string();
  const auto unlabeled = (data / synth_files::unlabeled).string();

  auto r = invoke({"cluster", "--embeddings", unlabeled, "--out", (root / "c").string(), "--k",
                   "6", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_labels(root / "c" / "pseudo_labels.jsonl").size(), 600u);

  r = invoke({"refine", "--embeddings", unlabeled, "--cluster-model",
              (root / "c" / "cluster_model.json").string(), "--out", (root / "r").string(),
              "--k-top", "4", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto refined = load_labels(root / "r" / "refined_labels.jsonl");
  EXPECT_EQ(refined.class_count(), 4u);
  EXPECT_EQ(read_json(root / "r" / "cluster_report.json").at("selection").size(), 4u);

  r = invoke({"train", "--embeddings", unlabeled, "--labels",
              (root / "r" / "refined_labels.jsonl").string(), "--stage", "plft", "--out",
              (root / "p").string(), "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json(root / "p" / "model.json").at("c").get<std::size_t>(), 4u);

  r = invoke({"train", "--embeddings", (data / synth_files::labeled).string(), "--labels",
              (data / synth_files::labeled_labels).string(), "--init-from",
              (root / "p" / "model.json").string(), "--out", (root / "f").string(), "--config",
              cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto plft = read_json(root / "p" / "model.json");
  const auto final_model = read_json(root / "f" / "model.json");
  EXPECT_EQ(final_model.at("c").get<std::size_t>(), 3u);
  EXPECT_EQ(final_model.at("W1").size(), plft.at("W1").size());

  r = invoke({"eval", "--model", (root / "f" / "model.json").string(), "--embeddings",
              (data / synth_files::heldout).string(), "--labels",
              (data / synth_files::heldout_labels).string(), "--out", (root / "e").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = read_json(root / "e" / "metrics.json");
  EXPECT_GE(metrics.at("accuracy").get<double>(), 0.0);
  EXPECT_LE(metrics.at("accuracy").get<double>(), 1.0);
}

}  // namespace
}  // namespace flick
