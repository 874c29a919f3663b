#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "newsvec/pipeline.hpp"

using namespace newsvec;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

PipelineConfig small_config(const fs::path& root) {
  PipelineConfig c;
  c.set("paths.synth_dir", (root / "data").string());
  c.set("paths.corpus", (root / "data/corpus.jsonl").string());
  c.set("paths.returns", (root / "data/returns.csv").string());
  c.set("paths.lexicon_positive", (root / "data/positive.txt").string());
  c.set("paths.lexicon_negative", (root / "data/negative.txt").string());
  c.set("paths.artifacts", (root / "artifacts").string());
  c.set("synth.docs_per_topic", "40");
  c.set("walk.length", "20");
  c.set("walk.walks_per_node", "2");
  c.set("embed.dim", "8");
  c.set("embed.epochs", "1");
  c.set("embed.window", "3");
  c.set("swarch.starts", "2");
  c.set("samples.window", "5");
  c.set("predictor.attention_size", "4");
  c.set("predictor.news_hidden", "4");
  c.set("predictor.market_hidden", "4");
  c.set("predictor.epochs", "2");
  return c;
}

}  // namespace

TEST_CASE("config defaults, overrides and validation") {
  PipelineConfig c;
  CHECK(c.get_size("walk.length") == 100);
  CHECK(c.get_size("embed.window") == 10);
  CHECK(c.get_double("walk.p") == 1.0);
  CHECK(c.get_size("embed.dim") == 128);
  CHECK(c.get_size("samples.window") == 20);
  CHECK(c.seed() == 1);
  c.set_assignment("walk.q=0.5");
  CHECK(c.walk().q == 0.5);
  CHECK(kind_of([&] { c.set("walk.nope", "1"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { c.set_assignment("walk.q"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { c.get_size("walk.q"); }) == ErrorKind::InvalidArgument);
  c.set("walk.p", "-1");
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
  c.set("walk.p", "1");
  c.set("predictor.use_news", "maybe");
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("ini files and hashing") {
  const auto dir = fs::temp_directory_path() / "newsvec_pipeline_ini";
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "a.ini");
    f << "; comment\n[global]\nseed = 9\n[walk]\np = 4\n";
  }
  PipelineConfig c;
  c.load_ini(dir / "a.ini");
  CHECK(c.seed() == 9);
  CHECK(c.walk().p == 4.0);
  {
    std::ofstream f(dir / "bad.ini");
    f << "seed = 9\n";
  }
  CHECK(kind_of([&] { PipelineConfig().load_ini(dir / "bad.ini"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { PipelineConfig().load_ini(dir / "missing.ini"); }) == ErrorKind::InvalidArgument);

  PipelineConfig base;
  const auto h = base.hash();
  CHECK(h.size() == 64);
  auto other = base;
  other.set("paths.artifacts", "/elsewhere");
  other.set("global.threads", "4");
  other.set("eval.lookahead", "3");
  CHECK(other.hash() == h);
  other.set("walk.q", "2");
  CHECK(other.hash() != h);
  other = base;
  other.set("global.seed", "2");
  CHECK(other.hash() != h);
  fs::remove_all(dir);
}

TEST_CASE("helpers: digests and binomial interval") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto [lo, hi] = binomial_interval(50, 100);
  CHECK(lo == doctest::Approx(0.3983).epsilon(1e-3));
  CHECK(hi == doctest::Approx(0.6017).epsilon(1e-3));
  const auto [lo0, hi0] = binomial_interval(0, 10);
  CHECK(lo0 == 0.0);
  CHECK(hi0 == doctest::Approx(0.3085).epsilon(1e-3));
  CHECK(binomial_interval(10, 10).second == 1.0);
}

TEST_CASE("stages report missing inputs and unknown names") {
  const auto root = fs::temp_directory_path() / "newsvec_pipeline_missing";
  fs::remove_all(root);
  const auto c = small_config(root);
  CHECK(kind_of([&] { run_stage("graph", c); }) == ErrorKind::MissingArtifact);
  CHECK(kind_of([&] { run_stage("evaluate", c); }) == ErrorKind::MissingArtifact);
  CHECK(kind_of([&] { run_stage("tfidf", c); }) == ErrorKind::MissingArtifact);
  CHECK(kind_of([&] { run_stage("bogus", c); }) == ErrorKind::InvalidArgument);
  CHECK(stage_names().size() == 13);
  fs::remove_all(root);
}

TEST_CASE("small pipeline runs and evaluate guards the config hash") {
  const auto root = fs::temp_directory_path() / "newsvec_pipeline_run";
  fs::remove_all(root);
  auto c = small_config(root);
  for (const auto& stage : stage_names()) {
    if (stage == "synth") continue;
    if (stage == "tfidf") run_stage("synth", c);
    CAPTURE(stage);
    const auto r = run_stage(stage, c);
    CHECK(r.stage == stage);
    for (const auto& out : r.outputs) CHECK(fs::exists(out));
    CHECK(fs::exists(c.artifact(stage + ".manifest.json")));
  }
  std::ifstream mf(c.artifact("evaluate.manifest.json"));
  const auto manifest = nlohmann::json::parse(mf);
  CHECK(manifest["config_hash"] == c.hash());
  CHECK(manifest["seed"] == 1);
  CHECK(manifest["inputs"].size() >= 1);

  std::ifstream metrics_in(c.artifact("metrics.json"));
  const auto metrics = nlohmann::json::parse(metrics_in);
  CHECK(metrics.contains("accuracy"));
  CHECK(metrics.contains("mcc"));

  // A changed setting invalidates the trained model unless forced.
  auto changed = c;
  changed.set("walk.p", "2");
  CHECK(kind_of([&] { run_stage("evaluate", changed); }) == ErrorKind::ConfigMismatch);
  CHECK_NOTHROW(run_stage("evaluate", changed, {true}));

  // Evaluation-only settings do not.
  auto lookahead = c;
  lookahead.set("eval.lookahead", "3");
  CHECK_NOTHROW(run_stage("evaluate", lookahead));

  fs::remove(c.artifact("model.bin"));
  CHECK(kind_of([&] { run_stage("evaluate", c); }) == ErrorKind::MissingArtifact);
  fs::remove_all(root);
}
