// Stage-by-stage pipeline driver. See README.md for the exit codes.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "newsvec/pipeline.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kMissingArtifact = 3,
  kInvalidData = 4,
  kNumerical = 5,
  kConfigMismatch = 6,
  kIo = 7,
};

int exit_code(newsvec::ErrorKind kind) {
  using newsvec::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidArgument: return kConfig;
    case ErrorKind::MissingArtifact: return kMissingArtifact;
    case ErrorKind::InvalidData: return kInvalidData;
    case ErrorKind::Numerical: return kNumerical;
    case ErrorKind::ConfigMismatch: return kConfigMismatch;
    case ErrorKind::Io: return kIo;
  }
  return kInternal;
}

int report_error(const std::string& stage, const std::string& kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["stage"] = stage;
  j["message"] = message;
  j["exit_code"] = code;
  std::cerr << j.dump() << '\n';
  return code;
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> artifacts;
  std::vector<std::string> sets;
  bool force = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"newsvec: news embedding and market prediction pipeline"};
  app.require_subcommand(1);
  Flags flags;

  std::vector<std::pair<std::string, CLI::App*>> subs;
  const std::map<std::string, std::string> help = {
      {"tfidf", "score corpus terms and select element vocabulary"},
      {"graph", "build and prune the news/element network"},
      {"walk", "sample biased random walks"},
      {"train-embed", "train feature embeddings over the walks"},
      {"embed", "compose vectors for news in the network"},
      {"infer", "compose vectors for news outside the network"},
      {"fit-swarch", "fit the regime-switching model and filter the returns"},
      {"label", "label trading days for the configured task"},
      {"build-samples", "assemble windowed prediction samples"},
      {"train-predict", "train the attention-LSTM predictor"},
      {"evaluate", "score the predictor on the test split"},
      {"attention-export", "export per-news attention weights"},
      {"synth", "generate a synthetic corpus and market"},
  };
  for (const auto& name : newsvec::stage_names()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", flags.config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "global seed");
    sub->add_option("--threads", flags.threads, "worker threads (1 = reproducible)")->check(CLI::PositiveNumber);
    sub->add_option("--artifacts", flags.artifacts, "artifact directory (paths.artifacts)");
    sub->add_option("--set", flags.sets, "override a setting: section.key=value")->take_all();
    sub->add_flag("--force", flags.force, "accept artifacts produced under a different config hash");
    subs.emplace_back(name, sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("", "usage", e.what(), kConfig);
  }

  std::string stage;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) stage = name;

  try {
    newsvec::PipelineConfig cfg;
    if (!flags.config.empty()) cfg.load_ini(flags.config);
    for (const auto& s : flags.sets) cfg.set_assignment(s);
    if (flags.seed) cfg.set("global.seed", std::to_string(*flags.seed));
    if (flags.threads) cfg.set("global.threads", std::to_string(*flags.threads));
    if (flags.artifacts) cfg.set("paths.artifacts", *flags.artifacts);

    const auto r = newsvec::run_stage(stage, cfg, {flags.force});
    nlohmann::ordered_json out;
    out["stage"] = r.stage;
    out["seconds"] = r.seconds;
    out["outputs"] = nlohmann::ordered_json::array();
    for (const auto& p : r.outputs) out["outputs"].push_back(p.string());
    out["info"] = nlohmann::ordered_json::parse(r.info_json);
    std::cout << out.dump() << '\n';
    return kOk;
  } catch (const newsvec::Error& e) {
    return report_error(stage, newsvec::to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error(stage, "internal", e.what(), kInternal);
  }
}
