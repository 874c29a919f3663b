#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "newsvec/corpus.hpp"
#include "newsvec/predictor.hpp"
#include "newsvec/samples.hpp"
#include "newsvec/subnode.hpp"
#include "newsvec/swarch.hpp"
#include "newsvec/synth.hpp"
#include "newsvec/walk.hpp"

namespace newsvec {

/// Flat `section.key -> value` settings. Every key has a default; unknown
/// keys are rejected. Files use INI syntax (`[section]`, `key = value`).
class PipelineConfig {
 public:
  PipelineConfig();

  void load_ini(const std::filesystem::path& path);
  /// `section.key=value` override.
  void set(const std::string& key, const std::string& value);
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  std::uint64_t seed() const;
  std::size_t threads() const;
  std::filesystem::path path(const std::string& key) const;
  std::filesystem::path artifact(const std::string& name) const;

  /// SHA-256 over every setting that can change an artifact (everything but
  /// paths, thread count and evaluation-only settings).
  std::string hash() const;
  std::string to_json() const;
  /// Builds every module configuration once so bad values fail early.
  void validate() const;

  TokenizerConfig tokenizer() const;
  FeatureConfig features() const;
  WalkConfig walk() const;
  TrainConfig embedding() const;
  FitConfig swarch() const;
  SampleOptions samples() const;
  Labeler labeler(const std::vector<int>& crisis = {}) const;
  PredictorConfig predictor(std::size_t news_dim, std::size_t num_classes) const;
  SynthConfig synth() const;

 private:
  std::map<std::string, std::string> values_;
};

struct StageOptions {
  /// Accept artifacts whose recorded config hash differs from the current one.
  bool force = false;
};

struct StageReport {
  std::string stage;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string info_json = "{}";
  double seconds = 0.0;
};

const std::vector<std::string>& stage_names();

/// Runs one stage and writes `<artifacts>/<stage>.manifest.json` (or
/// `<synth_dir>/synth.manifest.json`). Throws Error on failure.
StageReport run_stage(const std::string& stage, const PipelineConfig& config,
                      const StageOptions& options = {});

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

/// Two-sided Clopper-Pearson interval for `successes` out of `trials`.
std::pair<double, double> binomial_interval(std::size_t successes, std::size_t trials,
                                            double confidence = 0.95);

}  // namespace newsvec
