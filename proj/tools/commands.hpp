#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "themescreen/config.hpp"
#include "themescreen/errors.hpp"

namespace themescreen::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,            // bad flags, unknown or ill-typed config key
  kMissingArtifact = 3,  // an earlier stage has not been run in this run dir
};

class MissingArtifact : public Error {
 public:
  MissingArtifact(std::string stage, const std::filesystem::path& path)
      : Error("missing " + path.string() + "; run the '" + stage + "' stage first"), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct Context {
  RunConfig config;
  std::filesystem::path run_dir = "run";
  std::string command;
};

// File names inside a run directory.
namespace artifact {
inline constexpr const char* kCorpus = "corpus.jsonl";
inline constexpr const char* kManifest = "corpus_manifest.json";
inline constexpr const char* kThemes = "themes.jsonl";
inline constexpr const char* kFeatures = "features.jsonl";
inline constexpr const char* kCheckpoint = "checkpoint.json";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kMetricsJson = "metrics.json";
inline constexpr const char* kPredictions = "predictions.jsonl";
inline constexpr const char* kAblationCsv = "ablation.csv";
inline constexpr const char* kAblationMd = "ablation.md";
inline constexpr const char* kFigures = "figures";
}  // namespace artifact

void generate_corpus(const Context& ctx);
void extract(const Context& ctx);
void embed(const Context& ctx);
void train(const Context& ctx);
void evaluate(const Context& ctx);
void ablate(const Context& ctx);

struct PredictArgs {
  std::optional<std::filesystem::path> input;  // transcripts JSONL; run dir corpus when absent
  std::optional<std::string> scores;           // JSON object of clinician scores
};
void predict(const Context& ctx, const PredictArgs& args);
void figures(const Context& ctx);
void serve(const Context& ctx);

// Parses argv, runs one command and maps failures to exit codes.
int run(int argc, const char* const* argv);

}  // namespace themescreen::cli
