#include "commands.hpp"

#include <csignal>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "themescreen/ablation.hpp"
#include "themescreen/corpus.hpp"
#include "themescreen/digest.hpp"
#include "themescreen/eval.hpp"
#include "themescreen/features.hpp"
#include "themescreen/io.hpp"
#include "themescreen/parallel.hpp"
#include "themescreen/pipeline.hpp"
#include "themescreen/service.hpp"
#include "themescreen/train.hpp"

#ifndef THEMESCREEN_VERSION
#define THEMESCREEN_VERSION "0.0.0"
#endif

namespace themescreen::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path require(const Context& ctx, const char* name, const std::string& stage) {
  const fs::path p = ctx.run_dir / name;
  if (!fs::exists(p)) throw MissingArtifact(stage, p);
  return p;
}

void echo_config(const Context& ctx) {
  const json echo{{"command", ctx.command},
                  {"version", THEMESCREEN_VERSION},
                  {"config", ctx.config.values()}};
  write_text_file(ctx.run_dir / "config" / (ctx.command + ".json"), echo.dump(2) + "\n");
}

gateway::BackendConfig backend_for(const Context& ctx) {
  auto b = ctx.config.backend_config();
  if (!b.cache_dir) b.cache_dir = ctx.run_dir / "llm-cache";
  b.validate();
  return b;
}

ticl::InContextTemplate extraction_template(const Context& ctx) {
  const auto path = ctx.config.at("gateway.ticl_template").get<std::string>();
  return path.empty() ? ticl::InContextTemplate::builtin() : ticl::InContextTemplate::load(path);
}

itas::FeedbackPrompt feedback_prompt(const Context& ctx) {
  const auto path = ctx.config.at("gateway.feedback_prompt").get<std::string>();
  return path.empty() ? itas::FeedbackPrompt::builtin() : itas::FeedbackPrompt::load(path);
}

std::vector<features::SessionFeatures> load_features(const Context& ctx) {
  return features::load_features(require(ctx, artifact::kFeatures, "embed"));
}

model::DetectionModel load_model(const fs::path& path) {
  return model::DetectionModel::from_checkpoint(numeric::load_checkpoint(path));
}

std::vector<features::SessionFeatures> by_split(std::span<const features::SessionFeatures> all, corpus::Split s) {
  std::vector<features::SessionFeatures> out;
  for (const auto& f : all) {
    if (f.split == s) out.push_back(f);
  }
  return out;
}

// eval.sessions when given, otherwise every session in eval.split ("all" for everything).
template <class T>
std::vector<T> selected(const Context& ctx, std::span<const T> all) {
  const auto ids = ctx.config.at("eval.sessions").get<std::vector<std::string>>();
  std::vector<T> out;
  if (!ids.empty()) {
    for (const auto& id : ids) {
      auto it = std::find_if(all.begin(), all.end(), [&](const T& x) { return x.session_id == id; });
      if (it == all.end()) throw ConfigError("eval.sessions: no session named " + id);
      out.push_back(*it);
    }
    return out;
  }
  const auto name = ctx.config.at("eval.split").get<std::string>();
  if (name == "all") return {all.begin(), all.end()};
  const auto split = corpus::parse_split(name);
  if (!split) throw ConfigError("eval.split must be train, dev, test or all, got " + name);
  for (const auto& x : all) {
    if (x.split == *split) out.push_back(x);
  }
  return out;
}

ThemeArray<double> parse_scores(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("--scores must be a JSON object of theme scores");
  ThemeArray<double> s{};
  for (ThemeId t : kAllThemes) {
    const auto it = j.find(std::string(theme_name(t)));
    if (it == j.end() || !it->is_number()) {
      throw ConfigError("--scores is missing a number for " + std::string(theme_name(t)));
    }
    s[index_of(t)] = it->get<double>();
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!parse_theme(it.key())) throw ConfigError("--scores has unknown theme " + it.key());
  }
  itas::check_scores(s);
  return s;
}

void log_gateway(const gateway::Gateway& g) {
  const auto s = g.stats();
  spdlog::info("gateway {}: {} backend chat calls, {} cache hits, {} embed calls", g.backend_id(),
               s.backend_chat_calls, s.cache_hits, s.backend_embed_calls);
}

}  // namespace

void generate_corpus(const Context& ctx) {
  const auto input = ctx.config.at("corpus.input").get<std::string>();
  const auto fractions = ctx.config.split_fractions();
  json manifest;
  std::vector<corpus::Transcript> sessions;
  if (input.empty()) {
    const auto spec = ctx.config.synthetic_spec();
    spec.validate();
    sessions = corpus::generate_synthetic(spec);
    manifest["source"] = "synthetic";
    manifest["spec"] = spec.to_json();
    manifest["spec_hash"] = sha256_hex(spec.to_json().dump());
  } else {
    sessions = corpus::load_transcripts(input);
    manifest["source"] = input;
    manifest["input_sha256"] = sha256_hex(read_text_file(input));
  }
  const bool presplit = std::all_of(sessions.begin(), sessions.end(),
                                    [](const auto& t) { return t.split != corpus::Split::kUnassigned; });
  if (!presplit) sessions = corpus::split_corpus(std::move(sessions), fractions, ctx.config.split_seed());

  const std::string jsonl = corpus::to_jsonl(sessions);
  write_text_file(ctx.run_dir / artifact::kCorpus, jsonl);

  json counts = json::object();
  for (auto s : {corpus::Split::kTrain, corpus::Split::kDev, corpus::Split::kTest}) {
    std::size_t n = 0, pos = 0;
    for (const auto& t : sessions) {
      if (t.split != s) continue;
      ++n;
      pos += t.label.value_or(0) == 1;
    }
    counts[std::string(corpus::split_name(s))] = {{"sessions", n}, {"depressed", pos}};
  }
  manifest["sessions"] = sessions.size();
  manifest["split"] = {{"fractions", {fractions.train, fractions.dev, fractions.test}},
                       {"seed", ctx.config.split_seed()},
                       {"presplit", presplit},
                       {"counts", counts}};
  manifest["corpus_sha256"] = sha256_hex(jsonl);
  write_text_file(ctx.run_dir / artifact::kManifest, manifest.dump(2) + "\n");
  spdlog::info("wrote {} sessions to {}", sessions.size(), (ctx.run_dir / artifact::kCorpus).string());
}

void extract(const Context& ctx) {
  const auto sessions = corpus::load_transcripts(require(ctx, artifact::kCorpus, "generate-corpus"));
  const auto b = backend_for(ctx);
  gateway::Gateway gw(b);
  const auto tmpl = extraction_template(ctx);
  const auto prompt = feedback_prompt(ctx);
  const int er = ctx.config.extraction_retries();
  const int fr = ctx.config.feedback_retries();

  std::vector<features::ThemeRecord> records(sessions.size());
  parallel_for(sessions.size(), b.parallelism, [&](std::size_t i) {
    records[i] = features::extract_record(sessions[i], tmpl, prompt, gw, er, fr);
  });
  std::size_t fallbacks = 0, feedback_fallbacks = 0;
  for (const auto& r : records) {
    fallbacks += r.extraction_fallback;
    feedback_fallbacks += r.feedback.fallback;
  }
  features::save_theme_records(ctx.run_dir / artifact::kThemes, records);
  log_gateway(gw);
  spdlog::info("extracted themes for {} sessions ({} extraction fallbacks, {} feedback fallbacks)", records.size(),
               fallbacks, feedback_fallbacks);
}

void embed(const Context& ctx) {
  const auto records = features::load_theme_records(require(ctx, artifact::kThemes, "extract"));
  const auto b = backend_for(ctx);
  gateway::Gateway gw(b);
  std::vector<features::SessionFeatures> out(records.size());
  parallel_for(records.size(), b.parallelism, [&](std::size_t i) { out[i] = features::embed_record(records[i], gw); });
  features::save_features(ctx.run_dir / artifact::kFeatures, out);
  log_gateway(gw);
  spdlog::info("embedded {} sessions", out.size());
}

void train(const Context& ctx) {
  const auto all = load_features(ctx);
  const auto config = ctx.config.train_config();
  const auto train_set = by_split(all, corpus::Split::kTrain);
  const auto dev_set = by_split(all, corpus::Split::kDev);
  if (train_set.empty()) throw Error("no train-split sessions in " + (ctx.run_dir / artifact::kFeatures).string());
  if (dev_set.empty()) throw Error("no dev-split sessions in " + (ctx.run_dir / artifact::kFeatures).string());

  auto result = train::train(train_set, dev_set, config);
  numeric::save_checkpoint(ctx.run_dir / artifact::kCheckpoint, result.model.to_checkpoint());
  write_text_file(ctx.run_dir / artifact::kTrainLog, train::epoch_log_csv(result.log));
  const auto& best = result.log[result.best_epoch];
  spdlog::info("best epoch {}: dev WA-F1 {:.4f}, dev loss {:.4f}", result.best_epoch, best.dev.wa_f1, best.dev_loss);
}

void evaluate(const Context& ctx) {
  const auto m = load_model(require(ctx, artifact::kCheckpoint, "train"));
  const auto all = load_features(ctx);
  const auto sessions = selected<features::SessionFeatures>(ctx, all);
  if (sessions.empty()) throw Error("no sessions selected for evaluation");
  const auto ev = train::evaluate(m, sessions);

  std::ostringstream csv;
  csv << "split," << eval::metrics_csv_header() << "\n";
  csv << ctx.config.at("eval.split").get<std::string>() << "," << eval::metrics_csv_row(ev.metrics) << "\n";
  write_text_file(ctx.run_dir / artifact::kMetrics, csv.str());
  json mj = eval::to_json(ev.metrics);
  mj["sessions"] = sessions.size();
  mj["loss"] = ev.loss;
  write_text_file(ctx.run_dir / artifact::kMetricsJson, mj.dump(2) + "\n");

  std::string lines;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& p = ev.predictions[i];
    lines += json{{"session_id", sessions[i].session_id},
                  {"label", sessions[i].label ? json(*sessions[i].label) : json(nullptr)},
                  {"predicted", p.label},
                  {"probability", p.probability}}
                 .dump() +
             "\n";
  }
  write_text_file(ctx.run_dir / artifact::kPredictions, lines);
  spdlog::info("{} sessions: accuracy {:.4f}, WA-F1 {:.4f}, G-mean {:.4f}", sessions.size(), ev.metrics.accuracy,
               ev.metrics.wa_f1, ev.metrics.g_mean);
}

void ablate(const Context& ctx) {
  const auto all = load_features(ctx);
  const auto base = ctx.config.train_config();
  const auto rows = ablation::run_ablations(by_split(all, corpus::Split::kTrain), by_split(all, corpus::Split::kDev),
                                            by_split(all, corpus::Split::kTest), base);
  write_text_file(ctx.run_dir / artifact::kAblationCsv, ablation::to_csv(rows));
  write_text_file(ctx.run_dir / artifact::kAblationMd, ablation::to_markdown(rows));
  for (const auto& r : rows) spdlog::info("{:<16} WA-F1 {:.4f} (seed {})", r.name, r.test.wa_f1, r.seed);
}

void predict(const Context& ctx, const PredictArgs& args) {
  const auto m = load_model(require(ctx, artifact::kCheckpoint, "train"));
  std::vector<corpus::Transcript> sessions;
  if (args.input) {
    sessions = corpus::load_transcripts(*args.input);
  } else {
    const auto all = corpus::load_transcripts(require(ctx, artifact::kCorpus, "generate-corpus"));
    sessions = selected<corpus::Transcript>(ctx, all);
  }
  const auto tmpl = extraction_template(ctx);
  const auto prompt = feedback_prompt(ctx);
  pipeline::PredictOptions opts;
  opts.extraction_template = &tmpl;
  opts.feedback_prompt = &prompt;
  opts.extraction_retries = ctx.config.extraction_retries();
  opts.feedback_retries = ctx.config.feedback_retries();
  if (args.scores) opts.override_scores = parse_scores(*args.scores);

  const auto b = backend_for(ctx);
  gateway::Gateway gw(b);
  std::vector<json> out(sessions.size());
  parallel_for(sessions.size(), b.parallelism, [&](std::size_t i) {
    out[i] = pipeline::prediction_json(pipeline::predict(sessions[i], m, gw, opts), false);
  });
  std::string lines;
  for (const auto& j : out) {
    lines += j.dump() + "\n";
    std::cout << j.at("session_id").get<std::string>() << "\t" << j.at("label").get<int>() << "\t"
              << j.at("probability").get<double>() << (j.at("degraded").get<bool>() ? "\tdegraded" : "") << "\n";
  }
  write_text_file(ctx.run_dir / "predict.jsonl", lines);
}

void figures(const Context& ctx) {
  const auto m = load_model(require(ctx, artifact::kCheckpoint, "train"));
  const auto all = load_features(ctx);
  const auto sessions = selected<features::SessionFeatures>(ctx, all);
  for (const auto& f : sessions) {
    const auto a = pipeline::analyze(m, f);
    write_text_file(ctx.run_dir / artifact::kFigures / (f.session_id + ".json"), a.figures.dump(2) + "\n");
  }
  spdlog::info("wrote {} figure bundles to {}", sessions.size(), (ctx.run_dir / artifact::kFigures).string());
}

namespace {
service::HttpServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

void serve(const Context& ctx) {
  const auto settings = ctx.config.service_settings();
  std::optional<model::DetectionModel> m;
  fs::path ckpt = settings.checkpoint;
  if (ckpt.empty() && fs::exists(ctx.run_dir / artifact::kCheckpoint)) ckpt = ctx.run_dir / artifact::kCheckpoint;
  if (!ckpt.empty()) {
    m = load_model(ckpt);
  } else {
    spdlog::warn("no checkpoint configured; pipeline and what-if requests will answer 409");
  }
  service::ServiceOptions opts;
  opts.data_dir = settings.data_dir;
  opts.extraction_template = extraction_template(ctx);
  opts.feedback_prompt = feedback_prompt(ctx);
  opts.extraction_retries = ctx.config.extraction_retries();
  opts.feedback_retries = ctx.config.feedback_retries();
  auto gw = std::make_shared<gateway::Gateway>(backend_for(ctx));
  service::SessionService svc(std::move(opts), gw, std::move(m));
  service::HttpServer server(svc, settings.cors_origin);
  const int port = server.bind(settings.host, settings.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("listening on http://{}:{}", settings.host, port);
  server.listen();
  g_server = nullptr;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Theme-based depression screening pipeline", "themescreen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", THEMESCREEN_VERSION);

  std::string config_path;
  std::vector<std::string> sets;
  std::string run_dir = "run";
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  PredictArgs predict_args;
  std::string input_path, scores;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override one setting, e.g. train.epochs=10 (repeatable)");
  app.add_option("--run-dir", run_dir, "Directory holding the stage artifacts")->capture_default_str();
  app.add_option("--seed", seed, "Training seed (train.seed)");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"generate-corpus", "Write the synthetic (or imported) corpus and its manifest"},
      {"extract", "Extract themes and feedback scores with the LLM gateway"},
      {"embed", "Embed theme texts"},
      {"train", "Train the detection model"},
      {"evaluate", "Compute metrics on the evaluation split"},
      {"ablate", "Train and evaluate the eight ablation variants"},
      {"predict", "Run the full pipeline on transcripts"},
      {"figures", "Export attention and weight figure data"},
      {"serve", "Start the REST service"},
  };
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->fallthrough();
    if (std::string_view(c.name) == "predict") {
      sub->add_option("--input", input_path, "Transcript JSONL (defaults to the run's corpus)")
          ->check(CLI::ExistingFile);
      sub->add_option("--scores", scores, "Clinician scores as a JSON object");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  Context ctx;
  ctx.run_dir = run_dir;
  ctx.command = app.get_subcommands().front()->get_name();
  if (!input_path.empty()) predict_args.input = input_path;
  if (!scores.empty()) predict_args.scores = scores;

  try {
    if (!config_path.empty()) ctx.config.merge_file(config_path);
    for (const auto& s : sets) ctx.config.set(s);
    if (seed) ctx.config.set("train.seed", *seed);
    ctx.config.train_config();
    ctx.config.backend_config();
  } catch (const UnknownConfigKey& e) {
    std::cerr << "error: unknown config key " << e.key() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    fs::create_directories(ctx.run_dir);
    echo_config(ctx);
    const auto& c = ctx.command;
    if (c == "generate-corpus") generate_corpus(ctx);
    else if (c == "extract") extract(ctx);
    else if (c == "embed") embed(ctx);
    else if (c == "train") train(ctx);
    else if (c == "evaluate") evaluate(ctx);
    else if (c == "ablate") ablate(ctx);
    else if (c == "predict") predict(ctx, predict_args);
    else if (c == "figures") figures(ctx);
    else if (c == "serve") serve(ctx);
    return kOk;
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace themescreen::cli
