#include "themescreen/features.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "themescreen/digest.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/io.hpp"

namespace themescreen::features {

using nlohmann::json;
using numeric::Matrix;

namespace {

json meta_json(const std::string& id, const std::optional<int>& label, corpus::Split split) {
  json j{{"session_id", id}, {"label", label ? json(*label) : json(nullptr)}};
  if (split != corpus::Split::kUnassigned) j["split"] = corpus::split_name(split);
  return j;
}

void read_meta(const json& j, std::string& id, std::optional<int>& label, corpus::Split& split) {
  id = j.at("session_id").get<std::string>();
  if (j.contains("label") && !j["label"].is_null()) label = j["label"].get<int>();
  if (j.contains("split")) {
    auto s = corpus::parse_split(j["split"].get<std::string>());
    if (!s) throw ParseError("unknown split " + j["split"].dump());
    split = *s;
  }
}

template <class T, class F>
void save_jsonl(const std::filesystem::path& path, std::span<const T> items, F&& to) {
  std::string out;
  for (const auto& item : items) out += to(item).dump() + "\n";
  write_text_file(path, out);
}

template <class F>
auto load_jsonl(const std::filesystem::path& path, F&& from) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<decltype(from(json{}))> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from(json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

ThemeArray<Matrix> SessionFeatures::matrices() const {
  ThemeArray<Matrix> m;
  for (std::size_t i = 0; i < kThemeCount; ++i) m[i] = embeddings[i].values;
  return m;
}

json to_json(const ThemeRecord& r) {
  json j = meta_json(r.session_id, r.label, r.split);
  j["themes"] = ticl::to_json(r.themes)["themes"];
  j["feedback"] = itas::to_json(r.feedback);
  j["extraction"] = {{"attempts", r.extraction_attempts}, {"fallback", r.extraction_fallback}};
  return j;
}

ThemeRecord theme_record_from_json(const json& j) {
  ThemeRecord r;
  read_meta(j, r.session_id, r.label, r.split);
  r.themes = ticl::theme_set_from_json({{"session_id", r.session_id}, {"themes", j.at("themes")}});
  r.feedback = itas::feedback_from_json(j.at("feedback"));
  if (j.contains("extraction")) {
    r.extraction_attempts = j["extraction"].value("attempts", 0);
    r.extraction_fallback = j["extraction"].value("fallback", false);
  }
  return r;
}

json to_json(const SessionFeatures& f) {
  json j = meta_json(f.session_id, f.label, f.split);
  j["backend_id"] = f.backend_id;
  j["themes"] = ticl::to_json(f.themes)["themes"];
  j["feedback"] = itas::to_json(f.feedback);
  json emb = json::object();
  for (ThemeId id : kAllThemes) {
    const auto& e = f.embeddings[index_of(id)];
    emb[std::string(theme_name(id))] = {{"tokens", e.tokens},
                                        {"rows", e.values.rows()},
                                        {"cols", e.values.cols()},
                                        {"data", encode_f64_le(e.values.values())}};
  }
  j["embeddings"] = std::move(emb);
  return j;
}

SessionFeatures session_features_from_json(const json& j) {
  SessionFeatures f;
  read_meta(j, f.session_id, f.label, f.split);
  f.backend_id = j.value("backend_id", std::string());
  f.themes = ticl::theme_set_from_json({{"session_id", f.session_id}, {"themes", j.at("themes")}});
  f.feedback = itas::feedback_from_json(j.at("feedback"));
  for (ThemeId id : kAllThemes) {
    const json& e = j.at("embeddings").at(std::string(theme_name(id)));
    auto& out = f.embeddings[index_of(id)];
    out.tokens = e.at("tokens").get<std::vector<std::string>>();
    out.values = Matrix(e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>(),
                        decode_f64_le(e.at("data").get<std::string>()));
    if (out.values.rows() != out.tokens.size()) throw ParseError("embedding rows do not match token count");
  }
  return f;
}

void save_theme_records(const std::filesystem::path& path, std::span<const ThemeRecord> records) {
  save_jsonl(path, records, [](const ThemeRecord& r) { return to_json(r); });
}

std::vector<ThemeRecord> load_theme_records(const std::filesystem::path& path) {
  return load_jsonl(path, theme_record_from_json);
}

void save_features(const std::filesystem::path& path, std::span<const SessionFeatures> features) {
  save_jsonl(path, features, [](const SessionFeatures& f) { return to_json(f); });
}

std::vector<SessionFeatures> load_features(const std::filesystem::path& path) {
  return load_jsonl(path, session_features_from_json);
}

std::string features_digest(const SessionFeatures& f) {
  std::string bytes;
  for (const auto& e : f.embeddings) {
    bytes += std::to_string(e.values.rows()) + "x" + std::to_string(e.values.cols()) + ":";
    bytes += encode_f64_le(e.values.values());
    bytes += ";";
  }
  return sha256_hex(bytes);
}

ThemeRecord extract_record(const corpus::Transcript& t, const ticl::InContextTemplate& tmpl,
                           const itas::FeedbackPrompt& prompt, gateway::Gateway& gateway, int extraction_retries,
                           int feedback_retries) {
  ThemeRecord r;
  r.session_id = t.session_id;
  r.label = t.label;
  r.split = t.split;
  auto ex = ticl::extract_themes(t, tmpl, gateway, extraction_retries);
  r.themes = std::move(ex.themes);
  r.extraction_attempts = ex.attempts;
  r.extraction_fallback = ex.fallback;
  r.feedback = itas::request_feedback(r.themes, prompt, gateway, feedback_retries);
  return r;
}

SessionFeatures embed_record(const ThemeRecord& r, gateway::Gateway& gateway) {
  SessionFeatures f;
  f.session_id = r.session_id;
  f.label = r.label;
  f.split = r.split;
  f.themes = r.themes;
  f.feedback = r.feedback;
  f.backend_id = gateway.backend_id();
  std::vector<std::string> texts;
  for (const auto& c : r.themes.content) texts.push_back(c.text.empty() ? std::string(kNoContent) : c.text);
  auto embedded = gateway.embed(texts);
  for (std::size_t i = 0; i < kThemeCount; ++i) {
    f.embeddings[i] = {std::move(embedded[i].tokens), std::move(embedded[i].values)};
  }
  return f;
}

}  // namespace themescreen::features
