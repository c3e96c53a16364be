#include "themescreen/config.hpp"

#include "themescreen/embedded_data.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/io.hpp"

namespace themescreen {

using nlohmann::json;

namespace {

bool compatible(const json& def, const json& value) {
  if (def.is_null()) return true;  // optional setting; any scalar or null
  if (value.is_null()) return false;
  if (def.is_number()) return value.is_number();
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  return def.type() == value.type();
}

std::string type_name(const json& j) { return j.type_name(); }

void merge_into(json& target, const json& def, const json& overrides, const std::string& prefix) {
  if (!overrides.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!def.contains(it.key())) throw UnknownConfigKey(key);
    const json& d = def[it.key()];
    if (d.is_object()) {
      merge_into(target[it.key()], d, it.value(), key);
    } else {
      if (!compatible(d, it.value())) {
        throw ConfigError("config key " + key + " expects " + type_name(d) + ", got " + type_name(it.value()));
      }
      target[it.key()] = it.value();
    }
  }
}

}  // namespace

const json& RunConfig::defaults() {
  static const json d = json::parse(embedded::run_config_defaults_json());
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::merge(const json& overrides) { merge_into(values_, defaults(), overrides, ""); }

void RunConfig::merge_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  merge(j);
}

void RunConfig::set(std::string_view key, const json& value) {
  {
    const json* node = &defaults();
    std::size_t start = 0;
    while (start <= key.size()) {
      const auto dot = key.find('.', start);
      const std::string part(key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
      if (!node->is_object() || !node->contains(part)) throw UnknownConfigKey(std::string(key));
      node = &(*node)[part];
      if (dot == std::string_view::npos) break;
      start = dot + 1;
    }
  }
  json nested = value;
  std::string k(key);
  for (auto dot = k.rfind('.'); dot != std::string::npos; dot = k.rfind('.')) {
    nested = json{{k.substr(dot + 1), nested}};
    k.resize(dot);
  }
  nested = json{{k, nested}};
  // A bare section name cannot be replaced wholesale.
  if (!key.empty() && defaults().contains(std::string(key)) && defaults()[std::string(key)].is_object()) {
    throw ConfigError("config key " + std::string(key) + " is a section; set one of its fields");
  }
  merge(nested);
}

void RunConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("--set expects KEY=VALUE, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  set(key, value);
}

const json& RunConfig::at(std::string_view dotted) const {
  const json* node = &values_;
  std::string path(dotted);
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw UnknownConfigKey(std::string(dotted));
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *node;
}

corpus::SyntheticSpec RunConfig::synthetic_spec() const {
  const json& c = values_.at("corpus");
  corpus::SyntheticSpec s;
  s.num_sessions = c.at("num_sessions").get<std::size_t>();
  s.depression_ratio = c.at("depression_ratio").get<double>();
  s.turns_min = c.at("turns_min").get<std::size_t>();
  s.turns_max = c.at("turns_max").get<std::size_t>();
  s.distractor_ratio = c.at("distractor_ratio").get<double>();
  s.marker_density = c.at("marker_density").get<double>();
  s.seed = c.at("seed").get<std::uint64_t>();
  return s;
}

corpus::SplitFractions RunConfig::split_fractions() const {
  const auto f = values_.at("corpus").at("split").get<std::vector<double>>();
  if (f.size() != 3) throw ConfigError("corpus.split must have three fractions (train, dev, test)");
  return {f[0], f[1], f[2]};
}

std::uint64_t RunConfig::split_seed() const { return values_.at("corpus").at("split_seed").get<std::uint64_t>(); }

gateway::BackendConfig RunConfig::backend_config() const {
  const json& g = values_.at("gateway");
  gateway::BackendConfig b;
  const auto kind = g.at("kind").get<std::string>();
  if (kind == "mock") {
    b.kind = gateway::BackendKind::kMock;
  } else if (kind == "remote") {
    b.kind = gateway::BackendKind::kRemote;
  } else {
    throw ConfigError("gateway.kind must be mock or remote, got " + kind);
  }
  b.endpoint_url = g.at("endpoint_url").get<std::string>();
  b.api_key_env = g.at("api_key_env").get<std::string>();
  b.chat_model = g.at("chat_model").get<std::string>();
  b.embedding_model = g.at("embedding_model").get<std::string>();
  b.embedding_dim = g.at("embedding_dim").get<std::size_t>();
  b.mock_seed = g.at("mock_seed").get<std::uint64_t>();
  b.max_attempts = g.at("max_attempts").get<int>();
  b.backoff_ms = g.at("backoff_ms").get<int>();
  b.parallelism = g.at("parallelism").get<std::size_t>();
  const auto cache = g.at("cache_dir").get<std::string>();
  if (!cache.empty()) b.cache_dir = cache;
  return b;
}

int RunConfig::extraction_retries() const { return values_.at("gateway").at("extraction_retries").get<int>(); }
int RunConfig::feedback_retries() const { return values_.at("gateway").at("feedback_retries").get<int>(); }

train::TrainConfig RunConfig::train_config() const {
  const json& t = values_.at("train");
  try {
    train::TrainConfig c = train::TrainConfig::preset_named(t.at("preset").get<std::string>());
    if (!t.at("learning_rate").is_null()) c.learning_rate = t["learning_rate"].get<double>();
    if (!t.at("batch_size").is_null()) c.batch_size = t["batch_size"].get<std::size_t>();
    if (!t.at("epochs").is_null()) c.epochs = t["epochs"].get<std::size_t>();
    c.seed = t.at("seed").get<std::uint64_t>();
    c.model.d = values_.at("gateway").at("embedding_dim").get<std::size_t>();
    const json& h = t.at("hidden");
    if (h.is_number()) {
      c.model.hidden = {h.get<std::size_t>()};
    } else if (h.is_array()) {
      c.model.hidden = h.get<std::vector<std::size_t>>();
    } else if (!h.is_null()) {
      throw ConfigError("train.hidden must be null, a size or a list of sizes");
    }
    const auto mode = itas::parse_mode(t.at("itas_mode").get<std::string>());
    if (!mode) throw ConfigError("train.itas_mode must be normalized or literal");
    c.model.itas_mode = *mode;
    if (!t.at("drop_theme").is_null()) {
      c.model.drop_theme = parse_theme(t["drop_theme"].get<std::string>());
      if (!c.model.drop_theme) throw ConfigError("train.drop_theme must name a theme, got " + t["drop_theme"].dump());
    }
    c.model.disable_tcl = t.at("disable_tcl").get<bool>();
    c.model.disable_itas = t.at("disable_itas").get<bool>();
    c.model.threshold = t.at("threshold").get<double>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train settings: ") + e.what());
  }
}

ServiceSettings RunConfig::service_settings() const {
  const json& s = values_.at("service");
  ServiceSettings out;
  out.host = s.at("host").get<std::string>();
  out.port = s.at("port").get<int>();
  out.data_dir = s.at("data_dir").get<std::string>();
  out.checkpoint = s.at("checkpoint").get<std::string>();
  out.cors_origin = s.at("cors_origin").get<std::string>();
  return out;
}

}  // namespace themescreen
