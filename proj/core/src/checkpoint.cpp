#include "themescreen/numeric/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "themescreen/digest.hpp"
#include "themescreen/errors.hpp"

namespace themescreen::numeric {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "themescreen-checkpoint/1";
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json params = json::object();
  for (const auto& [name, m] : ckpt.params) {
    params[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_f64_le(m.values())}};
  }
  return json{{"format", kFormat}, {"seed", ckpt.seed}, {"config", ckpt.config}, {"params", params}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint ckpt;
  try {
    if (j.at("format").get<std::string>() != kFormat) {
      throw ParseError("checkpoint: unsupported format " + j.at("format").dump());
    }
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.config = j.at("config");
    for (const auto& [name, p] : j.at("params").items()) {
      ckpt.params.emplace(name, Matrix(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>(),
                                       decode_f64_le(p.at("data").get<std::string>())));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return checkpoint_from_json(json::parse(buf.str()));
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace themescreen::numeric
