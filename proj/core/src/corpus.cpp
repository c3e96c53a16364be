#include "themescreen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "themescreen/errors.hpp"
#include "themescreen/lexicon.hpp"
#include "themescreen/rng.hpp"

namespace themescreen::corpus {

using nlohmann::json;

std::string_view speaker_name(Speaker s) {
  return s == Speaker::kInterviewer ? "interviewer" : "participant";
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

std::optional<Split> parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest, Split::kUnassigned}) {
    if (split_name(s) == name) return s;
  }
  return std::nullopt;
}

namespace {

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string turn_field(std::size_t i, std::string_view field) {
  return "turns[" + std::to_string(i) + "]." + std::string(field);
}

}  // namespace

void validate(const Transcript& t) {
  if (t.session_id.empty()) throw CorpusError("field session_id: must be a non-empty string");
  if (t.turns.size() < 2) {
    throw CorpusError("field turns: a session needs at least 2 turns, got " +
                      std::to_string(t.turns.size()));
  }
  if (t.turns.front().speaker != Speaker::kInterviewer) {
    throw CorpusError("field turns[0].speaker: the first turn must be the interviewer");
  }
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    if (blank(t.turns[i].text)) throw CorpusError("field " + turn_field(i, "text") + ": empty text");
    if (i > 0 && t.turns[i].turn_index <= t.turns[i - 1].turn_index) {
      throw CorpusError("field " + turn_field(i, "turn_index") + ": turn_index must be strictly increasing");
    }
  }
  if (t.label && *t.label != 0 && *t.label != 1) throw CorpusError("field label: must be 0, 1 or null");
  if (t.split != Split::kUnassigned && !t.label) {
    throw CorpusError("field label: required for sessions in the " + std::string(split_name(t.split)) +
                      " split");
  }
}

Transcript transcript_from_json(const json& j) {
  if (!j.is_object()) throw CorpusError("session must be a JSON object");
  Transcript t;

  auto sid = j.find("session_id");
  if (sid == j.end() || !sid->is_string()) throw CorpusError("field session_id: missing or not a string");
  t.session_id = sid->get<std::string>();

  if (auto label = j.find("label"); label != j.end() && !label->is_null()) {
    if (!label->is_number_integer() || (label->get<int>() != 0 && label->get<int>() != 1)) {
      throw CorpusError("field label: must be 0, 1 or null");
    }
    t.label = label->get<int>();
  }

  if (auto split = j.find("split"); split != j.end() && !split->is_null()) {
    auto parsed = split->is_string() ? parse_split(split->get<std::string>()) : std::nullopt;
    if (!parsed) throw CorpusError("field split: must be train, dev, test or unassigned");
    t.split = *parsed;
  }

  auto turns = j.find("turns");
  if (turns == j.end() || !turns->is_array()) throw CorpusError("field turns: missing or not an array");
  for (std::size_t i = 0; i < turns->size(); ++i) {
    const json& tj = (*turns)[i];
    if (!tj.is_object()) throw CorpusError("field turns[" + std::to_string(i) + "]: not an object");
    DialogueTurn turn;
    auto speaker = tj.find("speaker");
    if (speaker == tj.end() || !speaker->is_string()) {
      throw CorpusError("field " + turn_field(i, "speaker") + ": missing or not a string");
    }
    if (*speaker == "interviewer") {
      turn.speaker = Speaker::kInterviewer;
    } else if (*speaker == "participant") {
      turn.speaker = Speaker::kParticipant;
    } else {
      throw CorpusError("field " + turn_field(i, "speaker") + ": must be interviewer or participant");
    }
    auto text = tj.find("text");
    if (text == tj.end() || !text->is_string()) {
      throw CorpusError("field " + turn_field(i, "text") + ": missing or not a string");
    }
    turn.text = text->get<std::string>();
    turn.turn_index = i;
    if (auto idx = tj.find("turn_index"); idx != tj.end()) {
      if (!idx->is_number_unsigned() && !(idx->is_number_integer() && idx->get<long long>() >= 0)) {
        throw CorpusError("field " + turn_field(i, "turn_index") + ": must be a non-negative integer");
      }
      turn.turn_index = idx->get<std::size_t>();
    }
    t.turns.push_back(std::move(turn));
  }

  validate(t);
  return t;
}

json to_json(const Transcript& t) {
  json j;
  j["session_id"] = t.session_id;
  j["label"] = t.label ? json(*t.label) : json(nullptr);
  json turns = json::array();
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    json tj{{"speaker", speaker_name(t.turns[i].speaker)}, {"text", t.turns[i].text}};
    if (t.turns[i].turn_index != i) tj["turn_index"] = t.turns[i].turn_index;
    turns.push_back(std::move(tj));
  }
  j["turns"] = std::move(turns);
  if (t.split != Split::kUnassigned) j["split"] = split_name(t.split);
  return j;
}

std::vector<Transcript> parse_transcripts(std::string_view jsonl) {
  std::vector<Transcript> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    try {
      out.push_back(transcript_from_json(j));
    } catch (const CorpusError& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw CorpusError("transcript file contains no sessions");
  return out;
}

std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open transcript file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_transcripts(buf.str());
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what());
  }
}

std::string to_jsonl(std::span<const Transcript> corpus) {
  std::string out;
  for (const auto& t : corpus) {
    out += to_json(t).dump();
    out += '\n';
  }
  return out;
}

void save_transcripts(const std::filesystem::path& path, std::span<const Transcript> corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write transcript file " + path.string());
  out << to_jsonl(corpus);
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SyntheticSpec::validate() const {
  if (num_sessions == 0) throw CorpusError("synthetic spec: num_sessions must be positive");
  if (!(depression_ratio > 0.0 && depression_ratio < 1.0)) {
    throw CorpusError("synthetic spec: depression_ratio must be in (0, 1)");
  }
  if (turns_min < 2 || turns_max < turns_min) {
    throw CorpusError("synthetic spec: turns range must satisfy 2 <= turns_min <= turns_max");
  }
  if (!(distractor_ratio >= 0.0 && distractor_ratio < 1.0)) {
    throw CorpusError("synthetic spec: distractor_ratio must be in [0, 1)");
  }
  if (!(marker_density > 0.0 && marker_density <= 1.0)) {
    throw CorpusError("synthetic spec: marker_density must be in (0, 1]");
  }
}

json SyntheticSpec::to_json() const {
  return json{{"num_sessions", num_sessions},         {"depression_ratio", depression_ratio},
              {"turns_min", turns_min},               {"turns_max", turns_max},
              {"distractor_ratio", distractor_ratio}, {"marker_density", marker_density},
              {"seed", seed}};
}

namespace {

const std::string& pick(Rng& rng, const std::vector<std::string>& pool) {
  return pool[rng.below(pool.size())];
}

std::string session_name(std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i + 1);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
  return "synth-" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

std::vector<SyntheticSession> generate_synthetic_annotated(const SyntheticSpec& spec) {
  spec.validate();
  const ThemeTemplates& pools = ThemeTemplates::builtin();

  Rng label_rng(spec.seed);
  const auto positives =
      static_cast<std::size_t>(std::llround(static_cast<double>(spec.num_sessions) * spec.depression_ratio));
  std::vector<std::size_t> order(spec.num_sessions);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  label_rng.shuffle(std::span(order));
  std::vector<int> labels(spec.num_sessions, 0);
  for (std::size_t k = 0; k < positives; ++k) labels[order[k]] = 1;

  std::vector<SyntheticSession> sessions;
  sessions.reserve(spec.num_sessions);
  for (std::size_t i = 0; i < spec.num_sessions; ++i) {
    Rng rng(splitmix64(spec.seed ^ splitmix64(i + 1)));
    const std::size_t turns = spec.turns_min + rng.below(spec.turns_max - spec.turns_min + 1);
    const std::size_t pairs = std::max<std::size_t>(1, turns / 2);
    std::size_t distractors = static_cast<std::size_t>(
        std::llround(static_cast<double>(pairs) * spec.distractor_ratio));
    distractors = std::min(distractors, pairs - 1);

    // Opening greeting is small talk; remaining distractor slots are scattered.
    std::vector<int> is_distractor(pairs, 0);
    if (distractors > 0) {
      is_distractor[0] = 1;
      for (std::size_t k = 1; k < distractors; ++k) is_distractor[k] = 1;
      rng.shuffle(std::span(is_distractor).subspan(1));
    }

    std::array<ThemeId, 4> theme_order = kTopicThemes;
    rng.shuffle(std::span(theme_order));

    SyntheticSession s;
    s.transcript.session_id = session_name(i, spec.num_sessions);
    s.transcript.label = labels[i];
    std::size_t theme_slot = 0;
    for (std::size_t p = 0; p < pairs; ++p) {
      TurnOrigin origin;
      std::string question;
      std::string answer;
      if (is_distractor[p]) {
        question = pick(rng, pools.small_talk_questions());
        answer = pick(rng, pools.small_talk());
      } else {
        const ThemeId topic = theme_order[theme_slot++ % theme_order.size()];
        origin.theme = topic;
        question = pick(rng, pools.questions(topic));
        origin.marker = labels[i] == 1 && rng.bernoulli(spec.marker_density);
        answer = pick(rng, origin.marker ? pools.marker(topic) : pools.neutral(topic));
      }
      const std::size_t base = s.transcript.turns.size();
      s.transcript.turns.push_back({Speaker::kInterviewer, question, base});
      s.transcript.turns.push_back({Speaker::kParticipant, answer, base + 1});
      s.origins.push_back(TurnOrigin{origin.theme, false});
      s.origins.push_back(origin);
    }
    sessions.push_back(std::move(s));
  }
  return sessions;
}

std::vector<Transcript> generate_synthetic(const SyntheticSpec& spec) {
  auto annotated = generate_synthetic_annotated(spec);
  std::vector<Transcript> out;
  out.reserve(annotated.size());
  for (auto& s : annotated) out.push_back(std::move(s.transcript));
  return out;
}

// ---------------------------------------------------------------------------
// Splits

std::vector<Transcript> split_corpus(std::vector<Transcript> corpus, SplitFractions f, std::uint64_t seed) {
  if (corpus.size() < 3) throw CorpusError("split_corpus: need at least 3 sessions, got " +
                                           std::to_string(corpus.size()));
  if (!(f.train > 0 && f.dev > 0 && f.test > 0) || std::abs(f.train + f.dev + f.test - 1.0) > 1e-9) {
    throw CorpusError("split_corpus: fractions must be positive and sum to 1");
  }
  for (const auto& t : corpus) {
    if (!t.label) throw CorpusError("split_corpus: session " + t.session_id + " has no label");
  }

  const std::size_t n = corpus.size();
  std::array<std::size_t, 3> sizes = {
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.train)),
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.dev)), 0};
  sizes[0] = std::min(sizes[0], n);
  sizes[1] = std::min(sizes[1], n - sizes[0]);
  sizes[2] = n - sizes[0] - sizes[1];
  // Every split gets at least one session; take from the largest.
  for (std::size_t s = 0; s < 3; ++s) {
    if (sizes[s] == 0) {
      auto largest = std::max_element(sizes.begin(), sizes.end());
      --*largest;
      ++sizes[s];
    }
  }

  std::vector<std::size_t> pos_idx;
  std::vector<std::size_t> neg_idx;
  for (std::size_t i = 0; i < n; ++i) (*corpus[i].label == 1 ? pos_idx : neg_idx).push_back(i);
  Rng rng(seed);
  rng.shuffle(std::span(pos_idx));
  rng.shuffle(std::span(neg_idx));

  // Positives per split: floor of the proportional share, remainders to the
  // largest fractional parts, so each split is within one session of target.
  const double p = static_cast<double>(pos_idx.size()) / static_cast<double>(n);
  std::array<std::size_t, 3> pos_count{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double target = static_cast<double>(sizes[s]) * p;
    pos_count[s] = static_cast<std::size_t>(std::floor(target + 1e-12));
    frac[s] = target - static_cast<double>(pos_count[s]);
    assigned += pos_count[s];
  }
  std::array<std::size_t, 3> by_frac = {0, 1, 2};
  std::stable_sort(by_frac.begin(), by_frac.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < pos_idx.size(); k = (k + 1) % 3) {
    const std::size_t s = by_frac[k];
    if (pos_count[s] < sizes[s]) {
      ++pos_count[s];
      ++assigned;
    }
  }

  const std::array<Split, 3> names = {Split::kTrain, Split::kDev, Split::kTest};
  std::size_t pi = 0;
  std::size_t ni = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < pos_count[s]; ++k) corpus[pos_idx[pi++]].split = names[s];
    for (std::size_t k = 0; k < sizes[s] - pos_count[s]; ++k) corpus[neg_idx[ni++]].split = names[s];
  }
  return corpus;
}

std::vector<Transcript> select_split(std::span<const Transcript> corpus, Split split) {
  std::vector<Transcript> out;
  for (const auto& t : corpus) {
    if (t.split == split) out.push_back(t);
  }
  return out;
}

}  // namespace themescreen::corpus
