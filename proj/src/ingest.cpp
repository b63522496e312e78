#include "profvec/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "profvec/error.hpp"
#include "profvec/random.hpp"

namespace profvec {

using nlohmann::json;

std::string_view to_string(Label label) {
  switch (label) {
    case Label::gang:
      return "gang";
    case Label::non_gang:
      return "non_gang";
    case Label::unlabeled:
      break;
  }
  return "unlabeled";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "gang") return Label::gang;
  if (text == "non_gang") return Label::non_gang;
  if (text == "unlabeled") return Label::unlabeled;
  return std::nullopt;
}

ProfileCollection::ProfileCollection(std::vector<ProfileRecord> records)
    : records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  seen.reserve(records_.size());
  for (const auto& r : records_) {
    if (r.id.empty()) throw ValidationError("profile with empty id");
    if (!seen.insert(r.id).second)
      throw ValidationError("duplicate profile id: " + r.id);
    if (r.tweets.size() > kMaxTweets)
      throw ValidationError("profile " + r.id + " has more than " +
                            std::to_string(kMaxTweets) + " tweets");
    switch (r.label) {
      case Label::gang:
        ++counts_.gang;
        break;
      case Label::non_gang:
        ++counts_.non_gang;
        break;
      case Label::unlabeled:
        ++counts_.unlabeled;
        break;
    }
  }
}

namespace {

std::vector<std::string> string_list(const json& obj, const char* key,
                                     std::size_t line_no) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array())
    throw ParseError(line_no, std::string("field '") + key + "' must be an array");
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string())
      throw ParseError(line_no,
                       std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  });
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ProfileRecord parse_profile_line(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed record: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_no, "record is not an object");

  ProfileRecord r;
  auto id = obj.find("id");
  if (id == obj.end() || !id->is_string() || id->get<std::string>().empty())
    throw ParseError(line_no, "missing or empty 'id' field");
  r.id = id->get<std::string>();

  auto label = obj.find("label");
  if (label != obj.end() && !label->is_null()) {
    if (!label->is_string()) throw ParseError(line_no, "'label' must be a string or null");
    auto parsed = parse_label(label->get<std::string>());
    if (!parsed)
      throw ParseError(line_no, "unknown label '" + label->get<std::string>() + "'");
    r.label = *parsed;
  }

  auto desc = obj.find("description");
  if (desc != obj.end() && !desc->is_null()) {
    if (!desc->is_string()) throw ParseError(line_no, "'description' must be a string");
    r.description = desc->get<std::string>();
  }
  r.tweets = string_list(obj, "tweets", line_no);
  r.image_tags = string_list(obj, "image_tags", line_no);
  r.video_text = string_list(obj, "video_text", line_no);
  if (r.tweets.size() > kMaxTweets)
    throw ParseError(line_no, "more than " + std::to_string(kMaxTweets) + " tweets");
  return r;
}

std::string format_profile_line(const ProfileRecord& record) {
  json obj = json::object();
  obj["id"] = record.id;
  if (record.label == Label::unlabeled)
    obj["label"] = nullptr;
  else
    obj["label"] = std::string(to_string(record.label));
  obj["description"] = record.description;
  obj["tweets"] = record.tweets;
  obj["image_tags"] = record.image_tags;
  obj["video_text"] = record.video_text;
  return obj.dump();
}

ProfileCollection read_profiles(std::istream& in) {
  std::vector<ProfileRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto r = parse_profile_line(line, line_no);
    if (!seen.insert(r.id).second)
      throw ValidationError("duplicate profile id: " + r.id + " (line " +
                            std::to_string(line_no) + ")");
    records.push_back(std::move(r));
  }
  return ProfileCollection(std::move(records));
}

ProfileCollection load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open profiles file");
  return read_profiles(in);
}

void write_profiles(const ProfileCollection& profiles, std::ostream& out) {
  for (const auto& r : profiles.records()) out << format_profile_line(r) << '\n';
}

void save_profiles(const ProfileCollection& profiles, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write profiles file");
  write_profiles(profiles, out);
  if (!out) throw IoError(path, "write failed");
}

TagSource read_tags(std::istream& in) {
  TagSource source;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed tag record: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string())
      throw ParseError(line_no, "tag record needs a string 'id'");
    auto& tags = source.mapping[obj["id"].get<std::string>()];
    for (auto& raw : string_list(obj, "tags", line_no)) {
      auto tag = trim(raw);
      if (tag.empty()) throw ParseError(line_no, "empty image tag");
      tags.push_back(std::move(tag));
    }
  }
  return source;
}

TagSource load_tags(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open tags file");
  return read_tags(in);
}

ProfileCollection attach_image_tags(const ProfileCollection& profiles,
                                    const TagSource& tags) {
  std::vector<ProfileRecord> out = profiles.records();
  for (auto& r : out) {
    auto it = tags.mapping.find(r.id);
    if (it == tags.mapping.end()) continue;
    std::vector<std::string> merged;
    std::set<std::string> seen;
    for (const auto& t : r.image_tags)
      if (seen.insert(t).second) merged.push_back(t);
    for (const auto& t : it->second)
      if (seen.insert(t).second) merged.push_back(t);
    r.image_tags = std::move(merged);
  }
  return ProfileCollection(std::move(out));
}

// ---------------------------------------------------------------------------
// Synthetic collection

SynthSpec SynthSpec::with_default_vocab() {
  SynthSpec spec;
  spec.vocab_pos = {"smoke",  "hit",    "money",  "trigger", "bullet", "worship",
                    "opp",    "glock",  "trap",   "stack",   "drill",  "blick",
                    "shooter", "hood",  "rip",    "free",    "lil",    "plug",
                    "\xF0\x9F\x94\xAB", "\xE2\x9B\xBD", "\xF0\x9F\x92\xB0",
                    "\xF0\x9F\x92\xB8", "\xF0\x9F\x94\x93", "\xF0\x9F\x91\xBF"};
  spec.vocab_neg = {"love",   "life",   "music",  "book",   "song",    "coffee",
                    "beach",  "school", "family", "travel", "movie",   "puppy",
                    "garden", "church", "yoga",   "recipe", "concert", "poetry",
                    "\xF0\x9F\x98\x82", "\xE2\x9D\xA4", "\xF0\x9F\x8E\xB6",
                    "\xE2\x98\x95", "\xF0\x9F\x8C\xB8", "\xF0\x9F\x98\x8A"};
  spec.vocab_shared = {
      "day",     "night",   "today",   "tomorrow", "time",    "work",   "home",
      "people",  "friend",  "phone",   "car",      "city",    "food",   "weather",
      "week",    "year",    "morning", "call",     "talk",    "watch",  "look",
      "feel",    "think",   "know",    "want",     "tell",    "game",   "team",
      "win",     "lose",    "play",    "sleep",    "wake",    "drive",  "walk",
      "run",     "eat",     "drink",   "party",    "weekend", "summer", "winter",
      "rain",    "sun",     "street",  "store",    "shoes",   "shirt",  "hair",
      "picture", "video",   "post",    "follow",   "text",    "brother", "sister",
      "mama",    "crew",    "block",   "squad",    "real",    "fake",   "big",
      "little",  "good",    "bad",     "crazy",    "funny",   "happy",  "mad",
      "tired",   "ready",   "late",    "early",    "first",   "last",   "long",
      "short",   "new",     "old",     "cool",     "hot",     "cold",   "fresh",
      "bro",     "lol",     "smh",     "yeah",     "nah",     "okay",   "sure",
      "always",  "never",   "still",   "back",     "next",    "every",  "around",
      "thing",   "place",   "way",     "life_goals", "news",  "show",   "song_of_day",
      "bus",     "train",   "class",   "job",      "boss",    "check",  "pay",
      "mall",    "park",    "court",   "ball",     "shot",    "gym",    "dinner",
      "lunch",   "breakfast", "pizza", "chicken",  "birthday", "gift",  "dream"};
  return spec;
}

namespace {

void validate_spec(const SynthSpec& spec) {
  if (spec.n_pos == 0 || spec.n_neg == 0)
    throw ValidationError("synth spec: class counts must be positive");
  if (spec.vocab_pos.empty() || spec.vocab_neg.empty() || spec.vocab_shared.empty())
    throw ValidationError("synth spec: token inventories must be non-empty");
  if (spec.tweets_min == 0 || spec.tweets_min > spec.tweets_max)
    throw ValidationError("synth spec: tweets_per_profile range is empty");
  if (spec.tweets_max > kMaxTweets)
    throw ValidationError("synth spec: tweets_per_profile exceeds the tweet cap");
  if (spec.tokens_min == 0 || spec.tokens_min > spec.tokens_max)
    throw ValidationError("synth spec: tokens_per_tweet range is empty");
  for (double rate : {spec.signal_rate, spec.image_rate, spec.video_rate})
    if (!(rate >= 0.0 && rate <= 1.0))
      throw ValidationError("synth spec: rates must lie in [0, 1]");
  std::set<std::string> pos(spec.vocab_pos.begin(), spec.vocab_pos.end());
  for (const auto& t : spec.vocab_neg)
    if (pos.count(t))
      throw ValidationError("synth spec: vocab_pos and vocab_neg overlap on '" + t + "'");
}

std::vector<std::string> ascii_only(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (std::all_of(t.begin(), t.end(), [](unsigned char c) { return c < 0x80; }))
      out.push_back(t);
  return out;
}

struct Inventory {
  const std::vector<std::string>* cls;
  const std::vector<std::string>* shared;
  std::vector<std::string> cls_ascii;
  std::vector<std::string> shared_ascii;
};

// All draws depend on the class only through the inventory it is given, so
// swapping the inventories together with the class sizes mirrors the output.
ProfileRecord synth_one(const SynthSpec& spec, const Inventory& inv,
                        std::uint64_t seed, std::string id, Label label) {
  Rng rng(seed);
  auto range = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.index(hi - lo + 1));
  };
  auto pick = [&](const std::vector<std::string>& cls,
                  const std::vector<std::string>& shared) -> const std::string& {
    if (shared.empty() || (!cls.empty() && rng.bernoulli(spec.signal_rate)))
      return cls[rng.index(cls.size())];
    return shared[rng.index(shared.size())];
  };
  auto block = [&](bool force_class) {
    std::string text;
    const std::size_t n = range(spec.tokens_min, spec.tokens_max);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) text += ' ';
      if (force_class && i == 0)
        text += (*inv.cls)[rng.index(inv.cls->size())];
      else
        text += pick(*inv.cls, *inv.shared);
    }
    return text;
  };

  ProfileRecord r;
  r.id = std::move(id);
  r.label = label;
  const std::size_t n_tweets = range(spec.tweets_min, spec.tweets_max);
  for (std::size_t t = 0; t < n_tweets; ++t) r.tweets.push_back(block(t == 0));
  r.description = block(false);
  if (rng.bernoulli(spec.image_rate)) {
    const std::size_t n_tags = range(1, 3);
    for (std::size_t t = 0; t < n_tags; ++t) {
      std::string tag = pick(inv.cls_ascii, inv.shared_ascii);
      if (!tag.empty() &&
          std::find(r.image_tags.begin(), r.image_tags.end(), tag) == r.image_tags.end())
        r.image_tags.push_back(std::move(tag));
    }
  }
  if (rng.bernoulli(spec.video_rate)) {
    const std::size_t n_blocks = range(1, 2);
    for (std::size_t b = 0; b < n_blocks; ++b) r.video_text.push_back(block(false));
  }
  return r;
}

// Seeds are keyed by the class inventory rather than the class label.
std::string inventory_key(const std::vector<std::string>& tokens) {
  std::string key = "synth-profile";
  for (const auto& t : tokens) {
    key += '\x1f';
    key += t;
  }
  return key;
}

std::string synth_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05zu", prefix, i);
  return buf;
}

}  // namespace

ProfileCollection synthesize_profiles(const SynthSpec& spec) {
  validate_spec(spec);
  Inventory pos{&spec.vocab_pos, &spec.vocab_shared, ascii_only(spec.vocab_pos),
                ascii_only(spec.vocab_shared)};
  Inventory neg{&spec.vocab_neg, &spec.vocab_shared, ascii_only(spec.vocab_neg),
                ascii_only(spec.vocab_shared)};

  const std::string pos_key = inventory_key(spec.vocab_pos);
  const std::string neg_key = inventory_key(spec.vocab_neg);

  std::vector<ProfileRecord> records;
  records.reserve(spec.n_pos + spec.n_neg);
  for (std::size_t i = 0; i < spec.n_pos; ++i)
    records.push_back(synth_one(spec, pos, derive_seed(spec.seed, pos_key, i),
                                synth_id("pos", i), Label::gang));
  for (std::size_t i = 0; i < spec.n_neg; ++i)
    records.push_back(synth_one(spec, neg, derive_seed(spec.seed, neg_key, i),
                                synth_id("neg", i), Label::non_gang));
  return ProfileCollection(std::move(records));
}

}  // namespace profvec
