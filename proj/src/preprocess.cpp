#include "profvec/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "profvec/error.hpp"

namespace profvec {

using nlohmann::json;

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::tweets:
      return "tweets";
    case Channel::description:
      return "description";
    case Channel::emoji:
      return "emoji";
    case Channel::image_tags:
      return "image_tags";
    case Channel::video_text:
      return "video_text";
  }
  return "?";
}

PreprocessConfig PreprocessConfig::defaults() {
  PreprocessConfig config;
  config.stopwords = default_stopwords();
  config.emoji_alias = default_emoji_aliases();
  return config;
}

TokenizedProfile::TokenizedProfile(std::string id, Label label,
                                   std::array<TokenSeq, kChannelCount> channels)
    : id_(std::move(id)), label_(label), channels_(std::move(channels)) {
  std::size_t total = 0;
  for (const auto& c : channels_) total += c.size();
  merged_.reserve(total);
  for (const auto& c : channels_) merged_.insert(merged_.end(), c.begin(), c.end());
}

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte
}

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view prefix) {
  return text.size() - pos >= prefix.size() && text.compare(pos, prefix.size(), prefix) == 0;
}

// Variation selector-16 and the five skin-tone modifiers.
std::size_t trailing_modifier(std::string_view text, std::size_t pos) {
  if (starts_with_at(text, pos, "\xEF\xB8\x8F")) return 3;
  if (text.size() - pos >= 4 && static_cast<unsigned char>(text[pos]) == 0xF0 &&
      static_cast<unsigned char>(text[pos + 1]) == 0x9F &&
      static_cast<unsigned char>(text[pos + 2]) == 0x8F) {
    const auto last = static_cast<unsigned char>(text[pos + 3]);
    if (last >= 0xBB && last <= 0xBF) return 4;
  }
  return 0;
}

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

EmojiSplit extract_emoji(std::string_view text,
                         const std::map<std::string, std::string>& emoji_alias) {
  std::vector<const std::pair<const std::string, std::string>*> keys;
  keys.reserve(emoji_alias.size());
  for (const auto& kv : emoji_alias)
    if (!kv.first.empty()) keys.push_back(&kv);
  std::stable_sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) {
    return a->first.size() > b->first.size();
  });

  EmojiSplit out;
  out.stripped_text.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    bool matched = false;
    if (lead >= 0x80) {
      for (const auto* kv : keys) {
        if (starts_with_at(text, i, kv->first)) {
          out.emoji_tokens.push_back(kv->second);
          i += kv->first.size();
          while (i < text.size()) {
            const std::size_t skip = trailing_modifier(text, i);
            if (skip == 0) break;
            i += skip;
          }
          matched = true;
          break;
        }
      }
    }
    if (!matched) {
      const std::size_t len = std::min(utf8_length(lead), text.size() - i);
      out.stripped_text.append(text.substr(i, len));
      i += len;
    }
  }
  return out;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    // One whitespace-delimited chunk at a time.
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    std::string chunk;
    chunk.reserve(end - pos);
    for (std::size_t i = pos; i < end; ++i) chunk.push_back(ascii_lower(text[i]));
    pos = end;

    for (std::string_view marker : {"http://", "https://", "www."}) {
      const auto at = chunk.find(marker);
      if (at != std::string::npos) chunk.resize(at);
    }

    std::size_t i = 0;
    while (i < chunk.size()) {
      const char c = chunk[i];
      if (c == '@') {
        flush();
        ++i;
        while (i < chunk.size() && is_word_char(chunk[i])) ++i;
        continue;
      }
      if (is_word_char(c)) {
        current.push_back(c);
        ++i;
        continue;
      }
      // Apostrophe inside a word ("don't", "don’t") joins the two halves.
      std::size_t apostrophe = 0;
      if (c == '\'')
        apostrophe = 1;
      else if (starts_with_at(chunk, i, "\xE2\x80\x99"))
        apostrophe = 3;
      if (apostrophe && !current.empty() && i + apostrophe < chunk.size() &&
          is_word_char(chunk[i + apostrophe])) {
        i += apostrophe;
        continue;
      }
      flush();
      i += std::max<std::size_t>(1, std::min(utf8_length(static_cast<unsigned char>(c)),
                                             chunk.size() - i));
    }
    flush();
  }
  return tokens;
}

namespace {

bool keep(const std::string& token, const PreprocessConfig& config) {
  return !config.seed_words.count(token) && !config.stopwords.count(token);
}

void append_pipeline(std::string_view text, const PreprocessConfig& config, TokenSeq& out) {
  for (auto& token : tokenize(text)) {
    if (!keep(token, config)) continue;
    out.push_back(config.stem ? stem(token) : std::move(token));
  }
}

void append_with_emoji(std::string_view text, const PreprocessConfig& config,
                       TokenSeq& words, TokenSeq& emoji) {
  auto split = extract_emoji(text, config.emoji_alias);
  append_pipeline(split.stripped_text, config, words);
  for (auto& alias : split.emoji_tokens)
    if (keep(alias, config)) emoji.push_back(std::move(alias));
}

}  // namespace

TokenizedProfile preprocess_profile(const ProfileRecord& record,
                                    const PreprocessConfig& config) {
  std::array<TokenSeq, kChannelCount> channels;
  auto& tweets = channels[static_cast<std::size_t>(Channel::tweets)];
  auto& description = channels[static_cast<std::size_t>(Channel::description)];
  auto& emoji = channels[static_cast<std::size_t>(Channel::emoji)];
  auto& tags = channels[static_cast<std::size_t>(Channel::image_tags)];
  auto& video = channels[static_cast<std::size_t>(Channel::video_text)];

  for (const auto& t : record.tweets) append_with_emoji(t, config, tweets, emoji);
  append_with_emoji(record.description, config, description, emoji);
  for (const auto& t : record.image_tags) append_pipeline(t, config, tags);
  for (const auto& v : record.video_text) append_with_emoji(v, config, video, emoji);
  return TokenizedProfile(record.id, record.label, std::move(channels));
}

std::vector<TokenizedProfile> preprocess_all(const ProfileCollection& profiles,
                                             const PreprocessConfig& config) {
  std::vector<TokenizedProfile> out;
  out.reserve(profiles.size());
  for (const auto& r : profiles.records()) out.push_back(preprocess_profile(r, config));
  return out;
}

// ---------------------------------------------------------------------------
// Word-list and alias files

namespace {

std::string strip_comment_and_trim(const std::string& line) {
  std::string s = line.substr(0, line.find('#'));
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::set<std::string> read_word_list(std::istream& in) {
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto word = strip_comment_and_trim(line);
    if (word.empty()) continue;
    std::transform(word.begin(), word.end(), word.begin(), ascii_lower);
    words.insert(std::move(word));
  }
  return words;
}

std::set<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open word list");
  return read_word_list(in);
}

std::map<std::string, std::string> read_emoji_aliases(std::istream& in) {
  std::map<std::string, std::string> aliases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string emoji, alias, extra;
    if (!(fields >> emoji)) continue;
    if (emoji[0] == '#') continue;
    if (!(fields >> alias) || (fields >> extra))
      throw ParseError(line_no, "expected '<emoji sequence> <alias_token>'");
    aliases[emoji] = alias;
  }
  return aliases;
}

std::map<std::string, std::string> load_emoji_aliases(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open emoji alias file");
  return read_emoji_aliases(in);
}

// ---------------------------------------------------------------------------
// Tokenized profile files

std::string format_tokenized_line(const TokenizedProfile& profile) {
  json obj = json::object();
  obj["id"] = profile.id();
  if (profile.label() == Label::unlabeled)
    obj["label"] = nullptr;
  else
    obj["label"] = std::string(to_string(profile.label()));
  for (Channel c : kChannels) obj[std::string(to_string(c))] = profile.channel(c);
  return obj.dump();
}

TokenizedProfile parse_tokenized_line(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed tokenized record: ") + e.what());
  }
  if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string())
    throw ParseError(line_no, "tokenized record needs a string 'id'");
  Label label = Label::unlabeled;
  if (obj.contains("label") && !obj["label"].is_null()) {
    if (!obj["label"].is_string()) throw ParseError(line_no, "'label' must be a string or null");
    auto parsed = parse_label(obj["label"].get<std::string>());
    if (!parsed) throw ParseError(line_no, "unknown label");
    label = *parsed;
  }
  std::array<TokenSeq, kChannelCount> channels;
  for (Channel c : kChannels) {
    const std::string key(to_string(c));
    if (!obj.contains(key)) continue;
    const auto& arr = obj[key];
    if (!arr.is_array()) throw ParseError(line_no, "channel '" + key + "' must be an array");
    for (const auto& v : arr) {
      if (!v.is_string() || v.get<std::string>().empty())
        throw ParseError(line_no, "channel '" + key + "' must hold non-empty strings");
      channels[static_cast<std::size_t>(c)].push_back(v.get<std::string>());
    }
  }
  return TokenizedProfile(obj["id"].get<std::string>(), label, std::move(channels));
}

std::vector<TokenizedProfile> read_tokenized(std::istream& in) {
  std::vector<TokenizedProfile> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_tokenized_line(line, line_no));
  }
  return out;
}

std::vector<TokenizedProfile> load_tokenized(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open tokenized profiles");
  return read_tokenized(in);
}

void write_tokenized(const std::vector<TokenizedProfile>& profiles, std::ostream& out) {
  for (const auto& p : profiles) out << format_tokenized_line(p) << '\n';
}

void save_tokenized(const std::vector<TokenizedProfile>& profiles, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write tokenized profiles");
  write_tokenized(profiles, out);
}

}  // namespace profvec
