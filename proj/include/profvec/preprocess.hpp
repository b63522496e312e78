#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "profvec/ingest.hpp"

namespace profvec {

/// The five feature channels, in the fixed order used for merging.
enum class Channel : std::size_t { tweets = 0, description, emoji, image_tags, video_text };
inline constexpr std::size_t kChannelCount = 5;
inline constexpr std::array<Channel, kChannelCount> kChannels = {
    Channel::tweets, Channel::description, Channel::emoji, Channel::image_tags,
    Channel::video_text};

std::string_view to_string(Channel channel);

using TokenSeq = std::vector<std::string>;

struct PreprocessConfig {
  std::set<std::string> stopwords;
  std::set<std::string> seed_words;
  bool stem = true;
  /// Emoji byte sequence -> alias token.
  std::map<std::string, std::string> emoji_alias;

  /// Built-in English stopwords and emoji aliases, no seed words.
  static PreprocessConfig defaults();
};

class TokenizedProfile {
 public:
  TokenizedProfile() = default;
  TokenizedProfile(std::string id, Label label,
                   std::array<TokenSeq, kChannelCount> channels);

  const std::string& id() const { return id_; }
  Label label() const { return label_; }
  const TokenSeq& channel(Channel c) const {
    return channels_[static_cast<std::size_t>(c)];
  }
  const std::array<TokenSeq, kChannelCount>& channels() const { return channels_; }
  /// Channels concatenated in kChannels order.
  const TokenSeq& merged_tokens() const { return merged_; }

  bool operator==(const TokenizedProfile&) const = default;

 private:
  std::string id_;
  Label label_ = Label::unlabeled;
  std::array<TokenSeq, kChannelCount> channels_;
  TokenSeq merged_;
};

struct EmojiSplit {
  std::string stripped_text;
  TokenSeq emoji_tokens;
};

/// Removes every aliased emoji sequence (longest match first, trailing
/// variation selector included) and returns the aliases in order.
EmojiSplit extract_emoji(std::string_view text,
                         const std::map<std::string, std::string>& emoji_alias);

/// Lowercased [a-z0-9_]+ tokens. URLs and @mentions are dropped, the '#'
/// sigil is stripped, apostrophes inside a word are removed.
TokenSeq tokenize(std::string_view text);

/// Porter stemmer iterated to a fixed point, so stem(stem(w)) == stem(w).
std::string stem(std::string_view token);
/// One pass of the Porter algorithm.
std::string porter_stem_once(std::string_view token);

TokenizedProfile preprocess_profile(const ProfileRecord& record,
                                    const PreprocessConfig& config);
std::vector<TokenizedProfile> preprocess_all(const ProfileCollection& profiles,
                                             const PreprocessConfig& config);

// Word lists: one token per line, '#' starts a comment.
std::set<std::string> read_word_list(std::istream& in);
std::set<std::string> load_word_list(const std::string& path);
// Emoji alias file: "<emoji sequence> <alias_token>" per line.
std::map<std::string, std::string> read_emoji_aliases(std::istream& in);
std::map<std::string, std::string> load_emoji_aliases(const std::string& path);

const std::set<std::string>& default_stopwords();
const std::map<std::string, std::string>& default_emoji_aliases();

// Tokenized profile files: one JSON object per line.
std::string format_tokenized_line(const TokenizedProfile& profile);
TokenizedProfile parse_tokenized_line(std::string_view line, std::size_t line_no);
std::vector<TokenizedProfile> read_tokenized(std::istream& in);
std::vector<TokenizedProfile> load_tokenized(const std::string& path);
void write_tokenized(const std::vector<TokenizedProfile>& profiles, std::ostream& out);
void save_tokenized(const std::vector<TokenizedProfile>& profiles, const std::string& path);

}  // namespace profvec
