#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace profvec {

enum class Label { gang, non_gang, unlabeled };

std::string_view to_string(Label label);
/// Accepts "gang", "non_gang" and "unlabeled".
std::optional<Label> parse_label(std::string_view text);

/// Upper bound on stored tweets per profile (the collection window of the
/// source data: the most recent 3,200 tweets).
inline constexpr std::size_t kMaxTweets = 3200;

struct ProfileRecord {
  std::string id;
  Label label = Label::unlabeled;
  std::string description;
  std::vector<std::string> tweets;
  std::vector<std::string> image_tags;
  std::vector<std::string> video_text;

  bool operator==(const ProfileRecord&) const = default;
};

struct LabelCounts {
  std::size_t gang = 0;
  std::size_t non_gang = 0;
  std::size_t unlabeled = 0;

  bool operator==(const LabelCounts&) const = default;
};

/// Records with unique ids and a tally kept in step with them.
class ProfileCollection {
 public:
  ProfileCollection() = default;
  /// Throws ValidationError on duplicate or empty ids.
  explicit ProfileCollection(std::vector<ProfileRecord> records);

  const std::vector<ProfileRecord>& records() const { return records_; }
  const LabelCounts& counts() const { return counts_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  bool operator==(const ProfileCollection&) const = default;

 private:
  std::vector<ProfileRecord> records_;
  LabelCounts counts_;
};

/// File-backed image tags keyed by profile id.
struct TagSource {
  std::map<std::string, std::vector<std::string>> mapping;
};

/// Parameters for the planted-signal synthetic collection.
struct SynthSpec {
  std::size_t n_pos = 60;
  std::size_t n_neg = 440;
  std::vector<std::string> vocab_pos;
  std::vector<std::string> vocab_neg;
  std::vector<std::string> vocab_shared;
  std::size_t tweets_min = 4;
  std::size_t tweets_max = 10;
  std::size_t tokens_min = 4;
  std::size_t tokens_max = 9;
  /// Probability that a generated token comes from the class inventory
  /// rather than the shared one.
  double signal_rate = 0.25;
  double image_rate = 0.7;
  double video_rate = 0.6;
  std::uint64_t seed = 7;

  /// Spec with the built-in inventories filled in.
  static SynthSpec with_default_vocab();
};

// Record (de)serialization: one JSON object per line.
ProfileRecord parse_profile_line(std::string_view line, std::size_t line_no);
std::string format_profile_line(const ProfileRecord& record);

ProfileCollection read_profiles(std::istream& in);
ProfileCollection load_profiles(const std::string& path);
void write_profiles(const ProfileCollection& profiles, std::ostream& out);
void save_profiles(const ProfileCollection& profiles, const std::string& path);

TagSource read_tags(std::istream& in);
TagSource load_tags(const std::string& path);

/// Union of existing tags and the source's tags for each id; existing order
/// first, duplicates dropped.
ProfileCollection attach_image_tags(const ProfileCollection& profiles,
                                    const TagSource& tags);

ProfileCollection synthesize_profiles(const SynthSpec& spec);

}  // namespace profvec
