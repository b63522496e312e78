#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "profvec/embed.hpp"
#include "profvec/preprocess.hpp"

namespace profvec {

enum class AggregationMethod { sum, avg, sum_count, sum_tfidf, avg_sum_count, baseline_tf };

inline constexpr AggregationMethod kEmbeddingMethods[] = {
    AggregationMethod::sum, AggregationMethod::avg, AggregationMethod::sum_count,
    AggregationMethod::sum_tfidf, AggregationMethod::avg_sum_count};

std::string_view to_string(AggregationMethod method);
std::optional<AggregationMethod> parse_method(std::string_view text);

/// Inverse document frequencies aligned with a vocabulary, computed over
/// training profiles (one profile = one document).
struct IdfTable {
  std::vector<double> idf;  // by vocabulary index
  std::size_t n_docs = 0;
};

/// idf(i) = ln((1 + N) / (1 + df_i)) + 1. Throws when there are no documents.
IdfTable build_idf(std::span<const TokenizedProfile> training, const Vocabulary& vocab);

/// "token<TAB>idf" per line, vocabulary order.
void write_idf(const IdfTable& idf, const Vocabulary& vocab, std::ostream& out);
void save_idf(const IdfTable& idf, const Vocabulary& vocab, const std::string& path);
/// Every vocabulary token must have an entry; extra tokens are ignored.
IdfTable read_idf(std::istream& in, const Vocabulary& vocab);
IdfTable load_idf(const std::string& path, const Vocabulary& vocab);

struct TermStat {
  std::uint32_t index;  // vocabulary index
  std::uint32_t count;  // c_ip
  double tfidf;         // t_ip, or 0 when no idf table was supplied
};

/// Per-profile statistics over unique in-vocabulary tokens, sorted by index.
struct ProfileTermStats {
  std::vector<TermStat> terms;
  bool has_tfidf = false;
  std::size_t n() const { return terms.size(); }
};

ProfileTermStats compute_term_stats(const TokenizedProfile& profile, const Vocabulary& vocab,
                                    const IdfTable* idf = nullptr);

struct ProfileVector {
  AggregationMethod method = AggregationMethod::sum;
  std::vector<double> dense;                                     // embedding methods
  std::vector<std::pair<std::string, std::uint32_t>> sparse;     // baseline_tf
  bool oov_profile = false;
};

/// Combines the word vectors of the profile's unique in-vocabulary words:
///   sum            sum w
///   avg            (1/n) sum w
///   sum_count      sum w * c
///   sum_tfidf      sum w * t
///   avg_sum_count  (1/n) sum w * c
/// An empty profile yields the zero vector with oov_profile set.
ProfileVector aggregate(const ProfileTermStats& stats, const EmbeddingModel& model,
                        AggregationMethod method);

/// Sparse unigram counts over merged tokens that are in the vocabulary,
/// sorted by token.
ProfileVector baseline_tf_vector(const TokenizedProfile& profile, const Vocabulary& vocab);

/// Dense baseline row of vocabulary dimension.
std::vector<double> baseline_dense(const TokenizedProfile& profile, const Vocabulary& vocab);

/// Convenience: term stats + aggregate (or baseline) for one profile.
ProfileVector vectorize(const TokenizedProfile& profile, const EmbeddingModel& model,
                        AggregationMethod method, const IdfTable* idf);

/// One row of a feature file.
struct FeatureRow {
  std::string id;
  Label label = Label::unlabeled;
  ProfileVector vector;
};

/// Tab-separated: id, label, then k reals (dense) or token:count pairs (sparse).
void write_features(std::span<const FeatureRow> rows, std::ostream& out);
void save_features(std::span<const FeatureRow> rows, const std::string& path);
std::vector<FeatureRow> read_features(std::istream& in);
std::vector<FeatureRow> load_features(const std::string& path);

}  // namespace profvec
