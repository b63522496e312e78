#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "profvec/matrix.hpp"
#include "profvec/preprocess.hpp"
#include "profvec/random.hpp"

namespace profvec {

/// Token inventory with dense indices. Index order is descending corpus
/// count, ties broken lexicographically.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Entries must already be in index order; throws on duplicates.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts,
             std::uint64_t total_tokens, std::size_t min_count);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& token(std::uint32_t index) const { return tokens_[index]; }
  std::uint64_t count(std::uint32_t index) const { return counts_[index]; }
  std::optional<std::uint32_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  /// Tokens tallied before min_count filtering.
  std::uint64_t total_tokens() const { return total_tokens_; }
  std::size_t min_count() const { return min_count_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint64_t total_tokens_ = 0;
  std::size_t min_count_ = 0;
};

/// Throws ValidationError("no tokens meet min_count") when nothing survives.
Vocabulary build_vocab(std::span<const TokenSeq> streams, std::size_t min_count);

struct Hyperparams {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t negatives = 10;
  std::size_t epochs = 5;
  double initial_lr = 0.025;
  std::size_t min_count = 5;
  double table_power = 0.75;
  std::size_t table_size = 10'000'000;
  bool dynamic_window = false;
  std::uint64_t seed = 1;

  /// Throws ValidationError when an invariant is violated.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

/// Unigram^power sampling table.
class NegativeTable {
 public:
  NegativeTable() = default;
  explicit NegativeTable(std::vector<std::uint32_t> slots) : slots_(std::move(slots)) {}

  std::uint32_t sample(Rng& rng) const {
    return slots_[static_cast<std::size_t>(rng.index(slots_.size()))];
  }
  std::size_t size() const { return slots_.size(); }
  const std::vector<std::uint32_t>& slots() const { return slots_; }
  /// Slot multiplicity per vocabulary index.
  std::vector<std::size_t> allocation(std::size_t vocab_size) const;

 private:
  std::vector<std::uint32_t> slots_;
};

/// Allocates table_size slots proportionally to count^power with
/// largest-remainder rounding; every token receives at least one slot.
NegativeTable build_negative_table(const Vocabulary& vocab, double table_power,
                                   std::size_t table_size);

struct EmbeddingModel {
  Vocabulary vocab;
  Matrix input_vectors;   // V x k, exposed word vectors
  Matrix output_vectors;  // V x k, context weights
  Hyperparams hyperparams;

  std::size_t dim() const { return input_vectors.cols(); }
  std::span<const double> vector(std::uint32_t index) const { return input_vectors.row(index); }
};

/// Input rows uniform in [-0.5/k, 0.5/k] from the seeded generator, output
/// rows zero.
EmbeddingModel init_model(Vocabulary vocab, const Hyperparams& hp);

/// Negative log objective of one (center, context) pair against its noise
/// words: -log s(u_o.v_c) - sum log s(-u_n.v_c).
double sgns_loss(const EmbeddingModel& model, std::uint32_t center, std::uint32_t context,
                 std::span<const std::uint32_t> negatives);

struct SgnsGradient {
  std::vector<double> center;  // d loss / d v_center
  /// d loss / d u_row for every distinct touched output row.
  std::vector<std::pair<std::uint32_t, std::vector<double>>> output_rows;
};

SgnsGradient sgns_gradient(const EmbeddingModel& model, std::uint32_t center,
                           std::uint32_t context, std::span<const std::uint32_t> negatives);

/// One gradient step of size lr on the rows touched by the pair. Equal to
/// subtracting lr * sgns_gradient. Throws NumericError on non-finite scores.
void sgns_step(EmbeddingModel& model, std::uint32_t center, std::uint32_t context,
               std::span<const std::uint32_t> negatives, double lr);

/// Number of (center, context) pairs a fixed window yields on a stream of
/// the given length.
std::uint64_t pair_count(std::size_t length, std::size_t window);

struct TrainOptions {
  std::size_t workers = 1;
  /// Test hook invoked for every trained pair (vocabulary indices).
  std::function<void(std::uint32_t center, std::uint32_t context)> on_pair;
};

struct TrainReport {
  std::uint64_t scheduled_pairs = 0;
  std::uint64_t trained_pairs = 0;
  std::uint64_t skipped_negatives = 0;
  double final_lr = 0.0;
};

/// Skip-gram with negative sampling over per-profile token streams. Windows
/// never cross stream boundaries; out-of-vocabulary tokens are removed
/// before windowing. Bit-reproducible for a fixed seed with one worker.
EmbeddingModel train_skipgram(std::span<const TokenSeq> streams, const Hyperparams& hp,
                              const TrainOptions& options = {}, TrainReport* report = nullptr);

struct Neighbor {
  std::string token;
  double cosine = 0.0;
};

/// Nearest tokens by cosine over input vectors, query excluded, ties broken
/// lexicographically. Throws OutOfVocabularyError for unknown queries.
std::vector<Neighbor> most_similar(const EmbeddingModel& model, std::string_view token,
                                   std::size_t top_k);

double cosine(std::span<const double> a, std::span<const double> b);

/// Plain-text word vectors: "V k" header then "token f1 ... fk" per row,
/// 9 significant digits. Only input vectors are stored.
void write_embeddings(const EmbeddingModel& model, std::ostream& out);
void save_embeddings(const EmbeddingModel& model, const std::string& path);
EmbeddingModel read_embeddings(std::istream& in);
EmbeddingModel load_embeddings(const std::string& path);

}  // namespace profvec
