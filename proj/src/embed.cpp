#include "profvec/embed.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "profvec/error.hpp"

namespace profvec {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts,
                       std::uint64_t total_tokens, std::size_t min_count)
    : tokens_(std::move(tokens)),
      counts_(std::move(counts)),
      total_tokens_(total_tokens),
      min_count_(min_count) {
  if (tokens_.size() != counts_.size())
    throw ValidationError("vocabulary token and count lists differ in length");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!index_.emplace(tokens_[i], static_cast<std::uint32_t>(i)).second)
      throw ValidationError("duplicate vocabulary token: " + tokens_[i]);
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(std::span<const TokenSeq> streams, std::size_t min_count) {
  std::unordered_map<std::string, std::uint64_t> tally;
  std::uint64_t total = 0;
  for (const auto& stream : streams) {
    for (const auto& t : stream) ++tally[t];
    total += stream.size();
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [token, count] : tally)
    if (count >= min_count) kept.emplace_back(token, count);
  if (kept.empty()) throw ValidationError("no tokens meet min_count");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  tokens.reserve(kept.size());
  counts.reserve(kept.size());
  for (auto& [token, count] : kept) {
    tokens.push_back(std::move(token));
    counts.push_back(count);
  }
  return Vocabulary(std::move(tokens), std::move(counts), total, min_count);
}

void Hyperparams::validate() const {
  if (dim < 1) throw ValidationError("hyperparams: dim must be >= 1");
  if (window < 1) throw ValidationError("hyperparams: window must be >= 1");
  if (negatives < 1) throw ValidationError("hyperparams: negatives must be >= 1");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr))
    throw ValidationError("hyperparams: initial_lr must be positive");
  if (!(table_power > 0.0 && table_power <= 1.0))
    throw ValidationError("hyperparams: table_power must lie in (0, 1]");
  if (table_size < 1) throw ValidationError("hyperparams: table_size must be positive");
}

// ---------------------------------------------------------------------------
// Negative sampling table

std::vector<std::size_t> NegativeTable::allocation(std::size_t vocab_size) const {
  std::vector<std::size_t> out(vocab_size, 0);
  for (auto s : slots_) ++out[s];
  return out;
}

NegativeTable build_negative_table(const Vocabulary& vocab, double table_power,
                                   std::size_t table_size) {
  const std::size_t v = vocab.size();
  if (v == 0) throw ValidationError("negative table: empty vocabulary");
  if (table_size < v)
    throw ValidationError("negative table: table_size " + std::to_string(table_size) +
                          " is smaller than the vocabulary (" + std::to_string(v) + ")");

  std::vector<double> weight(v);
  double total = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    weight[i] = std::pow(static_cast<double>(vocab.count(static_cast<std::uint32_t>(i))),
                         table_power);
    total += weight[i];
  }
  std::vector<std::size_t> alloc(v);
  std::vector<double> remainder(v);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < v; ++i) {
    // Loaded vocabularies carry no counts; sample those uniformly.
    const double quota = total > 0.0 ? static_cast<double>(table_size) * weight[i] / total
                                     : static_cast<double>(table_size) / static_cast<double>(v);
    alloc[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(alloc[i]);
    assigned += alloc[i];
  }
  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < table_size; ++r, ++assigned) ++alloc[order[r % v]];

  // Every token keeps at least one slot, taken from the largest holder.
  for (std::size_t i = 0; i < v; ++i) {
    if (alloc[i] > 0) continue;
    auto donor = std::max_element(alloc.begin(), alloc.end());
    --*donor;
    alloc[i] = 1;
  }

  std::vector<std::uint32_t> slots;
  slots.reserve(table_size);
  for (std::size_t i = 0; i < v; ++i) slots.insert(slots.end(), alloc[i], static_cast<std::uint32_t>(i));
  return NegativeTable(std::move(slots));
}

// ---------------------------------------------------------------------------
// Model and the SGNS objective

EmbeddingModel init_model(Vocabulary vocab, const Hyperparams& hp) {
  hp.validate();
  EmbeddingModel model;
  const std::size_t v = vocab.size();
  model.vocab = std::move(vocab);
  model.hyperparams = hp;
  model.input_vectors = Matrix(v, hp.dim);
  model.output_vectors = Matrix(v, hp.dim, 0.0);
  Rng rng(derive_seed(hp.seed, "embed-init"));
  const double half = 0.5 / static_cast<double>(hp.dim);
  for (double& x : model.input_vectors.data()) x = rng.uniform(-half, half);
  return model;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

void check_index(const EmbeddingModel& model, std::uint32_t idx) {
  if (idx >= model.vocab.size())
    throw ValidationError("sgns: index " + std::to_string(idx) + " outside vocabulary of " +
                          std::to_string(model.vocab.size()));
}

void check_indices(const EmbeddingModel& model, std::uint32_t center, std::uint32_t context,
                   std::span<const std::uint32_t> negatives) {
  check_index(model, center);
  check_index(model, context);
  for (auto n : negatives) check_index(model, n);
}

}  // namespace

double sgns_loss(const EmbeddingModel& model, std::uint32_t center, std::uint32_t context,
                 std::span<const std::uint32_t> negatives) {
  check_indices(model, center, context, negatives);
  const auto vc = model.input_vectors.row(center);
  double loss = -log_sigmoid(dot(model.output_vectors.row(context), vc));
  for (auto n : negatives) loss -= log_sigmoid(-dot(model.output_vectors.row(n), vc));
  return loss;
}

SgnsGradient sgns_gradient(const EmbeddingModel& model, std::uint32_t center,
                           std::uint32_t context, std::span<const std::uint32_t> negatives) {
  check_indices(model, center, context, negatives);
  const std::size_t k = model.dim();
  const auto vc = model.input_vectors.row(center);
  SgnsGradient grad;
  grad.center.assign(k, 0.0);
  std::map<std::uint32_t, std::vector<double>> rows;

  auto accumulate = [&](std::uint32_t target, double label) {
    const auto u = model.output_vectors.row(target);
    // d/df of -log s(f) is s(f) - 1; of -log s(-f) is s(f).
    const double coeff = sigmoid(dot(u, vc)) - label;
    auto& g = rows.try_emplace(target, std::vector<double>(k, 0.0)).first->second;
    for (std::size_t d = 0; d < k; ++d) {
      grad.center[d] += coeff * u[d];
      g[d] += coeff * vc[d];
    }
  };
  accumulate(context, 1.0);
  for (auto n : negatives) accumulate(n, 0.0);
  for (auto& [row, g] : rows) grad.output_rows.emplace_back(row, std::move(g));
  return grad;
}

namespace {

// Element access into the shared matrices. With several workers the rows
// are updated without locks through relaxed atomics, so lost updates are
// possible but reads never tear.
template <bool Shared>
struct Access {
  static double load(const double& x) {
    if constexpr (Shared)
      return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
    else
      return x;
  }
  static void add(double& x, double delta) {
    if constexpr (Shared) {
      std::atomic_ref<double> ref(x);
      ref.store(ref.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
    } else {
      x += delta;
    }
  }
};

struct StepScratch {
  std::vector<std::uint32_t> targets;
  std::vector<double> coeff;
  std::vector<double> center_delta;
};

template <bool Shared>
void sgns_update(Matrix& input, Matrix& output, std::uint32_t center, std::uint32_t context,
                 std::span<const std::uint32_t> negatives, double lr, StepScratch& scratch) {
  using A = Access<Shared>;
  const std::size_t k = input.cols();
  double* vc = input.row(center).data();

  scratch.targets.clear();
  scratch.targets.push_back(context);
  scratch.targets.insert(scratch.targets.end(), negatives.begin(), negatives.end());
  scratch.coeff.resize(scratch.targets.size());
  scratch.center_delta.assign(k, 0.0);

  // Scores use the parameters as they were before this step.
  for (std::size_t j = 0; j < scratch.targets.size(); ++j) {
    const double* u = output.row(scratch.targets[j]).data();
    double f = 0.0;
    for (std::size_t d = 0; d < k; ++d) f += A::load(u[d]) * A::load(vc[d]);
    if (!std::isfinite(f))
      throw NumericError("non-finite score for center " + std::to_string(center) +
                         " and target " + std::to_string(scratch.targets[j]));
    const double label = j == 0 ? 1.0 : 0.0;
    scratch.coeff[j] = lr * (label - sigmoid(f));
    for (std::size_t d = 0; d < k; ++d) scratch.center_delta[d] += scratch.coeff[j] * A::load(u[d]);
  }
  for (std::size_t j = 0; j < scratch.targets.size(); ++j) {
    if (scratch.coeff[j] == 0.0) continue;
    double* u = output.row(scratch.targets[j]).data();
    for (std::size_t d = 0; d < k; ++d) A::add(u[d], scratch.coeff[j] * A::load(vc[d]));
  }
  for (std::size_t d = 0; d < k; ++d) A::add(vc[d], scratch.center_delta[d]);
}

}  // namespace

void sgns_step(EmbeddingModel& model, std::uint32_t center, std::uint32_t context,
               std::span<const std::uint32_t> negatives, double lr) {
  check_indices(model, center, context, negatives);
  if (lr == 0.0) return;
  StepScratch scratch;
  sgns_update<false>(model.input_vectors, model.output_vectors, center, context, negatives,
                     lr, scratch);
}

std::uint64_t pair_count(std::size_t length, std::size_t window) {
  std::uint64_t pairs = 0;
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t lo = t >= window ? t - window : 0;
    const std::size_t hi = std::min(length - 1, t + window);
    pairs += hi - lo;
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Corpus {
  std::vector<std::vector<std::uint32_t>> streams;
  std::uint64_t tokens = 0;
};

Corpus index_streams(std::span<const TokenSeq> streams, const Vocabulary& vocab) {
  Corpus corpus;
  corpus.streams.reserve(streams.size());
  for (const auto& s : streams) {
    std::vector<std::uint32_t> ids;
    ids.reserve(s.size());
    for (const auto& t : s)
      if (auto idx = vocab.find(t)) ids.push_back(*idx);
    corpus.tokens += ids.size();
    corpus.streams.push_back(std::move(ids));
  }
  return corpus;
}

struct Schedule {
  double initial_lr;
  double total;  // scheduled units (pairs, or centers with a dynamic window)
  double lr(double done) const {
    const double frac = total > 0.0 ? done / total : 1.0;
    return initial_lr * std::max(1.0 - frac, 1e-4);
  }
};

struct WorkerResult {
  std::uint64_t pairs = 0;
  std::uint64_t skipped = 0;
  double last_lr = 0.0;
};

template <bool Shared>
void train_range(EmbeddingModel& model, const Corpus& corpus, const NegativeTable& table,
                 std::size_t first, std::size_t last, const Schedule& schedule,
                 std::atomic<std::uint64_t>& progress, Rng& rng, const TrainOptions& options,
                 const std::atomic<bool>& abort, WorkerResult& result) {
  const auto& hp = model.hyperparams;
  StepScratch scratch;
  std::vector<std::uint32_t> negatives;
  negatives.reserve(hp.negatives);
  std::uint64_t local_done = 0;
  std::uint64_t published = 0;
  auto done_so_far = [&]() -> std::uint64_t {
    if constexpr (Shared)
      return progress.load(std::memory_order_relaxed) + (local_done - published);
    else
      return local_done;
  };

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t s = first; s < last; ++s) {
      const auto& stream = corpus.streams[s];
      const std::size_t len = stream.size();
      if constexpr (Shared) {
        if (abort.load(std::memory_order_relaxed)) return;
      }
      for (std::size_t t = 0; t < len; ++t) {
        std::size_t w = hp.window;
        if (hp.dynamic_window) w = hp.window - static_cast<std::size_t>(rng.index(hp.window));
        const std::size_t lo = t >= w ? t - w : 0;
        const std::size_t hi = std::min(len - 1, t + w);
        const std::uint32_t center = stream[t];
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == t) continue;
          const std::uint64_t done = done_so_far();
          const double lr = schedule.lr(static_cast<double>(done));
          const std::uint32_t context = stream[c];
          negatives.clear();
          for (std::size_t n = 0; n < hp.negatives; ++n) {
            std::uint32_t draw = table.sample(rng);
            for (int attempt = 1; draw == context && attempt < 100; ++attempt)
              draw = table.sample(rng);
            if (draw == context)
              ++result.skipped;
            else
              negatives.push_back(draw);
          }
          try {
            sgns_update<Shared>(model.input_vectors, model.output_vectors, center, context,
                                negatives, lr, scratch);
          } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(done) +
                               " (token '" + model.vocab.token(center) + "')");
          }
          if (options.on_pair) options.on_pair(center, context);
          ++result.pairs;
          result.last_lr = lr;
          if (!hp.dynamic_window) ++local_done;
        }
        if (hp.dynamic_window) ++local_done;
      }
      if constexpr (Shared) {
        progress.fetch_add(local_done - published, std::memory_order_relaxed);
        published = local_done;
      }
    }
  }
}

// Contiguous stream ranges with roughly equal token counts.
std::vector<std::size_t> partition(const Corpus& corpus, std::size_t parts) {
  std::vector<std::size_t> bounds{0};
  const double per_part = static_cast<double>(corpus.tokens) / static_cast<double>(parts);
  std::uint64_t acc = 0;
  for (std::size_t s = 0; s < corpus.streams.size() && bounds.size() < parts; ++s) {
    acc += corpus.streams[s].size();
    if (static_cast<double>(acc) >= per_part * static_cast<double>(bounds.size()))
      bounds.push_back(s + 1);
  }
  while (bounds.size() < parts) bounds.push_back(corpus.streams.size());
  bounds.push_back(corpus.streams.size());
  return bounds;
}

}  // namespace

EmbeddingModel train_skipgram(std::span<const TokenSeq> streams, const Hyperparams& hp,
                              const TrainOptions& options, TrainReport* report) {
  hp.validate();
  EmbeddingModel model = init_model(build_vocab(streams, hp.min_count), hp);
  const NegativeTable table = build_negative_table(model.vocab, hp.table_power, hp.table_size);
  const Corpus corpus = index_streams(streams, model.vocab);

  std::uint64_t fixed_pairs = 0;
  for (const auto& s : corpus.streams) fixed_pairs += pair_count(s.size(), hp.window);
  const std::uint64_t per_epoch = hp.dynamic_window ? corpus.tokens : fixed_pairs;
  const Schedule schedule{hp.initial_lr, static_cast<double>(per_epoch * hp.epochs)};

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(options.workers, corpus.streams.size()));
  std::atomic<std::uint64_t> progress{0};
  std::atomic<bool> abort{false};
  std::vector<WorkerResult> results(workers);

  if (workers == 1) {
    Rng rng(derive_seed(hp.seed, "embed-train", 0));
    train_range<false>(model, corpus, table, 0, corpus.streams.size(), schedule, progress, rng,
                       options, abort, results[0]);
  } else {
    const auto bounds = partition(corpus, workers);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    std::mutex hook_mutex;
    TrainOptions shared_options;
    if (options.on_pair)
      shared_options.on_pair = [&](std::uint32_t a, std::uint32_t b) {
        std::lock_guard lock(hook_mutex);
        options.on_pair(a, b);
      };
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          Rng rng(derive_seed(hp.seed, "embed-train", w));
          train_range<true>(model, corpus, table, bounds[w], bounds[w + 1], schedule, progress,
                            rng, shared_options, abort, results[w]);
        } catch (...) {
          errors[w] = std::current_exception();
          abort.store(true);
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  if (report) {
    report->scheduled_pairs = fixed_pairs * hp.epochs;
    report->trained_pairs = 0;
    report->skipped_negatives = 0;
    report->final_lr = hp.initial_lr;
    for (const auto& r : results) {
      report->trained_pairs += r.pairs;
      report->skipped_negatives += r.skipped;
      if (r.pairs) report->final_lr = std::min(report->final_lr, r.last_lr);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Queries

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<Neighbor> most_similar(const EmbeddingModel& model, std::string_view token,
                                   std::size_t top_k) {
  if (top_k < 1) throw ValidationError("most_similar: top_k must be >= 1");
  const auto query = model.vocab.find(token);
  if (!query) throw OutOfVocabularyError(std::string(token));
  const auto q = model.vector(*query);
  std::vector<Neighbor> all;
  all.reserve(model.vocab.size());
  for (std::uint32_t i = 0; i < model.vocab.size(); ++i) {
    if (i == *query) continue;
    all.push_back({model.vocab.token(i), cosine(q, model.vector(i))});
  }
  const std::size_t keep = std::min(top_k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.cosine != b.cosine ? a.cosine > b.cosine : a.token < b.token;
                    });
  all.resize(keep);
  return all;
}

// ---------------------------------------------------------------------------
// Persistence

void write_embeddings(const EmbeddingModel& model, std::ostream& out) {
  const std::size_t v = model.vocab.size();
  const std::size_t k = model.dim();
  out << v << ' ' << k << '\n';
  char buf[32];
  for (std::uint32_t i = 0; i < v; ++i) {
    out << model.vocab.token(i);
    for (double x : model.vector(i)) {
      std::snprintf(buf, sizeof buf, " %.9g", x);
      out << buf;
    }
    out << '\n';
  }
}

void save_embeddings(const EmbeddingModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write embeddings");
  write_embeddings(model, out);
  if (!out) throw IoError(path, "write failed");
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

EmbeddingModel read_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing 'V k' header");
  const auto header = split_spaces(line);
  std::size_t v = 0, k = 0;
  if (header.size() != 2 || !parse_number(header[0], v) || !parse_number(header[1], k))
    throw ParseError(1, "header must be 'V k'");
  if (k == 0) throw ParseError(1, "vector dimension k must be >= 1");
  if (v == 0) throw ParseError(1, "vocabulary size V must be >= 1");

  std::vector<std::string> tokens;
  tokens.reserve(v);
  Matrix vectors(v, k);
  for (std::size_t r = 0; r < v; ++r) {
    ++line_no;
    if (!std::getline(in, line))
      throw ParseError(line_no, "unexpected end of file: header declares " + std::to_string(v) +
                                    " rows, found " + std::to_string(r));
    const auto fields = split_spaces(line);
    if (fields.size() != k + 1)
      throw ParseError(line_no, "expected token and " + std::to_string(k) + " values, found " +
                                    std::to_string(fields.size()) + " fields");
    tokens.emplace_back(fields[0]);
    auto row = vectors.row(r);
    for (std::size_t d = 0; d < k; ++d)
      if (!parse_number(fields[d + 1], row[d]) || !std::isfinite(row[d]))
        throw ParseError(line_no, "invalid value '" + std::string(fields[d + 1]) + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_spaces(line).empty())
      throw ParseError(line_no, "more rows than the header declares");
  }

  EmbeddingModel model;
  std::vector<std::uint64_t> counts(v, 0);
  try {
    model.vocab = Vocabulary(std::move(tokens), std::move(counts), 0, 0);
  } catch (const ValidationError& e) {
    throw ParseError(0, e.what());
  }
  model.hyperparams.dim = k;
  model.input_vectors = std::move(vectors);
  model.output_vectors = Matrix(v, k, 0.0);
  return model;
}

EmbeddingModel load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open embeddings");
  return read_embeddings(in);
}

}  // namespace profvec
