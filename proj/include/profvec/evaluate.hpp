#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "profvec/classifier.hpp"
#include "profvec/embed.hpp"
#include "profvec/features.hpp"
#include "profvec/ingest.hpp"
#include "profvec/preprocess.hpp"

namespace profvec {

struct FoldPlan {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::map<std::string, std::size_t> assignment;  // id -> fold

  std::vector<std::string> test_ids(std::size_t fold) const;
};

/// Shuffles each class with the seed (ids sorted first, so input order does
/// not matter) and deals them round-robin. Throws when k < 2, when a class
/// is empty ("degenerate training labels") or smaller than k.
FoldPlan make_folds(std::span<const std::pair<std::string, Label>> labels, std::size_t k,
                    std::uint64_t seed, bool stratified = true);

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Some ratio was 0/0 and was defined as 0.
  bool undefined = false;
  bool operator==(const ClassMetrics&) const = default;
};

struct BinaryMetrics {
  ClassMetrics gang;
  ClassMetrics non_gang;
  bool operator==(const BinaryMetrics&) const = default;
};

/// Gang metrics from (tp, fp, fn); non-gang with the classes swapped.
BinaryMetrics compute_metrics(const ConfusionCounts& confusion);

struct FoldResult {
  std::size_t fold = 0;
  ConfusionCounts confusion;
  BinaryMetrics metrics;
  std::size_t train_size = 0;
  std::size_t vocab_size = 0;
  bool operator==(const FoldResult&) const = default;
};

struct PipelineDescriptor {
  std::string method;
  std::string algorithm;
  std::string variant;  // e.g. "all_channels" for the filtered baseline
  Hyperparams hyperparams;
  TrainConfig train_config;
  std::size_t folds = 0;
  std::uint64_t fold_seed = 0;
  bool stratified = true;
  bool operator==(const PipelineDescriptor&) const = default;
};

struct EvaluationReport {
  PipelineDescriptor pipeline;
  std::vector<FoldResult> folds;
  ConfusionCounts pooled_confusion;
  BinaryMetrics pooled;  // metrics of summed confusions
  BinaryMetrics macro;   // mean of per-fold metrics
  bool operator==(const EvaluationReport&) const = default;
};

/// Fills pooled and macro scopes from the per-fold results.
void finalize_report(EvaluationReport& report);

struct CvCell {
  AggregationMethod method = AggregationMethod::avg_sum_count;
  TrainConfig train_config;
};

struct CvOptions {
  std::size_t workers = 1;  // folds processed concurrently
  /// Keep only profiles whose five channels are all non-empty.
  bool require_all_channels = false;
  /// Observer for the tables each fold fitted (test hook).
  std::function<void(std::size_t fold, const Vocabulary&, const IdfTable&)> on_fold_tables;
};

/// Throws LeakageError when a token occurring only in `test` profiles is in
/// the fold vocabulary, or when the idf table does not match it.
void check_fold_leakage(std::span<const TokenizedProfile* const> train,
                        std::span<const TokenizedProfile* const> test, const Vocabulary& vocab,
                        const IdfTable& idf);

/// Leakage-safe cross validation. Per fold, vocabulary, embeddings and idf
/// come from the training profiles only; every cell shares the fold's
/// embedding model. Throws LeakageError if a token seen only in a fold's
/// test profiles reaches its fitted tables.
std::vector<EvaluationReport> run_cv_grid(std::span<const TokenizedProfile> profiles,
                                          const Hyperparams& hp, std::span<const CvCell> cells,
                                          const FoldPlan& plan, const CvOptions& options = {});

EvaluationReport run_cv(std::span<const TokenizedProfile> profiles, const Hyperparams& hp,
                        AggregationMethod method, const TrainConfig& train_config,
                        const FoldPlan& plan, const CvOptions& options = {});

/// Preprocesses the raw records, then runs run_cv.
EvaluationReport run_cv(const ProfileCollection& profiles, const PreprocessConfig& preprocess,
                        const Hyperparams& hp, AggregationMethod method,
                        const TrainConfig& train_config, const FoldPlan& plan,
                        const CvOptions& options = {});

bool has_all_channels(const TokenizedProfile& profile);

enum class ReportFormat { json, table };
std::optional<ReportFormat> parse_report_format(std::string_view text);

enum class MetricScope { pooled, macro };

/// JSON document or a per-class P/R/F1 text table. Throws on reports without
/// folds.
std::string render_report(std::span<const EvaluationReport> reports, ReportFormat format);
std::string render_report(const EvaluationReport& report, ReportFormat format);
std::string render_table(std::span<const EvaluationReport> reports, MetricScope scope);
std::vector<EvaluationReport> parse_reports(const std::string& json_text);

/// Relative gang-F1 improvement of `candidate` over `reference` (pooled).
double f1_improvement(const EvaluationReport& candidate, const EvaluationReport& reference);

}  // namespace profvec
