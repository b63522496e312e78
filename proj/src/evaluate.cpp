#include "profvec/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "profvec/error.hpp"
#include "profvec/random.hpp"

namespace profvec {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Folds

std::vector<std::string> FoldPlan::test_ids(std::size_t fold) const {
  std::vector<std::string> ids;
  for (const auto& [id, f] : assignment)
    if (f == fold) ids.push_back(id);
  return ids;
}

FoldPlan make_folds(std::span<const std::pair<std::string, Label>> labels, std::size_t k,
                    std::uint64_t seed, bool stratified) {
  if (k < 2) throw ValidationError("folds: k must be at least 2 (k=" + std::to_string(k) + ")");
  std::vector<std::string> pos, neg;
  std::set<std::string> seen;
  for (const auto& [id, label] : labels) {
    if (!seen.insert(id).second) throw ValidationError("folds: duplicate id " + id);
    if (label == Label::gang)
      pos.push_back(id);
    else if (label == Label::non_gang)
      neg.push_back(id);
  }
  if (pos.empty() || neg.empty()) throw ValidationError("degenerate training labels");
  if (stratified && (k > pos.size() || k > neg.size()))
    throw ValidationError("folds: k=" + std::to_string(k) + " exceeds the size of a class (" +
                          std::to_string(pos.size()) + " gang, " + std::to_string(neg.size()) +
                          " non_gang)");
  if (!stratified && k > pos.size() + neg.size())
    throw ValidationError("folds: k exceeds the number of labeled profiles");

  auto shuffle = [](std::vector<std::string>& ids, Rng& rng) {
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.index(i)]);
  };

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.stratified = stratified;
  if (stratified) {
    Rng rng_pos(derive_seed(seed, "folds-gang"));
    Rng rng_neg(derive_seed(seed, "folds-non_gang"));
    shuffle(pos, rng_pos);
    shuffle(neg, rng_neg);
    for (std::size_t i = 0; i < pos.size(); ++i) plan.assignment[pos[i]] = i % k;
    // Negatives continue the deal where positives stopped so fold sizes
    // stay within one of each other.
    const std::size_t offset = pos.size() % k;
    for (std::size_t i = 0; i < neg.size(); ++i) plan.assignment[neg[i]] = (offset + i) % k;
  } else {
    std::vector<std::string> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    Rng rng(derive_seed(seed, "folds-all"));
    shuffle(all, rng);
    for (std::size_t i = 0; i < all.size(); ++i) plan.assignment[all[i]] = i % k;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  ClassMetrics m;
  m.precision = ratio(tp, tp + fp, m.undefined);
  m.recall = ratio(tp, tp + fn, m.undefined);
  if (m.precision + m.recall == 0.0) {
    m.undefined = true;
    m.f1 = 0.0;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

}  // namespace

BinaryMetrics compute_metrics(const ConfusionCounts& c) {
  return {class_metrics(c.tp, c.fp, c.fn), class_metrics(c.tn, c.fn, c.fp)};
}

void finalize_report(EvaluationReport& report) {
  if (report.folds.empty()) throw ValidationError("no folds");
  report.pooled_confusion = {};
  for (const auto& f : report.folds) report.pooled_confusion += f.confusion;
  report.pooled = compute_metrics(report.pooled_confusion);

  auto mean = [&](auto member) {
    ClassMetrics m;
    for (const auto& f : report.folds) {
      const ClassMetrics& c = f.metrics.*member;
      m.precision += c.precision;
      m.recall += c.recall;
      m.f1 += c.f1;
      m.undefined = m.undefined || c.undefined;
    }
    const double n = static_cast<double>(report.folds.size());
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    return m;
  };
  report.macro.gang = mean(&BinaryMetrics::gang);
  report.macro.non_gang = mean(&BinaryMetrics::non_gang);
}

// ---------------------------------------------------------------------------
// Cross validation

bool has_all_channels(const TokenizedProfile& profile) {
  return std::all_of(profile.channels().begin(), profile.channels().end(),
                     [](const TokenSeq& c) { return !c.empty(); });
}

namespace {

struct FoldOutput {
  std::vector<FoldResult> per_cell;
};

Matrix feature_matrix(const std::vector<const TokenizedProfile*>& rows, AggregationMethod method,
                      const EmbeddingModel* model, const Vocabulary& vocab, const IdfTable& idf) {
  Matrix x;
  for (const auto* p : rows) {
    if (method == AggregationMethod::baseline_tf) {
      x.push_row(baseline_dense(*p, vocab));
    } else {
      const auto stats = compute_term_stats(*p, vocab, &idf);
      x.push_row(aggregate(stats, *model, method).dense);
    }
  }
  return x;
}

}  // namespace

void check_fold_leakage(std::span<const TokenizedProfile* const> train,
                        std::span<const TokenizedProfile* const> test, const Vocabulary& vocab,
                        const IdfTable& idf) {
  std::unordered_set<std::string> train_tokens;
  for (const auto* p : train) train_tokens.insert(p->merged_tokens().begin(), p->merged_tokens().end());
  if (idf.idf.size() != vocab.size())
    throw LeakageError("idf table is not aligned with the fold vocabulary");
  for (const auto* p : test)
    for (const auto& t : p->merged_tokens())
      if (!train_tokens.count(t) && vocab.contains(t))
        throw LeakageError("token '" + t + "' occurs only in test profiles but entered the fold tables");
}

namespace {

FoldOutput run_fold(std::size_t fold, const std::vector<const TokenizedProfile*>& train,
                    const std::vector<const TokenizedProfile*>& test, const Hyperparams& hp,
                    std::span<const CvCell> cells, const CvOptions& options) {
  std::vector<TokenSeq> streams;
  streams.reserve(train.size());
  for (const auto* p : train) streams.push_back(p->merged_tokens());

  const bool needs_embedding = std::any_of(cells.begin(), cells.end(), [](const CvCell& c) {
    return c.method != AggregationMethod::baseline_tf;
  });
  std::optional<EmbeddingModel> model;
  Vocabulary baseline_vocab;
  if (needs_embedding) {
    Hyperparams fold_hp = hp;
    fold_hp.seed = derive_seed(hp.seed, "cv-embed", fold);
    model = train_skipgram(streams, fold_hp);
  } else {
    baseline_vocab = build_vocab(streams, hp.min_count);
  }
  const Vocabulary& vocab = model ? model->vocab : baseline_vocab;

  std::vector<TokenizedProfile> train_copy;
  train_copy.reserve(train.size());
  for (const auto* p : train) train_copy.push_back(*p);
  const IdfTable idf = build_idf(train_copy, vocab);
  check_fold_leakage(train, test, vocab, idf);
  if (options.on_fold_tables) options.on_fold_tables(fold, vocab, idf);

  std::vector<Label> y_train, y_test;
  for (const auto* p : train) y_train.push_back(p->label());
  for (const auto* p : test) y_test.push_back(p->label());

  FoldOutput out;
  for (const auto& cell : cells) {
    // The baseline columns come from the embedding vocabulary when one was
    // trained, so both kinds of cell see the same fold vocabulary.
    const Matrix x_train = feature_matrix(train, cell.method, model ? &*model : nullptr, vocab, idf);
    const Matrix x_test = feature_matrix(test, cell.method, model ? &*model : nullptr, vocab, idf);
    TrainConfig cfg = cell.train_config;
    cfg.seed = derive_seed(cell.train_config.seed, "cv-classifier", fold);
    cfg.workers = 1;
    const TrainedModel clf = profvec::train(x_train, y_train, cfg);
    const Predictions pred = predict(clf, x_test);

    FoldResult r;
    r.fold = fold;
    r.train_size = train.size();
    r.vocab_size = vocab.size();
    for (std::size_t i = 0; i < y_test.size(); ++i) {
      const bool actual = y_test[i] == Label::gang;
      const bool guess = pred.labels[i] == Label::gang;
      if (actual && guess) ++r.confusion.tp;
      else if (!actual && guess) ++r.confusion.fp;
      else if (!actual && !guess) ++r.confusion.tn;
      else ++r.confusion.fn;
    }
    r.metrics = compute_metrics(r.confusion);
    out.per_cell.push_back(r);
  }
  return out;
}

template <typename E>
[[noreturn]] void rethrow_with_fold(std::size_t fold, const E& e) {
  throw E("fold " + std::to_string(fold) + ": " + e.what());
}

}  // namespace

std::vector<EvaluationReport> run_cv_grid(std::span<const TokenizedProfile> profiles,
                                          const Hyperparams& hp, std::span<const CvCell> cells,
                                          const FoldPlan& plan, const CvOptions& options) {
  if (cells.empty()) throw ValidationError("cv: no method/algorithm cells requested");
  if (plan.k < 2) throw ValidationError("cv: fold plan needs k >= 2");

  std::unordered_map<std::string, const TokenizedProfile*> by_id;
  for (const auto& p : profiles) by_id.emplace(p.id(), &p);

  // Fold members in id order so the result does not depend on input order.
  std::vector<std::vector<const TokenizedProfile*>> members(plan.k);
  for (const auto& [id, fold] : plan.assignment) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("cv: fold plan references unknown id " + id);
    if (it->second->label() == Label::unlabeled)
      throw ValidationError("cv: fold plan references unlabeled profile " + id);
    if (options.require_all_channels && !has_all_channels(*it->second))
      throw ValidationError("cv: profile " + id + " lacks a feature channel");
    if (fold >= plan.k) throw ValidationError("cv: fold index out of range for " + id);
    members[fold].push_back(it->second);
  }

  std::vector<FoldOutput> outputs(plan.k);
  auto run_one = [&](std::size_t fold) {
    std::vector<const TokenizedProfile*> train;
    for (std::size_t f = 0; f < plan.k; ++f)
      if (f != fold) train.insert(train.end(), members[f].begin(), members[f].end());
    std::sort(train.begin(), train.end(),
              [](const auto* a, const auto* b) { return a->id() < b->id(); });
    try {
      outputs[fold] = run_fold(fold, train, members[fold], hp, cells, options);
    } catch (const LeakageError& e) {
      rethrow_with_fold(fold, e);
    } catch (const NumericError& e) {
      rethrow_with_fold(fold, e);
    } catch (const ValidationError& e) {
      rethrow_with_fold(fold, e);
    } catch (const std::exception& e) {
      throw Error("fold " + std::to_string(fold) + ": " + e.what());
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, plan.k));
  if (workers == 1) {
    for (std::size_t f = 0; f < plan.k; ++f) run_one(f);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w)
      threads.emplace_back([&, w] {
        try {
          for (std::size_t f = w; f < plan.k; f += workers) run_one(f);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<EvaluationReport> reports;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    EvaluationReport report;
    report.pipeline.method = std::string(to_string(cells[c].method));
    report.pipeline.algorithm = std::string(to_string(cells[c].train_config.algorithm));
    report.pipeline.variant = options.require_all_channels ? "all_channels" : "";
    report.pipeline.hyperparams = hp;
    report.pipeline.train_config = cells[c].train_config;
    report.pipeline.train_config.workers = 1;
    report.pipeline.folds = plan.k;
    report.pipeline.fold_seed = plan.seed;
    report.pipeline.stratified = plan.stratified;
    for (std::size_t f = 0; f < plan.k; ++f) report.folds.push_back(outputs[f].per_cell[c]);
    finalize_report(report);
    reports.push_back(std::move(report));
  }
  return reports;
}

EvaluationReport run_cv(std::span<const TokenizedProfile> profiles, const Hyperparams& hp,
                        AggregationMethod method, const TrainConfig& train_config,
                        const FoldPlan& plan, const CvOptions& options) {
  const CvCell cell{method, train_config};
  return run_cv_grid(profiles, hp, std::span(&cell, 1), plan, options).front();
}

EvaluationReport run_cv(const ProfileCollection& profiles, const PreprocessConfig& preprocess,
                        const Hyperparams& hp, AggregationMethod method,
                        const TrainConfig& train_config, const FoldPlan& plan,
                        const CvOptions& options) {
  const auto tokenized = preprocess_all(profiles, preprocess);
  return run_cv(tokenized, hp, method, train_config, plan, options);
}

// ---------------------------------------------------------------------------
// Rendering

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::json;
  if (text == "table" || text == "text") return ReportFormat::table;
  return std::nullopt;
}

namespace {

json metrics_json(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"undefined", m.undefined}};
}

json binary_json(const BinaryMetrics& m) {
  return {{"gang", metrics_json(m.gang)}, {"non_gang", metrics_json(m.non_gang)}};
}

json confusion_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

ClassMetrics metrics_from(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>(),
          j.at("undefined").get<bool>()};
}

BinaryMetrics binary_from(const json& j) {
  return {metrics_from(j.at("gang")), metrics_from(j.at("non_gang"))};
}

ConfusionCounts confusion_from(const json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
          j.at("tn").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
}

json report_json(const EvaluationReport& r) {
  const auto& p = r.pipeline;
  const auto& hp = p.hyperparams;
  const auto& tc = p.train_config;
  json pipeline = {
      {"method", p.method},
      {"algorithm", p.algorithm},
      {"variant", p.variant},
      {"folds", p.folds},
      {"fold_seed", p.fold_seed},
      {"stratified", p.stratified},
      {"hyperparams",
       {{"dim", hp.dim},
        {"window", hp.window},
        {"negatives", hp.negatives},
        {"epochs", hp.epochs},
        {"initial_lr", hp.initial_lr},
        {"min_count", hp.min_count},
        {"table_power", hp.table_power},
        {"table_size", hp.table_size},
        {"dynamic_window", hp.dynamic_window},
        {"seed", hp.seed}}},
      {"train_config",
       {{"algorithm", to_string(tc.algorithm)},
        {"l2_strength", tc.l2_strength},
        {"max_iters", tc.max_iters},
        {"tolerance", tc.tolerance},
        {"trees", tc.trees},
        {"max_depth", tc.max_depth},
        {"features_per_split", tc.features_per_split},
        {"seed", tc.seed}}}};
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold},
                     {"train_size", f.train_size},
                     {"vocab_size", f.vocab_size},
                     {"confusion", confusion_json(f.confusion)},
                     {"metrics", binary_json(f.metrics)}});
  return {{"pipeline", pipeline},
          {"folds", folds},
          {"pooled_confusion", confusion_json(r.pooled_confusion)},
          {"pooled", binary_json(r.pooled)},
          {"macro", binary_json(r.macro)}};
}

EvaluationReport report_from(const json& j) {
  EvaluationReport r;
  const auto& p = j.at("pipeline");
  r.pipeline.method = p.at("method").get<std::string>();
  r.pipeline.algorithm = p.at("algorithm").get<std::string>();
  r.pipeline.variant = p.at("variant").get<std::string>();
  r.pipeline.folds = p.at("folds").get<std::size_t>();
  r.pipeline.fold_seed = p.at("fold_seed").get<std::uint64_t>();
  r.pipeline.stratified = p.at("stratified").get<bool>();
  const auto& h = p.at("hyperparams");
  auto& hp = r.pipeline.hyperparams;
  hp.dim = h.at("dim").get<std::size_t>();
  hp.window = h.at("window").get<std::size_t>();
  hp.negatives = h.at("negatives").get<std::size_t>();
  hp.epochs = h.at("epochs").get<std::size_t>();
  hp.initial_lr = h.at("initial_lr").get<double>();
  hp.min_count = h.at("min_count").get<std::size_t>();
  hp.table_power = h.at("table_power").get<double>();
  hp.table_size = h.at("table_size").get<std::size_t>();
  hp.dynamic_window = h.at("dynamic_window").get<bool>();
  hp.seed = h.at("seed").get<std::uint64_t>();
  const auto& t = p.at("train_config");
  auto& tc = r.pipeline.train_config;
  auto algo = parse_algorithm(t.at("algorithm").get<std::string>());
  if (!algo) throw ParseError(0, "report: unknown algorithm");
  tc.algorithm = *algo;
  tc.l2_strength = t.at("l2_strength").get<double>();
  tc.max_iters = t.at("max_iters").get<std::size_t>();
  tc.tolerance = t.at("tolerance").get<double>();
  tc.trees = t.at("trees").get<std::size_t>();
  tc.max_depth = t.at("max_depth").get<std::size_t>();
  tc.features_per_split = t.at("features_per_split").get<std::size_t>();
  tc.seed = t.at("seed").get<std::uint64_t>();
  for (const auto& f : j.at("folds")) {
    FoldResult fr;
    fr.fold = f.at("fold").get<std::size_t>();
    fr.train_size = f.at("train_size").get<std::size_t>();
    fr.vocab_size = f.at("vocab_size").get<std::size_t>();
    fr.confusion = confusion_from(f.at("confusion"));
    fr.metrics = binary_from(f.at("metrics"));
    r.folds.push_back(fr);
  }
  r.pooled_confusion = confusion_from(j.at("pooled_confusion"));
  r.pooled = binary_from(j.at("pooled"));
  r.macro = binary_from(j.at("macro"));
  return r;
}

std::string algorithm_label(const std::string& algorithm) {
  if (algorithm == "logreg") return "LR";
  if (algorithm == "random_forest") return "RF";
  if (algorithm == "svm") return "SVM";
  return algorithm;
}

std::string model_label(const PipelineDescriptor& p) {
  if (p.method == "baseline_tf") return p.variant == "all_channels" ? "Baseline Model(2)" : "Baseline Model(1)";
  return p.variant.empty() ? p.method : p.method + " [" + p.variant + "]";
}

}  // namespace

std::string render_table(std::span<const EvaluationReport> reports, MetricScope scope) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-10s | %9s %9s %9s | %9s %9s %9s\n", "Model",
                "Classifier", "Gang P", "Gang R", "Gang F1", "NonGang P", "NonGang R",
                "NonGang F1");
  out << line;
  out << std::string(std::char_traits<char>::length(line) - 1, '-') << '\n';
  std::vector<std::string> warnings;
  for (const auto& r : reports) {
    if (r.folds.empty()) throw ValidationError("no folds");
    const BinaryMetrics& m = scope == MetricScope::pooled ? r.pooled : r.macro;
    std::snprintf(line, sizeof line, "%-28s %-10s | %9.4f %9.4f %9.4f | %9.4f %9.4f %9.4f\n",
                  model_label(r.pipeline).c_str(), algorithm_label(r.pipeline.algorithm).c_str(),
                  m.gang.precision, m.gang.recall, m.gang.f1, m.non_gang.precision,
                  m.non_gang.recall, m.non_gang.f1);
    out << line;
    if (m.gang.undefined || m.non_gang.undefined)
      warnings.push_back(model_label(r.pipeline) + " / " + algorithm_label(r.pipeline.algorithm));
  }
  for (const auto& w : warnings) out << "warning: " << w << ": 0/0 metric defined as 0\n";
  return out.str();
}

std::string render_report(std::span<const EvaluationReport> reports, ReportFormat format) {
  if (reports.empty()) throw ValidationError("no folds");
  for (const auto& r : reports)
    if (r.folds.empty()) throw ValidationError("no folds");
  if (format == ReportFormat::json) {
    json doc;
    doc["format"] = "profvec-report";
    doc["version"] = 1;
    doc["reports"] = json::array();
    for (const auto& r : reports) doc["reports"].push_back(report_json(r));
    return doc.dump(2) + "\n";
  }
  std::string text = "Scope: pooled (confusions summed over folds)\n";
  text += render_table(reports, MetricScope::pooled);
  text += "\nScope: macro (mean of per-fold metrics)\n";
  text += render_table(reports, MetricScope::macro);
  return text;
}

std::string render_report(const EvaluationReport& report, ReportFormat format) {
  return render_report(std::span(&report, 1), format);
}

std::vector<EvaluationReport> parse_reports(const std::string& json_text) {
  try {
    const json doc = json::parse(json_text);
    if (doc.value("format", "") != "profvec-report") throw ParseError(0, "not a profvec report");
    if (doc.at("version").get<int>() != 1) throw ParseError(0, "unsupported report version");
    std::vector<EvaluationReport> out;
    for (const auto& r : doc.at("reports")) out.push_back(report_from(r));
    return out;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("report schema mismatch: ") + e.what());
  }
}

double f1_improvement(const EvaluationReport& candidate, const EvaluationReport& reference) {
  const double ref = reference.pooled.gang.f1;
  if (ref == 0.0) throw ValidationError("reference gang F1 is zero");
  return candidate.pooled.gang.f1 / ref - 1.0;
}

}  // namespace profvec
