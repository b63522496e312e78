#include "profvec/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "profvec/classifier.hpp"
#include "profvec/embed.hpp"
#include "profvec/error.hpp"
#include "profvec/evaluate.hpp"
#include "profvec/features.hpp"
#include "profvec/ingest.hpp"
#include "profvec/preprocess.hpp"
#include "profvec/random.hpp"

namespace profvec::cli {

namespace fs = std::filesystem;

std::map<std::string, std::string> read_flat_config(std::istream& in) {
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  };
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    values[key] = value;
  }
  return values;
}

std::map<std::string, std::string> load_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  return read_flat_config(in);
}

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

constexpr std::string_view kConfigFlags[] = {"--config", "--embed-config", "--preprocess-config"};

// Config entries become `--key=value` arguments unless the command line
// already names that flag, which gives flag > config file > default.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::set<std::string> given;
  std::vector<std::string> configs;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string name = a.substr(0, eq);
    given.insert(name);
    if (std::find(std::begin(kConfigFlags), std::end(kConfigFlags), name) == std::end(kConfigFlags))
      continue;
    if (eq != std::string::npos)
      configs.push_back(a.substr(eq + 1));
    else if (i + 1 < args.size())
      configs.push_back(args[i + 1]);
  }
  std::vector<std::string> out = args;
  for (const auto& path : configs) {
    for (const auto& [key, value] : load_flat_config(path)) {
      std::string flag = "--" + key;
      std::replace(flag.begin() + 2, flag.end(), '_', '-');
      if (!given.insert(flag).second) continue;
      out.push_back(flag + "=" + value);
    }
  }
  return out;
}

void require_file(const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError(path, "input file does not exist");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot write file");
  out << text;
  if (!out) throw IoError(path, "write failed");
}

std::string version_text() {
  return "profvec " + std::string(kVersion) +
         " (profiles jsonl v1, embeddings text v1, features v1, classifier json v1, report json v1)";
}

struct Common {
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  std::string config;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--config", c.config, "Flat key = value file with defaults for any flag");
}

void add_embed_options(CLI::App* cmd, Hyperparams& hp) {
  cmd->add_option("--dim", hp.dim, "Embedding dimension");
  cmd->add_option("--window", hp.window, "Context window radius");
  cmd->add_option("--negatives", hp.negatives, "Negative samples per pair");
  cmd->add_option("--epochs", hp.epochs, "Passes over the corpus");
  cmd->add_option("--min-count", hp.min_count, "Vocabulary frequency threshold");
  cmd->add_option("--lr", hp.initial_lr, "Initial learning rate");
  cmd->add_option("--table-power", hp.table_power, "Noise distribution exponent");
  cmd->add_option("--table-size", hp.table_size, "Negative sampling table size");
  cmd->add_flag("--dynamic-window", hp.dynamic_window, "Sample the window radius per center");
}

void add_train_options(CLI::App* cmd, TrainConfig& tc) {
  cmd->add_option("--l2", tc.l2_strength, "L2 penalty (inverse of C)");
  cmd->add_option("--max-iters", tc.max_iters, "Optimizer iteration cap");
  cmd->add_option("--tol", tc.tolerance, "Gradient norm tolerance");
  cmd->add_option("--trees", tc.trees, "Random forest size");
  cmd->add_option("--max-depth", tc.max_depth, "Tree depth limit, 0 for none");
  cmd->add_option("--mtry", tc.features_per_split, "Features tried per split, 0 for ceil(sqrt(d))");
}

struct PreprocessPaths {
  std::string stopwords;
  std::string seeds;
  std::string emoji_aliases;
  bool no_stem = false;
  std::string config;
};

void add_preprocess_options(CLI::App* cmd, PreprocessPaths& p, bool separate_config) {
  cmd->add_option("--stopwords", p.stopwords, "Stopword list, one per line");
  cmd->add_option("--seeds", p.seeds, "Seed words removed before features are built");
  cmd->add_option("--emoji-aliases", p.emoji_aliases, "Emoji alias table");
  cmd->add_flag("--no-stem", p.no_stem, "Skip stemming");
  if (separate_config) cmd->add_option("--preprocess-config", p.config, "Preprocessing config file");
}

PreprocessConfig build_preprocess(const PreprocessPaths& p) {
  for (const auto* path : {&p.stopwords, &p.seeds, &p.emoji_aliases}) require_file(*path);
  PreprocessConfig cfg = PreprocessConfig::defaults();
  if (!p.stopwords.empty()) cfg.stopwords = load_word_list(p.stopwords);
  if (!p.seeds.empty()) cfg.seed_words = load_word_list(p.seeds);
  if (!p.emoji_aliases.empty()) cfg.emoji_alias = load_emoji_aliases(p.emoji_aliases);
  cfg.stem = !p.no_stem;
  return cfg;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) items.push_back(item.substr(b, e - b + 1));
  }
  return items;
}

SynthSpec load_synth_spec(const std::string& path) {
  SynthSpec spec = SynthSpec::with_default_vocab();
  if (path.empty()) return spec;
  for (const auto& [key, value] : load_flat_config(path)) {
    auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
    try {
      if (key == "n_pos") spec.n_pos = as_size();
      else if (key == "n_neg") spec.n_neg = as_size();
      else if (key == "tweets_min") spec.tweets_min = as_size();
      else if (key == "tweets_max") spec.tweets_max = as_size();
      else if (key == "tokens_min") spec.tokens_min = as_size();
      else if (key == "tokens_max") spec.tokens_max = as_size();
      else if (key == "signal_rate") spec.signal_rate = std::stod(value);
      else if (key == "image_rate") spec.image_rate = std::stod(value);
      else if (key == "video_rate") spec.video_rate = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "vocab_pos") spec.vocab_pos = split_list(value);
      else if (key == "vocab_neg") spec.vocab_neg = split_list(value);
      else if (key == "vocab_shared") spec.vocab_shared = split_list(value);
      else throw ValidationError("synth spec: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ValidationError("synth spec: invalid value for '" + key + "': " + value);
    }
  }
  return spec;
}

// Raw profile records and tokenized profiles share the line format; only
// tokenized records carry an "emoji" channel.
bool looks_tokenized(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      return line.find("\"emoji\"") != std::string::npos;
  return false;
}

std::vector<TokenizedProfile> load_any_profiles(const std::string& path,
                                                const PreprocessConfig& cfg) {
  if (looks_tokenized(path)) return load_tokenized(path);
  return preprocess_all(load_profiles(path), cfg);
}

std::vector<TokenSeq> streams_of(const std::vector<TokenizedProfile>& profiles) {
  std::vector<TokenSeq> streams;
  streams.reserve(profiles.size());
  for (const auto& p : profiles) streams.push_back(p.merged_tokens());
  return streams;
}

std::vector<std::pair<std::string, Label>> labeled_ids(const std::vector<TokenizedProfile>& profiles) {
  std::vector<std::pair<std::string, Label>> ids;
  for (const auto& p : profiles)
    if (p.label() != Label::unlabeled) ids.emplace_back(p.id(), p.label());
  return ids;
}

// Dense matrix from feature rows; sparse rows are laid out over `names`.
Matrix feature_matrix(const std::vector<FeatureRow>& rows, const std::vector<std::string>& names,
                      std::size_t dense_dim) {
  Matrix x;
  for (const auto& r : rows) {
    if (r.vector.method == AggregationMethod::baseline_tf) {
      std::vector<double> row(names.size(), 0.0);
      for (const auto& [token, count] : r.vector.sparse) {
        auto it = std::lower_bound(names.begin(), names.end(), token);
        if (it != names.end() && *it == token) row[it - names.begin()] = count;
      }
      x.push_row(row);
    } else {
      if (r.vector.dense.size() != dense_dim)
        throw ValidationError("features: row " + r.id + " has " +
                              std::to_string(r.vector.dense.size()) + " values, expected " +
                              std::to_string(dense_dim));
      x.push_row(r.vector.dense);
    }
  }
  return x;
}

std::vector<std::string> parse_list_arg(const std::string& text, const std::string& all_word,
                                        const std::vector<std::string>& all_values) {
  if (text == all_word) return all_values;
  return split_list(text);
}

}  // namespace

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Profile embedding classification pipeline", "profvec"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_text());
  app.fallthrough(false);

  Common common;
  Hyperparams hp;
  TrainConfig tc;
  PreprocessPaths pp;
  std::function<void()> run;

  // ingest
  std::string profiles_path, tags_path, out_path;
  bool validate_only = false;
  auto* ingest = app.add_subcommand("ingest", "Load and validate a profiles file");
  ingest->add_option("--profiles", profiles_path, "Profiles file (JSON lines)")->required();
  ingest->add_option("--tags", tags_path, "Image tags file (JSON lines)");
  ingest->add_flag("--validate", validate_only, "Only validate; print the label tally");
  ingest->add_option("--out", out_path, "Write the merged collection here");
  add_common(ingest, common);
  ingest->callback([&] {
    run = [&] {
      require_file(profiles_path);
      require_file(tags_path);
      ProfileCollection profiles = load_profiles(profiles_path);
      if (!tags_path.empty()) profiles = attach_image_tags(profiles, load_tags(tags_path));
      const auto& c = profiles.counts();
      out << "profiles\t" << profiles.size() << "\ngang\t" << c.gang << "\nnon_gang\t"
          << c.non_gang << "\nunlabeled\t" << c.unlabeled << '\n';
      if (!validate_only && !out_path.empty()) save_profiles(profiles, out_path);
    };
  });

  // synth
  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "Generate the planted-signal synthetic collection");
  synth->add_option("--spec", spec_path, "Synthetic collection spec (key = value)");
  synth->add_option("--out", out_path, "Output profiles file")->required();
  add_common(synth, common);
  synth->callback([&] {
    run = [&] {
      require_file(spec_path);
      SynthSpec spec = load_synth_spec(spec_path);
      if (synth->count("--seed")) spec.seed = common.seed;
      save_profiles(synthesize_profiles(spec), out_path);
    };
  });

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Tokenize, filter and stem profiles");
  prep->add_option("--profiles", profiles_path, "Profiles file")->required();
  prep->add_option("--out", out_path, "Tokenized output file")->required();
  add_preprocess_options(prep, pp, false);
  add_common(prep, common);
  prep->callback([&] {
    run = [&] {
      require_file(profiles_path);
      const auto cfg = build_preprocess(pp);
      save_tokenized(preprocess_all(load_profiles(profiles_path), cfg), out_path);
    };
  });

  // train-embed
  std::string idf_out;
  auto* embed = app.add_subcommand("train-embed", "Train skip-gram embeddings");
  embed->add_option("--profiles", profiles_path, "Tokenized profiles")->required();
  embed->add_option("--out", out_path, "Embedding file")->required();
  embed->add_option("--idf-out", idf_out, "Also write the idf table of these profiles");
  embed->add_option("--embed-config", common.config, "Embedding config file");
  add_embed_options(embed, hp);
  add_common(embed, common);
  embed->callback([&] {
    run = [&] {
      require_file(profiles_path);
      const auto profiles = load_tokenized(profiles_path);
      Hyperparams h = hp;
      h.seed = derive_seed(common.seed, "embed");
      TrainOptions opts;
      opts.workers = common.workers;
      const auto streams = streams_of(profiles);
      const EmbeddingModel model = train_skipgram(streams, h, opts);
      save_embeddings(model, out_path);
      if (!idf_out.empty()) save_idf(build_idf(profiles, model.vocab), model.vocab, idf_out);
    };
  });

  // nearest
  std::string model_path, token;
  std::size_t top = 10;
  auto* nearest = app.add_subcommand("nearest", "Nearest tokens by cosine similarity");
  nearest->add_option("--model", model_path, "Embedding file")->required();
  nearest->add_option("--token", token, "Query token")->required();
  nearest->add_option("--top", top, "Number of neighbours");
  add_common(nearest, common);
  nearest->callback([&] {
    run = [&] {
      require_file(model_path);
      const auto model = load_embeddings(model_path);
      char buf[64];
      for (const auto& n : most_similar(model, token, top)) {
        std::snprintf(buf, sizeof buf, "%.6f", n.cosine);
        out << n.token << '\t' << buf << '\n';
      }
    };
  });

  // vectorize
  std::string method_text = "avg_sum_count", idf_path;
  auto* vec = app.add_subcommand("vectorize", "Build profile feature vectors");
  vec->add_option("--profiles", profiles_path, "Tokenized profiles")->required();
  vec->add_option("--model", model_path, "Embedding file")->required();
  vec->add_option("--method", method_text, "sum|avg|sum_count|sum_tfidf|avg_sum_count|baseline_tf");
  vec->add_option("--idf", idf_path, "idf table (needed by sum_tfidf)");
  vec->add_option("--out", out_path, "Feature file")->required();
  add_common(vec, common);
  vec->callback([&] {
    run = [&] {
      require_file(profiles_path);
      require_file(model_path);
      require_file(idf_path);
      const auto method = parse_method(method_text);
      if (!method) throw ValidationError("unknown method '" + method_text + "'");
      const auto model = load_embeddings(model_path);
      std::optional<IdfTable> idf;
      if (!idf_path.empty()) idf = load_idf(idf_path, model.vocab);
      if (*method == AggregationMethod::sum_tfidf && !idf)
        throw ValidationError("sum_tfidf needs --idf");
      std::vector<FeatureRow> rows;
      for (const auto& p : load_tokenized(profiles_path))
        rows.push_back({p.id(), p.label(), vectorize(p, model, *method, idf ? &*idf : nullptr)});
      save_features(rows, out_path);
    };
  });

  // train-clf
  std::string features_path, algo_text = "logreg";
  auto* tclf = app.add_subcommand("train-clf", "Train a classifier on a feature file");
  tclf->add_option("--features", features_path, "Feature file")->required();
  tclf->add_option("--algo", algo_text, "logreg|svm|rf");
  tclf->add_option("--out", out_path, "Model file")->required();
  add_train_options(tclf, tc);
  add_common(tclf, common);
  tclf->callback([&] {
    run = [&] {
      require_file(features_path);
      const auto algo = parse_algorithm(algo_text);
      if (!algo) throw ValidationError("unknown algorithm '" + algo_text + "'");
      std::vector<FeatureRow> rows;
      for (auto& r : load_features(features_path))
        if (r.label != Label::unlabeled) rows.push_back(std::move(r));
      if (rows.empty()) throw ValidationError("no labeled rows in " + features_path);
      std::vector<std::string> names;
      const bool sparse = rows.front().vector.method == AggregationMethod::baseline_tf;
      if (sparse) {
        std::set<std::string> all;
        for (const auto& r : rows)
          for (const auto& [t, c] : r.vector.sparse) all.insert(t);
        names.assign(all.begin(), all.end());
      }
      const Matrix x = feature_matrix(rows, names, rows.front().vector.dense.size());
      std::vector<Label> y;
      for (const auto& r : rows) y.push_back(r.label);
      TrainConfig cfg = tc;
      cfg.algorithm = *algo;
      cfg.seed = derive_seed(common.seed, "classifier");
      cfg.workers = common.workers;
      TrainedModel model = train(x, y, cfg);
      model.feature_names = names;
      save_model(model, out_path);
    };
  });

  // predict
  std::string clf_path;
  auto* pred = app.add_subcommand("predict", "Score a feature file with a trained classifier");
  pred->add_option("--clf", clf_path, "Model file")->required();
  pred->add_option("--features", features_path, "Feature file")->required();
  pred->add_option("--out", out_path, "Scores file (id, predicted label, score)")->required();
  add_common(pred, common);
  pred->callback([&] {
    run = [&] {
      require_file(clf_path);
      require_file(features_path);
      const TrainedModel model = load_model(clf_path);
      const auto rows = load_features(features_path);
      const Matrix x = feature_matrix(rows, model.feature_names, model.dim);
      const Predictions p = predict(model, x);
      std::ostringstream text;
      char buf[40];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", p.scores[i]);
        text << rows[i].id << '\t' << to_string(p.labels[i]) << '\t' << buf << '\n';
      }
      write_text(out_path, text.str());
    };
  });

  // cv and demo share the grid runner.
  std::size_t folds = 10;
  bool no_stratify = false, all_channels = false;
  std::string report_path, table_path, out_dir = "demo-out";

  auto cells_for = [&](const std::vector<std::string>& methods,
                       const std::vector<std::string>& algos) {
    std::vector<CvCell> cells;
    for (const auto& m : methods) {
      const auto method = parse_method(m);
      if (!method) throw ValidationError("unknown method '" + m + "'");
      for (const auto& a : algos) {
        const auto algo = parse_algorithm(a);
        if (!algo) throw ValidationError("unknown algorithm '" + a + "'");
        TrainConfig cfg = tc;
        cfg.algorithm = *algo;
        cfg.seed = derive_seed(common.seed, "classifier");
        cells.push_back({*method, cfg});
      }
    }
    return cells;
  };

  auto run_grid = [&](const std::vector<TokenizedProfile>& all, const std::vector<CvCell>& cells,
                      bool filter, std::size_t k) {
    std::vector<TokenizedProfile> kept;
    for (const auto& p : all)
      if (p.label() != Label::unlabeled && (!filter || has_all_channels(p))) kept.push_back(p);
    const auto ids = labeled_ids(kept);
    const FoldPlan plan = make_folds(ids, k, derive_seed(common.seed, "folds"), !no_stratify);
    Hyperparams h = hp;
    h.seed = derive_seed(common.seed, "embed");
    CvOptions opts;
    opts.workers = common.workers;
    opts.require_all_channels = filter;
    return run_cv_grid(kept, h, cells, plan, opts);
  };

  const std::vector<std::string> all_methods = {"sum", "avg", "sum_count", "sum_tfidf",
                                                "avg_sum_count"};
  const std::vector<std::string> all_algos = {"logreg", "random_forest", "svm"};

  std::string algo_list = "logreg";
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross validation");
  cv->add_option("--profiles", profiles_path, "Raw or tokenized profiles")->required();
  cv->add_option("--method", method_text, "Aggregation method, comma list, or 'all'");
  cv->add_option("--algo", algo_list, "Classifier, comma list, or 'all'");
  cv->add_option("--folds", folds, "Number of folds");
  cv->add_flag("--no-stratify", no_stratify, "Plain shuffled folds");
  cv->add_flag("--all-channels", all_channels, "Keep only profiles with all five channels");
  cv->add_option("--report", report_path, "JSON report output");
  cv->add_option("--table", table_path, "Text table output");
  cv->add_option("--embed-config", common.config, "Embedding config file");
  add_embed_options(cv, hp);
  add_train_options(cv, tc);
  add_preprocess_options(cv, pp, true);
  add_common(cv, common);
  cv->callback([&] {
    run = [&] {
      require_file(profiles_path);
      const auto profiles = load_any_profiles(profiles_path, build_preprocess(pp));
      const auto cells = cells_for(parse_list_arg(method_text, "all", all_methods),
                                   parse_list_arg(algo_list, "all", all_algos));
      const auto reports = run_grid(profiles, cells, all_channels, folds);
      const std::string table = render_report(reports, ReportFormat::table);
      if (!report_path.empty()) write_text(report_path, render_report(reports, ReportFormat::json));
      if (!table_path.empty()) write_text(table_path, table);
      out << table;
    };
  });

  auto* demo = app.add_subcommand("demo", "End-to-end run on the synthetic collection");
  demo->add_option("--out-dir", out_dir, "Directory for the generated files");
  demo->add_option("--folds", folds, "Number of folds");
  add_embed_options(demo, hp);
  add_train_options(demo, tc);
  add_common(demo, common);
  demo->callback([&] {
    run = [&] {
      fs::create_directories(out_dir);
      SynthSpec spec = SynthSpec::with_default_vocab();
      spec.seed = common.seed;
      const ProfileCollection raw = synthesize_profiles(spec);
      save_profiles(raw, (fs::path(out_dir) / "profiles.jsonl").string());
      const auto profiles = preprocess_all(raw, PreprocessConfig::defaults());
      save_tokenized(profiles, (fs::path(out_dir) / "tokenized.jsonl").string());

      auto cells = cells_for(all_methods, all_algos);
      const auto baseline = cells_for({"baseline_tf"}, {"random_forest"});
      cells.insert(cells.end(), baseline.begin(), baseline.end());
      auto reports = run_grid(profiles, cells, false, folds);

      // The all-channels subset can be too small for the requested folds.
      std::size_t pos = 0, neg = 0;
      for (const auto& p : profiles)
        if (has_all_channels(p)) (p.label() == Label::gang ? pos : neg) += 1;
      const std::size_t k2 = std::min({folds, pos, neg});
      if (k2 >= 2) {
        const auto filtered = run_grid(profiles, baseline, true, k2);
        reports.insert(reports.end(), filtered.begin(), filtered.end());
      } else {
        err << "note: too few all-channel profiles for the filtered baseline\n";
      }

      const std::string table = render_report(reports, ReportFormat::table);
      write_text((fs::path(out_dir) / "report.json").string(),
                 render_report(reports, ReportFormat::json));
      write_text((fs::path(out_dir) / "report.txt").string(), table);
      out << table;

      const EvaluationReport* best = nullptr;
      const EvaluationReport* ref = nullptr;
      for (const auto& r : reports) {
        if (r.pipeline.method == "avg_sum_count" && r.pipeline.algorithm == "logreg") best = &r;
        if (r.pipeline.method == "baseline_tf" && r.pipeline.variant.empty()) ref = &r;
      }
      if (best && ref && ref->pooled.gang.f1 > 0.0) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "\ngang F1, avg_sum_count/LR vs Baseline Model(1)/RF: %.4f vs %.4f (%+.2f%%)\n",
                      best->pooled.gang.f1, ref->pooled.gang.f1,
                      100.0 * f1_improvement(*best, *ref));
        out << buf;
      }
    };
  });
  if (raw_args.empty()) {
    err << app.help();
    return 2;
  }

  const std::string& command = raw_args.front();
  if (command.rfind("-", 0) != 0 && app.get_subcommand_no_throw(command) == nullptr) {
    err << "error: unknown command '" << command << "'\n" << app.help();
    return 2;
  }

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  // Smaller embeddings keep the full demo grid quick on one core.
  if (raw_args.front() == "demo") {
    hp.dim = 100;
    common.seed = 7;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    err << target->help();
    return 2;
  }

  try {
    if (run) run();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace profvec::cli
