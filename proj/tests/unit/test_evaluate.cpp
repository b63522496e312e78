#include <doctest.h>

#include <algorithm>
#include <set>

#include "models.hpp"
#include "oracles.hpp"
#include "profvec/error.hpp"
#include "profvec/evaluate.hpp"

using namespace profvec;

namespace {

std::vector<std::pair<std::string, Label>> labels(std::size_t pos, std::size_t neg) {
  std::vector<std::pair<std::string, Label>> out;
  for (std::size_t i = 0; i < pos; ++i) out.emplace_back("p" + std::to_string(i), Label::gang);
  for (std::size_t i = 0; i < neg; ++i) out.emplace_back("n" + std::to_string(i), Label::non_gang);
  return out;
}

std::vector<TokenizedProfile> small_collection(std::size_t pos = 20, std::size_t neg = 60) {
  SynthSpec spec = SynthSpec::with_default_vocab();
  spec.n_pos = pos;
  spec.n_neg = neg;
  return preprocess_all(synthesize_profiles(spec), PreprocessConfig::defaults());
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.dim = 10;
  hp.epochs = 2;
  hp.min_count = 2;
  hp.table_size = 100000;
  hp.seed = 3;
  return hp;
}

FoldPlan plan_for(const std::vector<TokenizedProfile>& profiles, std::size_t k, std::uint64_t seed = 1) {
  std::vector<std::pair<std::string, Label>> ids;
  for (const auto& p : profiles) ids.emplace_back(p.id(), p.label());
  return make_folds(ids, k, seed);
}

FoldResult fold_with(std::size_t f, ConfusionCounts c) {
  FoldResult r;
  r.fold = f;
  r.confusion = c;
  r.metrics = compute_metrics(c);
  return r;
}

}  // namespace

TEST_CASE("stratified folds balance an imbalanced label set") {
  const auto ids = labels(400, 2865);
  const auto plan = make_folds(ids, 10, 11);
  CHECK(plan.assignment.size() == ids.size());
  std::set<std::string> tested;
  for (std::size_t f = 0; f < 10; ++f) {
    std::size_t pos = 0, neg = 0;
    for (const auto& id : plan.test_ids(f)) {
      CHECK(tested.insert(id).second);
      (id[0] == 'p' ? pos : neg) += 1;
    }
    CHECK(pos == 40);
    CHECK((neg == 286 || neg == 287));
  }
  CHECK(tested.size() == ids.size());
}

TEST_CASE("fold sizes differ by at most one") {
  const auto plan = make_folds(labels(13, 29), 4, 2);
  std::vector<std::size_t> sizes;
  for (std::size_t f = 0; f < 4; ++f) sizes.push_back(plan.test_ids(f).size());
  CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
}

TEST_CASE("fold plans are deterministic and order independent") {
  auto ids = labels(30, 70);
  const auto a = make_folds(ids, 10, 5);
  std::reverse(ids.begin(), ids.end());
  CHECK(make_folds(ids, 10, 5).assignment == a.assignment);
  CHECK(make_folds(ids, 10, 6).assignment != a.assignment);
  const auto plain = make_folds(ids, 10, 5, false);
  CHECK(plain.assignment.size() == 100);
  CHECK_FALSE(plain.stratified);
}

TEST_CASE("fold plan preconditions") {
  CHECK_THROWS_AS(make_folds(labels(10, 10), 1, 0), ValidationError);
  CHECK_THROWS_WITH_AS(make_folds(labels(0, 10), 2, 0), "degenerate training labels", ValidationError);
  CHECK_THROWS_AS(make_folds(labels(3, 10), 5, 0), ValidationError);
}

TEST_CASE("metric examples") {
  auto m = compute_metrics({5, 5, 0, 0});
  CHECK(m.gang.precision == 0.5);
  CHECK(m.gang.recall == 1.0);
  CHECK(m.gang.f1 == doctest::Approx(2.0 / 3.0));

  m = compute_metrics({0, 0, 10, 0});
  CHECK(m.gang.precision == 0.0);
  CHECK(m.gang.recall == 0.0);
  CHECK(m.gang.f1 == 0.0);
  CHECK(m.gang.undefined);
  CHECK(m.non_gang.precision == 1.0);
  CHECK(m.non_gang.recall == 1.0);
  CHECK(m.non_gang.f1 == 1.0);
  CHECK_FALSE(m.non_gang.undefined);

  // Counts chosen so that P = 0.8490 and R = 0.7327 exactly.
  m = compute_metrics({62206230, 11063770, 0, 22693770});
  CHECK(m.gang.precision == doctest::Approx(0.8490).epsilon(1e-12));
  CHECK(m.gang.recall == doctest::Approx(0.7327).epsilon(1e-12));
  CHECK(m.gang.f1 == doctest::Approx(0.7866).epsilon(1e-4));
}

TEST_CASE("recall identities hold against stored confusions") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const ConfusionCounts c{rng.index(20), rng.index(20), rng.index(20), rng.index(20)};
    const auto m = compute_metrics(c);
    const auto g = oracle::prf(c.tp, c.fp, c.fn);
    const auto n = oracle::prf(c.tn, c.fn, c.fp);
    CHECK(m.gang.recall == g.recall);
    CHECK(m.non_gang.recall == n.recall);
    CHECK(m.gang.precision == g.precision);
    CHECK(m.non_gang.f1 == n.f1);
  }
}

TEST_CASE("pooled and macro scopes") {
  EvaluationReport r;
  r.folds = {fold_with(0, {4, 1, 10, 0}), fold_with(1, {1, 0, 12, 3})};
  finalize_report(r);
  CHECK(r.pooled_confusion == ConfusionCounts{5, 1, 22, 3});
  const auto& p = r.pooled.gang;
  CHECK(p.f1 == doctest::Approx(2 * p.precision * p.recall / (p.precision + p.recall)).epsilon(1e-15));
  CHECK(r.macro.gang.recall == doctest::Approx((1.0 + 0.25) / 2));
  CHECK(r.macro.gang.f1 != doctest::Approx(r.pooled.gang.f1));

  EvaluationReport single;
  single.folds = {fold_with(0, {3, 2, 9, 1})};
  finalize_report(single);
  CHECK(single.pooled == single.macro);
  CHECK(single.pooled == single.folds[0].metrics);
}

TEST_CASE("reports without folds are rejected") {
  EvaluationReport empty;
  CHECK_THROWS_WITH(finalize_report(empty), "no folds");
  CHECK_THROWS_WITH(render_report(empty, ReportFormat::table), "no folds");
}

TEST_CASE("json reports round trip") {
  EvaluationReport r;
  r.pipeline.method = "avg_sum_count";
  r.pipeline.algorithm = "logreg";
  r.pipeline.folds = 2;
  r.pipeline.fold_seed = 0xFFFFFFFFFFFFFFFFull;
  r.pipeline.hyperparams.initial_lr = 0.1 + 0.2;
  r.folds = {fold_with(0, {4, 1, 10, 0}), fold_with(1, {0, 0, 12, 3})};
  r.folds[1].vocab_size = 77;
  finalize_report(r);
  EvaluationReport b = r;
  b.pipeline.method = "baseline_tf";
  b.pipeline.variant = "all_channels";
  const std::vector<EvaluationReport> both = {r, b};
  const auto parsed = parse_reports(render_report(both, ReportFormat::json));
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0] == r);
  CHECK(parsed[1] == b);
  CHECK_THROWS_AS(parse_reports("{\"format\":\"other\"}"), ParseError);
  CHECK_THROWS_AS(parse_reports("[1,"), ParseError);
}

TEST_CASE("text table lists every pipeline under both scopes") {
  EvaluationReport r;
  r.pipeline.method = "sum";
  r.pipeline.algorithm = "random_forest";
  r.folds = {fold_with(0, {0, 0, 5, 2})};
  finalize_report(r);
  const auto text = render_report(r, ReportFormat::table);
  CHECK(text.find("pooled") != std::string::npos);
  CHECK(text.find("macro") != std::string::npos);
  CHECK(text.find("RF") != std::string::npos);
  CHECK(text.find("warning") != std::string::npos);
  CHECK(parse_report_format("json") == ReportFormat::json);
  CHECK_FALSE(parse_report_format("xml").has_value());
}

TEST_CASE("relative F1 improvement") {
  EvaluationReport a, b;
  a.pooled.gang.f1 = 0.8;
  b.pooled.gang.f1 = 0.64;
  CHECK(f1_improvement(a, b) == doctest::Approx(0.25));
}

TEST_CASE("leakage guard rejects test-only tokens") {
  const auto train = fixtures::tweets_profile("t", Label::gang, {"a", "b"});
  const auto test = fixtures::tweets_profile("s", Label::non_gang, {"a", "secret"});
  const TokenizedProfile* tr[] = {&train};
  const TokenizedProfile* te[] = {&test};
  const Vocabulary clean({"a", "b"}, {1, 1}, 2, 1);
  const Vocabulary leaky({"a", "b", "secret"}, {1, 1, 1}, 3, 1);
  CHECK_NOTHROW(check_fold_leakage(tr, te, clean, IdfTable{{1, 1}, 1}));
  CHECK_THROWS_AS(check_fold_leakage(tr, te, leaky, IdfTable{{1, 1, 1}, 1}), LeakageError);
  CHECK_THROWS_AS(check_fold_leakage(tr, te, clean, IdfTable{{1}, 1}), LeakageError);
}

TEST_CASE("a probe token stays out of the fold that tests it") {
  auto profiles = small_collection();
  profiles.push_back(fixtures::tweets_profile("probe", Label::gang,
                                              TokenSeq(6, "probetoken")));
  const auto plan = plan_for(profiles, 4);
  const std::size_t probe_fold = plan.assignment.at("probe");
  std::vector<int> present(4, -1);
  CvOptions opts;
  opts.on_fold_tables = [&](std::size_t fold, const Vocabulary& vocab, const IdfTable& idf) {
    present[fold] = vocab.contains("probetoken");
    CHECK(idf.idf.size() == vocab.size());
  };
  TrainConfig tc;
  run_cv(profiles, small_hp(), AggregationMethod::avg_sum_count, tc, plan, opts);
  for (std::size_t f = 0; f < 4; ++f) CHECK(present[f] == (f == probe_fold ? 0 : 1));
}

TEST_CASE("cross validation ignores input order") {
  auto profiles = small_collection();
  const auto plan = plan_for(profiles, 4);
  TrainConfig tc;
  const auto a = run_cv(profiles, small_hp(), AggregationMethod::sum_tfidf, tc, plan);
  std::reverse(profiles.begin(), profiles.end());
  std::rotate(profiles.begin(), profiles.begin() + 7, profiles.end());
  const auto b = run_cv(profiles, small_hp(), AggregationMethod::sum_tfidf, tc, plan);
  CHECK(render_report(a, ReportFormat::json) == render_report(b, ReportFormat::json));
}

TEST_CASE("parallel folds give the serial result") {
  const auto profiles = small_collection();
  const auto plan = plan_for(profiles, 4);
  std::vector<CvCell> cells = {{AggregationMethod::avg, {}}, {AggregationMethod::baseline_tf, {}}};
  cells[1].train_config.algorithm = Algorithm::random_forest;
  cells[1].train_config.trees = 10;
  const auto serial = run_cv_grid(profiles, small_hp(), cells, plan);
  CvOptions opts;
  opts.workers = 3;
  CHECK(run_cv_grid(profiles, small_hp(), cells, plan, opts) == serial);
  REQUIRE(serial.size() == 2);
  CHECK(serial[0].folds.size() == 4);
  std::size_t tested = 0;
  for (const auto& f : serial[0].folds) tested += f.confusion.total();
  CHECK(tested == profiles.size());
}

TEST_CASE("no classifier collapses to the majority class on the planted collection") {
  const auto profiles = small_collection(30, 200);
  const auto plan = plan_for(profiles, 5);
  std::vector<CvCell> cells;
  for (auto algo : kAlgorithms) {
    CvCell c;
    c.method = AggregationMethod::avg_sum_count;
    c.train_config.algorithm = algo;
    c.train_config.trees = 30;
    cells.push_back(c);
  }
  // Two epochs leave the averaged vectors too weakly separated for the
  // default penalty; all-negative is then the true regularized optimum.
  auto hp = small_hp();
  hp.epochs = 5;
  for (const auto& r : run_cv_grid(profiles, hp, cells, plan))
    CHECK_MESSAGE(r.pooled.gang.f1 > 0.0, r.pipeline.algorithm);
}

TEST_CASE("all-channel filter") {
  const auto full = TokenizedProfile("f", Label::gang, {TokenSeq{"a"}, {"b"}, {"c"}, {"d"}, {"e"}});
  const auto partial = TokenizedProfile("p", Label::gang, {TokenSeq{"a"}, {}, {"c"}, {"d"}, {"e"}});
  CHECK(has_all_channels(full));
  CHECK_FALSE(has_all_channels(partial));

  const auto profiles = small_collection();
  const auto plan = plan_for(profiles, 3);
  CvOptions opts;
  opts.require_all_channels = true;
  const bool any_partial = std::any_of(profiles.begin(), profiles.end(),
                                       [](const auto& p) { return !has_all_channels(p); });
  if (any_partial)
    CHECK_THROWS_AS(run_cv(profiles, small_hp(), AggregationMethod::sum, {}, plan, opts), ValidationError);
}

TEST_CASE("fold plan must match the profiles") {
  const auto profiles = small_collection();
  auto plan = plan_for(profiles, 3);
  plan.assignment["ghost"] = 0;
  CHECK_THROWS_AS(run_cv(profiles, small_hp(), AggregationMethod::sum, {}, plan), ValidationError);
}
