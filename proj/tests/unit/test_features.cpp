#include <doctest.h>

#include <cmath>
#include <sstream>

#include "models.hpp"
#include "oracles.hpp"
#include "profvec/error.hpp"
#include "profvec/features.hpp"
#include "profvec/random.hpp"

using namespace profvec;
using fixtures::model_with;
using fixtures::tweets_profile;

namespace {

const EmbeddingModel& worked_model() {
  static const EmbeddingModel m = model_with({"a", "b"}, {{1, 0, 2}, {3, 2, 0}});
  return m;
}

std::vector<double> agg(const TokenizedProfile& p, const EmbeddingModel& m, AggregationMethod method,
                        const IdfTable* idf = nullptr) {
  return aggregate(compute_term_stats(p, m.vocab, idf), m, method).dense;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

EmbeddingModel random_model(std::size_t v, std::size_t k, Rng& rng) {
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> rows(v, std::vector<double>(k));
  for (std::size_t i = 0; i < v; ++i) {
    tokens.push_back("w" + std::to_string(i));
    for (double& x : rows[i]) x = rng.uniform(-1, 1);
  }
  return model_with(tokens, rows);
}

TokenSeq random_tokens(Rng& rng, std::size_t v, std::size_t n) {
  TokenSeq t;
  for (std::size_t i = 0; i < n; ++i) t.push_back("w" + std::to_string(rng.index(v + 2)));
  return t;  // indices v and v+1 are out of vocabulary
}

}  // namespace

TEST_CASE("term statistics") {
  const auto& m = worked_model();
  const auto stats = compute_term_stats(tweets_profile("p", Label::gang, {"a", "a", "b"}), m.vocab);
  REQUIRE(stats.n() == 2);
  CHECK(stats.terms[0].count == 2);
  CHECK(stats.terms[1].count == 1);
  CHECK(compute_term_stats(tweets_profile("q", Label::gang, {"z"}), m.vocab).n() == 0);

  IdfTable idf{{1.0, 2.0}, 10};
  const auto weighted =
      compute_term_stats(tweets_profile("p", Label::gang, {"a", "a", "b"}), m.vocab, &idf);
  CHECK(weighted.terms[0].tfidf == 2.0);
  CHECK(weighted.terms[1].tfidf == 2.0);
}

TEST_CASE("worked aggregation example") {
  const auto& m = worked_model();
  const auto p = tweets_profile("p", Label::gang, {"a", "b", "a"});
  IdfTable idf{{1.0, 2.0}, 10};
  check_close(agg(p, m, AggregationMethod::sum), {4, 2, 2});
  check_close(agg(p, m, AggregationMethod::avg), {2, 1, 1});
  check_close(agg(p, m, AggregationMethod::sum_count), {5, 2, 4});
  check_close(agg(p, m, AggregationMethod::avg_sum_count), {2.5, 1, 2});
  check_close(agg(p, m, AggregationMethod::sum_tfidf, &idf), {8, 4, 4});
}

TEST_CASE("aggregation identities on random profiles") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_model(8, 5, rng);
    const auto p = tweets_profile("r", Label::gang, random_tokens(rng, 8, 1 + rng.index(15)));
    const auto stats = compute_term_stats(p, m.vocab);
    if (stats.n() == 0) continue;
    const double n = static_cast<double>(stats.n());
    auto sum = agg(p, m, AggregationMethod::sum);
    auto sc = agg(p, m, AggregationMethod::sum_count);
    for (double& x : sum) x /= n;
    for (double& x : sc) x /= n;
    check_close(agg(p, m, AggregationMethod::avg), sum);
    check_close(agg(p, m, AggregationMethod::avg_sum_count), sc);

    IdfTable ones{std::vector<double>(8, 1.0), 5};
    check_close(agg(p, m, AggregationMethod::sum_tfidf, &ones), agg(p, m, AggregationMethod::sum_count));
  }
}

TEST_CASE("sum_count equals sum when every count is one") {
  Rng rng(32);
  const auto m = random_model(6, 4, rng);
  const auto p = tweets_profile("u", Label::gang, {"w0", "w3", "w5", "w1"});
  check_close(agg(p, m, AggregationMethod::sum_count), agg(p, m, AggregationMethod::sum));
}

TEST_CASE("token order never changes a profile vector") {
  Rng rng(33);
  const auto m = random_model(7, 4, rng);
  IdfTable idf{{1.1, 1.7, 2.0, 1.0, 3.2, 1.5, 2.2}, 9};
  for (int trial = 0; trial < 20; ++trial) {
    auto tokens = random_tokens(rng, 7, 12);
    auto shuffled = tokens;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    for (auto method : kEmbeddingMethods)
      CHECK(agg(tweets_profile("x", Label::gang, tokens), m, method, &idf) ==
            agg(tweets_profile("x", Label::gang, shuffled), m, method, &idf));
  }
}

TEST_CASE("aggregation is linear in the embedding matrix") {
  Rng rng(34);
  const auto m = random_model(6, 3, rng);
  auto scaled = m;
  const double alpha = -2.5;
  for (double& x : scaled.input_vectors.data()) x *= alpha;
  IdfTable idf{{1, 2, 3, 1.5, 1.2, 2.5}, 4};
  const auto p = tweets_profile("l", Label::gang, {"w0", "w0", "w2", "w5", "w4", "w4", "w4"});
  for (auto method : kEmbeddingMethods) {
    auto expected = agg(p, m, method, &idf);
    for (double& x : expected) x *= alpha;
    check_close(agg(p, scaled, method, &idf), expected, 1e-12);
  }
}

TEST_CASE("out-of-vocabulary profiles give flagged zero vectors") {
  const auto& m = worked_model();
  const auto stats = compute_term_stats(tweets_profile("z", Label::gang, {"q", "r"}), m.vocab);
  const auto v = aggregate(stats, m, AggregationMethod::avg);
  CHECK(v.oov_profile);
  CHECK(v.dense == std::vector<double>{0, 0, 0});
}

TEST_CASE("aggregation argument checks") {
  const auto& m = worked_model();
  const auto stats = compute_term_stats(tweets_profile("p", Label::gang, {"a"}), m.vocab);
  CHECK_THROWS_AS(aggregate(stats, m, AggregationMethod::sum_tfidf), ValidationError);
  CHECK_THROWS_AS(aggregate(stats, m, AggregationMethod::baseline_tf), ValidationError);
}

TEST_CASE("baseline unigram counts") {
  const auto& m = worked_model();
  const auto v = baseline_tf_vector(tweets_profile("p", Label::gang, {"b", "a", "a"}), m.vocab);
  CHECK(v.sparse == std::vector<std::pair<std::string, std::uint32_t>>{{"a", 2}, {"b", 1}});
  CHECK(baseline_tf_vector(tweets_profile("e", Label::gang, {}), m.vocab).sparse.empty());
  const auto oov = baseline_tf_vector(tweets_profile("o", Label::gang, {"x", "y"}), m.vocab);
  CHECK(oov.sparse.empty());
  CHECK(oov.oov_profile);
  CHECK(baseline_dense(tweets_profile("p", Label::gang, {"b", "a", "a"}), m.vocab) ==
        std::vector<double>{2, 1});
}

TEST_CASE("smoothed idf values") {
  // 10 documents: "every" in all of them, "once" in one, "never" in none.
  const auto vocab = Vocabulary({"every", "once", "never"}, {10, 1, 1}, 12, 1);
  std::vector<TokenizedProfile> docs;
  for (int i = 0; i < 10; ++i)
    docs.push_back(tweets_profile("d" + std::to_string(i), Label::gang,
                                  i == 0 ? TokenSeq{"every", "once", "once"} : TokenSeq{"every"}));
  const auto idf = build_idf(docs, vocab);
  CHECK(idf.n_docs == 10);
  CHECK(idf.idf[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(idf.idf[1] == doctest::Approx(oracle::smoothed_idf(10, 1)).epsilon(1e-12));
  CHECK(idf.idf[1] == doctest::Approx(2.7047).epsilon(1e-4));
  CHECK(idf.idf[2] == doctest::Approx(3.3979).epsilon(1e-4));
  CHECK_THROWS_AS(build_idf({}, vocab), ValidationError);
}

TEST_CASE("idf table round trip") {
  const auto& m = worked_model();
  IdfTable idf{{1.25, 3.0000000000000004}, 3};
  std::ostringstream out;
  write_idf(idf, m.vocab, out);
  std::istringstream in(out.str());
  CHECK(read_idf(in, m.vocab).idf == idf.idf);
  std::istringstream missing("a\t1.5\n");
  CHECK_THROWS_AS(read_idf(missing, m.vocab), ValidationError);
}

TEST_CASE("feature files round trip") {
  std::vector<FeatureRow> dense = {
      {"p1", Label::gang, {AggregationMethod::avg, {0.1, -2.5e-300, 3}, {}, false}},
      {"p2", Label::unlabeled, {AggregationMethod::avg, {0, 0, 0}, {}, true}}};
  std::ostringstream out;
  write_features(dense, out);
  std::istringstream in(out.str());
  const auto back = read_features(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].vector.dense == dense[0].vector.dense);
  CHECK(back[1].label == Label::unlabeled);
  CHECK(back[1].vector.oov_profile);

  std::vector<FeatureRow> sparse = {
      {"s1", Label::non_gang, {AggregationMethod::baseline_tf, {}, {{"a", 2}, {"b", 1}}, false}}};
  std::ostringstream sout;
  write_features(sparse, sout);
  std::istringstream sin(sout.str());
  CHECK(read_features(sin)[0].vector.sparse == sparse[0].vector.sparse);

  std::istringstream ragged("# profvec-features dense 2\np\tgang\t1\t2\nq\tgang\t1\n");
  CHECK_THROWS_AS(read_features(ragged), ParseError);
}
