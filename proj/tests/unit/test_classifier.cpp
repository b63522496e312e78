#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "profvec/classifier.hpp"
#include "profvec/error.hpp"
#include "profvec/random.hpp"

using namespace profvec;

namespace {

Matrix rows_of(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  for (const auto& r : rows) m.push_row(r);
  return m;
}

const Matrix kToyX = rows_of({{-2.0, 1.0}, {-1.0, -1.0}, {1.0, 0.5}, {2.0, -1.5}});
const std::vector<Label> kToyY = {Label::non_gang, Label::non_gang, Label::gang, Label::gang};

const Matrix kXorX = rows_of({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
const std::vector<Label> kXorY = {Label::non_gang, Label::gang, Label::gang, Label::non_gang};

double accuracy(const Predictions& p, const std::vector<Label>& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += p.labels[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

TrainConfig config(Algorithm a) {
  TrainConfig c;
  c.algorithm = a;
  c.seed = 5;
  return c;
}

// Two noisy Gaussian blobs.
void blobs(Rng& rng, std::size_t n, std::size_t d, Matrix& x, std::vector<Label>& y) {
  x = Matrix();
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i % 4 == 0;
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j)
      row[j] = rng.uniform(-1, 1) + (pos ? 0.8 : -0.3) * static_cast<double>(j % 3);
    x.push_row(row);
    y.push_back(pos ? Label::gang : Label::non_gang);
  }
}

}  // namespace

TEST_CASE("linear models separate a separable toy set") {
  const auto lr = train(kToyX, kToyY, config(Algorithm::logreg));
  const auto svm = train(kToyX, kToyY, config(Algorithm::svm));
  CHECK(accuracy(predict(lr, kToyX), kToyY) == 1.0);
  CHECK(accuracy(predict(svm, kToyX), kToyY) == 1.0);
  CHECK(lr.weights[0] > 0.0);
  CHECK(svm.weights[0] > 0.0);
  const auto rf = train(kToyX, kToyY, config(Algorithm::random_forest));
  CHECK(accuracy(predict(rf, kToyX), kToyY) == 1.0);
}

TEST_CASE("forest learns XOR where a linear model cannot") {
  TrainConfig c = config(Algorithm::random_forest);
  c.trees = 50;
  CHECK(accuracy(predict(train(kXorX, kXorY, c), kXorX), kXorY) == 1.0);
  CHECK(accuracy(predict(train(kXorX, kXorY, config(Algorithm::logreg)), kXorX), kXorY) <= 0.75);
}

TEST_CASE("logistic model at zero weights scores one half and predicts non_gang") {
  TrainedModel m;
  m.algorithm = Algorithm::logreg;
  m.dim = 2;
  m.weights = {0.0, 0.0};
  const auto p = predict(m, kToyX);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.scores[i] == 0.5);
    CHECK(p.labels[i] == Label::non_gang);
  }
}

TEST_CASE("forest vote tie goes to non_gang") {
  TrainedModel m;
  m.algorithm = Algorithm::random_forest;
  m.dim = 1;
  DecisionTree a, b;
  a.nodes = {TreeNode{-1, 0, 0, 0, 0.9}};
  b.nodes = {TreeNode{-1, 0, 0, 0, 0.1}};
  m.trees = {a, b};
  const auto p = predict(m, rows_of({{3.0}}));
  CHECK(p.scores[0] == doctest::Approx(0.5));
  CHECK(p.labels[0] == Label::non_gang);
}

TEST_CASE("logistic loss matches the reference formula") {
  Rng rng(12);
  Matrix x;
  std::vector<Label> labels;
  blobs(rng, 30, 4, x, labels);
  std::vector<double> y;
  for (auto l : labels) y.push_back(l == Label::gang ? 1.0 : 0.0);
  const std::vector<double> w = {0.3, -0.2, 0.5, 1.0};
  CHECK(logreg_loss(w, 0.7, x, y, 0.8) == doctest::Approx(oracle::logreg_loss(w, 0.7, x, y, 0.8)).epsilon(1e-12));
}

TEST_CASE("logistic gradient matches finite differences") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + rng.index(20), d = 1 + rng.index(6);
    Matrix x(n, d);
    std::vector<double> y(n);
    for (double& v : x.data()) v = rng.uniform(-2, 2);
    for (double& v : y) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    std::vector<double> params(d + 1);
    for (double& v : params) v = rng.uniform(-1, 1);
    const double l2 = rng.uniform(0, 2);
    const auto g = logreg_gradient(std::span(params).first(d), params[d], x, y, l2);
    auto f = [&] {
      return oracle::logreg_loss(std::vector<double>(params.begin(), params.end() - 1), params[d], x, y, l2);
    };
    const auto fd = oracle::central_difference(params, f, 1e-5);
    for (std::size_t j = 0; j <= d; ++j) CHECK(oracle::relative_error(g[j], fd[j]) < 1e-5);
  }
}

TEST_CASE("logistic optimizer converges or reports the cap") {
  Rng rng(14);
  Matrix x;
  std::vector<Label> y;
  blobs(rng, 60, 5, x, y);
  TrainConfig c = config(Algorithm::logreg);
  const auto m = train(x, y, c);
  std::vector<double> y01;
  for (auto l : y) y01.push_back(l == Label::gang ? 1.0 : 0.0);
  const auto g = logreg_gradient(m.weights, m.bias, x, y01, c.l2_strength);
  double norm = 0.0;
  for (double v : g) norm += v * v;
  norm = std::sqrt(norm);
  CHECK(norm == doctest::Approx(m.gradient_norm));
  if (m.converged)
    CHECK(norm <= c.tolerance);
  else
    CHECK(m.iterations == c.max_iters);

  c.max_iters = 2;
  const auto capped = train(x, y, c);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 2);
}

TEST_CASE("forest training is deterministic for a seed") {
  Rng rng(15);
  Matrix x;
  std::vector<Label> y;
  blobs(rng, 80, 6, x, y);
  TrainConfig c = config(Algorithm::random_forest);
  c.trees = 20;
  const auto a = train(x, y, c);
  const auto b = train(x, y, c);
  CHECK(a.trees == b.trees);
  c.workers = 3;
  CHECK(train(x, y, c).trees == a.trees);
}

TEST_CASE("predictions are invariant to feature order") {
  Rng rng(16);
  Matrix x;
  std::vector<Label> y;
  blobs(rng, 60, 5, x, y);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  Matrix xp(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) xp(i, j) = x(i, perm[j]);
  for (auto algo : kAlgorithms) {
    TrainConfig c = config(algo);
    c.trees = 25;
    c.features_per_split = 5;  // every feature considered, so sampling order cannot matter
    const auto a = predict(train(x, y, c), x);
    const auto b = predict(train(xp, y, c), xp);
    CHECK(a.labels == b.labels);
    for (std::size_t i = 0; i < a.scores.size(); ++i)
      CHECK(a.scores[i] == doctest::Approx(b.scores[i]).epsilon(1e-6));
  }
}

TEST_CASE("training input validation") {
  CHECK_THROWS_WITH_AS(train(kToyX, std::vector<Label>(4, Label::gang), config(Algorithm::logreg)),
                       "degenerate training labels", ValidationError);
  CHECK_THROWS_AS(train(kToyX, std::vector<Label>(3, Label::gang), config(Algorithm::logreg)),
                  ValidationError);
  std::vector<Label> y = kToyY;
  y[0] = Label::unlabeled;
  CHECK_THROWS_AS(train(kToyX, y, config(Algorithm::svm)), ValidationError);
  const auto m = train(kToyX, kToyY, config(Algorithm::logreg));
  CHECK_THROWS_AS(predict(m, rows_of({{1, 2, 3}})), ValidationError);
  TrainConfig bad = config(Algorithm::random_forest);
  bad.trees = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("algorithm names") {
  CHECK(parse_algorithm("lr") == Algorithm::logreg);
  CHECK(parse_algorithm("rf") == Algorithm::random_forest);
  CHECK(parse_algorithm("svm") == Algorithm::svm);
  CHECK_FALSE(parse_algorithm("knn").has_value());
}

TEST_CASE("models round trip") {
  Rng rng(17);
  Matrix x;
  std::vector<Label> y;
  blobs(rng, 50, 4, x, y);
  for (auto algo : kAlgorithms) {
    TrainConfig c = config(algo);
    c.trees = 10;
    auto m = train(x, y, c);
    m.feature_names = {"a", "b", "c", "d"};
    std::ostringstream out;
    write_model(m, out);
    std::istringstream in(out.str());
    const auto back = read_model(in);
    CHECK(back.algorithm == m.algorithm);
    CHECK(back.config == m.config);
    CHECK(back.feature_names == m.feature_names);
    REQUIRE(back.weights.size() == m.weights.size());
    for (std::size_t j = 0; j < m.weights.size(); ++j)
      CHECK(std::abs(back.weights[j] - m.weights[j]) <= 1e-12);
    CHECK(back.trees == m.trees);
    CHECK(predict(back, x).labels == predict(m, x).labels);
    CHECK(predict(back, x).scores == predict(m, x).scores);

    const std::string text = out.str();
    std::istringstream truncated(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_model(truncated), ParseError);
  }
}
