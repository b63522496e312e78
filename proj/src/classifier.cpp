#include "profvec/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "profvec/error.hpp"
#include "profvec/random.hpp"

namespace profvec {

using nlohmann::json;

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::logreg:
      return "logreg";
    case Algorithm::svm:
      return "svm";
    case Algorithm::random_forest:
      return "random_forest";
  }
  return "?";
}

std::optional<Algorithm> parse_algorithm(std::string_view text) {
  if (text == "logreg" || text == "lr") return Algorithm::logreg;
  if (text == "svm") return Algorithm::svm;
  if (text == "random_forest" || text == "rf") return Algorithm::random_forest;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(l2_strength >= 0.0) || !std::isfinite(l2_strength))
    throw ValidationError("train config: l2_strength must be non-negative");
  if (max_iters == 0) throw ValidationError("train config: max_iters must be positive");
  if (!(tolerance > 0.0)) throw ValidationError("train config: tolerance must be positive");
  if (trees == 0) throw ValidationError("train config: trees must be positive");
}

double DecisionTree::predict(std::span<const double> x) const {
  std::uint32_t at = 0;
  while (!nodes[at].leaf()) {
    const auto& n = nodes[at];
    at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[at].p_gang;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double linear_score(std::span<const double> w, double b, std::span<const double> x) {
  return dot(w, x) + b;
}

}  // namespace

double logreg_loss(std::span<const double> w, double b, const Matrix& x,
                   std::span<const double> y01, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z = linear_score(w, b, x.row(i));
    loss += softplus(z) - y01[i] * z;
  }
  return loss + 0.5 * l2 * dot(w, w);
}

std::vector<double> logreg_gradient(std::span<const double> w, double b, const Matrix& x,
                                    std::span<const double> y01, double l2) {
  const std::size_t d = w.size();
  std::vector<double> g(d + 1, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double r = sigmoid(linear_score(w, b, row)) - y01[i];
    for (std::size_t j = 0; j < d; ++j) g[j] += r * row[j];
    g[d] += r;
  }
  for (std::size_t j = 0; j < d; ++j) g[j] += l2 * w[j];
  return g;
}

double svm_objective(std::span<const double> w, double b, const Matrix& x,
                     std::span<const double> y_pm, double l2) {
  const double n = static_cast<double>(x.rows());
  const double lambda = l2 / n;
  double hinge = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    hinge += std::max(0.0, 1.0 - y_pm[i] * linear_score(w, b, x.row(i)));
  return 0.5 * lambda * (dot(w, w) + b * b) + hinge / n;
}

namespace {

// Full-batch gradient descent with Armijo backtracking. The trial step
// starts at twice the last accepted one.
void fit_logreg(const Matrix& x, std::span<const double> y01, const TrainConfig& cfg,
                TrainedModel& model) {
  const std::size_t d = x.cols();
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  double step = 1.0;
  double loss = logreg_loss(w, b, x, y01, cfg.l2_strength);
  std::vector<double> g = logreg_gradient(w, b, x, y01, cfg.l2_strength);
  std::vector<double> w_try(d);
  std::size_t iter = 0;
  bool converged = norm2(g) <= cfg.tolerance;
  while (!converged && iter < cfg.max_iters) {
    ++iter;
    const double gg = dot(g, g);
    step *= 2.0;
    double b_try = 0.0;
    double trial = 0.0;
    while (true) {
      for (std::size_t j = 0; j < d; ++j) w_try[j] = w[j] - step * g[j];
      b_try = b - step * g[d];
      trial = logreg_loss(w_try, b_try, x, y01, cfg.l2_strength);
      if (trial <= loss - 0.5 * step * gg) break;
      step *= 0.5;
      if (step < 1e-300) break;
    }
    if (!(trial < loss)) break;  // no further progress representable
    w.swap(w_try);
    b = b_try;
    loss = trial;
    g = logreg_gradient(w, b, x, y01, cfg.l2_strength);
    converged = norm2(g) <= cfg.tolerance;
  }
  model.weights = std::move(w);
  model.bias = b;
  model.iterations = iter;
  model.converged = converged;
  model.gradient_norm = norm2(g);
}

// Dual coordinate descent on the bias-augmented weights. The objective
// 0.5 * lambda * |w|^2 + mean hinge equals 0.5 * |w|^2 + C * sum hinge
// with C = 1 / (lambda n) = 1 / l2, so the box is [0, 1 / l2]. Stops when
// the projected-gradient spread of a sweep falls under the tolerance.
void fit_svm(const Matrix& x, std::span<const double> y_pm, const TrainConfig& cfg,
             TrainedModel& model) {
  const std::size_t d = x.cols();
  const std::size_t n = x.rows();
  // A zero penalty leaves the box unbounded; cap it instead.
  const double c = 1.0 / std::max(cfg.l2_strength, 1e-8);

  std::vector<double> w(d + 1, 0.0);  // last entry is the bias
  std::vector<double> alpha(n, 0.0);
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    q[i] = dot(row, row) + 1.0;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, "svm-order"));

  std::size_t sweep = 0;
  bool converged = false;
  double spread = 0.0;
  while (!converged && sweep < cfg.max_iters) {
    ++sweep;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (const std::size_t i : order) {
      const auto row = x.row(i);
      const double g = y_pm[i] * linear_score(std::span(w).first(d), w[d], row) - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] >= c) pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg == 0.0) continue;
      const double updated = std::clamp(alpha[i] - g / q[i], 0.0, c);
      const double delta = (updated - alpha[i]) * y_pm[i];
      alpha[i] = updated;
      for (std::size_t j = 0; j < d; ++j) w[j] += delta * row[j];
      w[d] += delta;
    }
    spread = pg_max - pg_min;
    converged = spread <= cfg.tolerance;
  }
  model.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
  model.bias = w[d];
  model.iterations = sweep;
  model.converged = converged;
  model.gradient_norm = spread;
}

// ---------------------------------------------------------------------------
// Random forest

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini
  double gap = 0.0;       // distance between the straddling values
};

double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const std::uint8_t> y, const TrainConfig& cfg,
              std::size_t mtry, Rng& rng)
      : x_(x), y_(y), cfg_(cfg), mtry_(mtry), rng_(rng) {}

  DecisionTree build(std::vector<std::uint32_t> sample) {
    DecisionTree tree;
    struct Pending {
      std::uint32_t node;
      std::vector<std::uint32_t> rows;
      std::size_t depth;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack;
    stack.push_back({0, std::move(sample), 0});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      std::size_t pos = 0;
      for (auto r : p.rows) pos += y_[r];
      const double total = static_cast<double>(p.rows.size());
      const double p_gang = static_cast<double>(pos) / total;

      const bool pure = pos == 0 || pos == p.rows.size();
      const bool depth_cap = cfg_.max_depth != 0 && p.depth >= cfg_.max_depth;
      Split split;
      if (!pure && !depth_cap && p.rows.size() >= 2) split = best_split(p.rows);
      if (!split.found) {
        tree.nodes[p.node].p_gang = p_gang;
        continue;
      }
      std::vector<std::uint32_t> left, right;
      for (auto r : p.rows)
        (x_(r, split.feature) <= split.threshold ? left : right).push_back(r);
      const auto li = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      const auto ri = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      auto& node = tree.nodes[p.node];
      node.feature = static_cast<std::int32_t>(split.feature);
      node.threshold = split.threshold;
      node.left = li;
      node.right = ri;
      stack.push_back({ri, std::move(right), p.depth + 1});
      stack.push_back({li, std::move(left), p.depth + 1});
    }
    return tree;
  }

 private:
  // Candidate features are visited in a random order; constant columns are
  // skipped without counting towards mtry, and the search continues past
  // mtry until some valid split exists.
  Split best_split(const std::vector<std::uint32_t>& rows) {
    const std::size_t d = x_.cols();
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = d; i > 1; --i) std::swap(order[i - 1], order[rng_.index(i)]);

    Split best;
    std::size_t evaluated = 0;
    std::vector<std::pair<double, std::uint8_t>> column(rows.size());
    std::size_t total_pos = 0;
    for (auto r : rows) total_pos += y_[r];
    const double total = static_cast<double>(rows.size());

    for (std::size_t f : order) {
      if (evaluated >= mtry_ && best.found) break;
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x_(rows[i], f), y_[rows[i]]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++evaluated;
      std::size_t left_pos = 0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = total - nl;
        const double impurity =
            (nl * gini(static_cast<double>(left_pos), nl) +
             nr * gini(static_cast<double>(total_pos - left_pos), nr)) /
            total;
        const double gap = column[i + 1].first - column[i].first;
        // Lower impurity wins; equal impurity prefers the wider gap, which
        // keeps the choice independent of column order.
        if (!best.found || impurity < best.impurity ||
            (impurity == best.impurity && gap > best.gap)) {
          best.found = true;
          best.feature = f;
          best.impurity = impurity;
          best.gap = gap;
          best.threshold = column[i].first + 0.5 * gap;
          if (!(best.threshold < column[i + 1].first)) best.threshold = column[i].first;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const std::uint8_t> y_;
  const TrainConfig& cfg_;
  std::size_t mtry_;
  Rng& rng_;
};

void fit_forest(const Matrix& x, std::span<const std::uint8_t> y, const TrainConfig& cfg,
                TrainedModel& model) {
  const std::size_t n = x.rows();
  const std::size_t mtry = cfg.features_per_split != 0
                               ? std::min(cfg.features_per_split, x.cols())
                               : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
  model.trees.assign(cfg.trees, {});

  auto fit_tree = [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, "forest-tree", t));
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = static_cast<std::uint32_t>(rng.index(n));
    TreeBuilder builder(x, y, cfg, std::max<std::size_t>(1, mtry), rng);
    model.trees[t] = builder.build(std::move(sample));
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, cfg.trees));
  if (workers == 1) {
    for (std::size_t t = 0; t < cfg.trees; ++t) fit_tree(t);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      try {
        for (std::size_t t = w; t < cfg.trees; t += workers) fit_tree(t);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

TrainedModel train(const Matrix& x, std::span<const Label> y, const TrainConfig& config) {
  config.validate();
  if (x.rows() == 0) throw ValidationError("train: empty feature matrix");
  if (x.rows() != y.size())
    throw ValidationError("train: dimension mismatch between features (" +
                          std::to_string(x.rows()) + " rows) and labels (" +
                          std::to_string(y.size()) + ")");
  if (x.cols() == 0) throw ValidationError("train: feature dimension is zero");
  std::size_t pos = 0;
  for (auto l : y) {
    if (l == Label::unlabeled) throw ValidationError("train: unlabeled row in training data");
    pos += l == Label::gang;
  }
  if (pos == 0 || pos == y.size()) throw ValidationError("degenerate training labels");

  TrainedModel model;
  model.algorithm = config.algorithm;
  model.dim = x.cols();
  model.config = config;
  switch (config.algorithm) {
    case Algorithm::logreg: {
      std::vector<double> y01(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) y01[i] = y[i] == Label::gang ? 1.0 : 0.0;
      fit_logreg(x, y01, config, model);
      break;
    }
    case Algorithm::svm: {
      std::vector<double> ypm(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) ypm[i] = y[i] == Label::gang ? 1.0 : -1.0;
      fit_svm(x, ypm, config, model);
      break;
    }
    case Algorithm::random_forest: {
      std::vector<std::uint8_t> y8(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) y8[i] = y[i] == Label::gang ? 1 : 0;
      fit_forest(x, y8, config, model);
      break;
    }
  }
  return model;
}

Predictions predict(const TrainedModel& model, const Matrix& x) {
  if (x.rows() > 0 && x.cols() != model.dim)
    throw ValidationError("predict: dimension mismatch (model expects " +
                          std::to_string(model.dim) + ", got " + std::to_string(x.cols()) + ")");
  Predictions out;
  out.labels.reserve(x.rows());
  out.scores.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    double score = 0.0;
    bool gang = false;
    switch (model.algorithm) {
      case Algorithm::logreg:
        score = sigmoid(linear_score(model.weights, model.bias, row));
        gang = score > 0.5;
        break;
      case Algorithm::svm:
        score = linear_score(model.weights, model.bias, row);
        gang = score > 0.0;
        break;
      case Algorithm::random_forest:
        for (const auto& tree : model.trees) score += tree.predict(row);
        score /= static_cast<double>(model.trees.size());
        gang = score > 0.5;
        break;
    }
    out.scores.push_back(score);
    out.labels.push_back(gang ? Label::gang : Label::non_gang);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kFormat = "profvec-classifier";
constexpr int kVersion = 1;

json config_to_json(const TrainConfig& c) {
  return {{"algorithm", to_string(c.algorithm)},
          {"l2_strength", c.l2_strength},
          {"max_iters", c.max_iters},
          {"tolerance", c.tolerance},
          {"trees", c.trees},
          {"max_depth", c.max_depth},
          {"features_per_split", c.features_per_split},
          {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  auto algo = parse_algorithm(j.at("algorithm").get<std::string>());
  if (!algo) throw ParseError(0, "unknown algorithm in model config");
  c.algorithm = *algo;
  c.l2_strength = j.at("l2_strength").get<double>();
  c.max_iters = j.at("max_iters").get<std::size_t>();
  c.tolerance = j.at("tolerance").get<double>();
  c.trees = j.at("trees").get<std::size_t>();
  c.max_depth = j.at("max_depth").get<std::size_t>();
  c.features_per_split = j.at("features_per_split").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void write_model(const TrainedModel& model, std::ostream& out) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["algorithm"] = to_string(model.algorithm);
  doc["dim"] = model.dim;
  doc["config"] = config_to_json(model.config);
  doc["feature_names"] = model.feature_names;
  doc["optimizer"] = {{"iterations", model.iterations},
                      {"converged", model.converged},
                      {"gradient_norm", model.gradient_norm}};
  if (model.algorithm == Algorithm::random_forest) {
    json trees = json::array();
    for (const auto& tree : model.trees) {
      json feature = json::array(), threshold = json::array(), left = json::array(),
           right = json::array(), p = json::array();
      for (const auto& n : tree.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        p.push_back(n.p_gang);
      }
      trees.push_back({{"feature", feature},
                       {"threshold", threshold},
                       {"left", left},
                       {"right", right},
                       {"p_gang", p}});
    }
    doc["trees"] = std::move(trees);
  } else {
    doc["weights"] = model.weights;
    doc["bias"] = model.bias;
  }
  out << doc.dump() << '\n';
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write classifier");
  write_model(model, out);
  if (!out) throw IoError(path, "write failed");
}

TrainedModel read_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("classifier file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormat)
      throw ParseError(0, "not a profvec classifier file");
    if (doc.at("version").get<int>() != kVersion)
      throw ParseError(0, "unsupported classifier version " + doc.at("version").dump());
    TrainedModel model;
    auto algo = parse_algorithm(doc.at("algorithm").get<std::string>());
    if (!algo) throw ParseError(0, "unknown algorithm");
    model.algorithm = *algo;
    model.dim = doc.at("dim").get<std::size_t>();
    model.config = config_from_json(doc.at("config"));
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    const auto& opt = doc.at("optimizer");
    model.iterations = opt.at("iterations").get<std::size_t>();
    model.converged = opt.at("converged").get<bool>();
    model.gradient_norm = opt.at("gradient_norm").get<double>();
    if (model.algorithm == Algorithm::random_forest) {
      for (const auto& t : doc.at("trees")) {
        DecisionTree tree;
        const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
        const auto threshold = t.at("threshold").get<std::vector<double>>();
        const auto left = t.at("left").get<std::vector<std::uint32_t>>();
        const auto right = t.at("right").get<std::vector<std::uint32_t>>();
        const auto p = t.at("p_gang").get<std::vector<double>>();
        const std::size_t count = feature.size();
        if (count == 0 || threshold.size() != count || left.size() != count ||
            right.size() != count || p.size() != count)
          throw ParseError(0, "inconsistent tree arrays");
        for (std::size_t i = 0; i < count; ++i) {
          TreeNode n{feature[i], threshold[i], left[i], right[i], p[i]};
          if (!n.leaf() && (static_cast<std::size_t>(n.feature) >= model.dim ||
                            n.left >= count || n.right >= count || n.left <= i || n.right <= i))
            throw ParseError(0, "tree node references out of range");
          tree.nodes.push_back(n);
        }
        model.trees.push_back(std::move(tree));
      }
      if (model.trees.empty()) throw ParseError(0, "random forest without trees");
    } else {
      model.weights = doc.at("weights").get<std::vector<double>>();
      model.bias = doc.at("bias").get<double>();
      if (model.weights.size() != model.dim) throw ParseError(0, "weight vector length != dim");
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("classifier schema mismatch: ") + e.what());
  }
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open classifier");
  return read_model(in);
}

}  // namespace profvec
