#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "profvec/ingest.hpp"
#include "profvec/matrix.hpp"

namespace profvec {

enum class Algorithm { logreg, svm, random_forest };

inline constexpr Algorithm kAlgorithms[] = {Algorithm::logreg, Algorithm::random_forest,
                                            Algorithm::svm};

std::string_view to_string(Algorithm algorithm);
/// Accepts "logreg", "svm", "random_forest" and the short forms "lr", "rf".
std::optional<Algorithm> parse_algorithm(std::string_view text);

struct TrainConfig {
  Algorithm algorithm = Algorithm::logreg;
  /// L2 penalty as (l2_strength / 2) * |w|^2 against the summed per-example
  /// loss, i.e. the inverse of the usual C parameter.
  double l2_strength = 1.0;
  std::size_t max_iters = 1000;
  double tolerance = 1e-6;
  std::size_t trees = 100;
  std::size_t max_depth = 0;           // 0: unlimited
  std::size_t features_per_split = 0;  // 0: ceil(sqrt(d))
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double p_gang = 0.0;        // leaf probability of the gang class; non_gang is 1 - p_gang

  bool leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  bool operator==(const DecisionTree&) const = default;
};

struct TrainedModel {
  Algorithm algorithm = Algorithm::logreg;
  std::size_t dim = 0;
  std::vector<double> weights;  // linear models
  double bias = 0.0;
  std::vector<DecisionTree> trees;  // random forest
  TrainConfig config;
  /// Column names when the features came from sparse token counts.
  std::vector<std::string> feature_names;
  // Optimizer summary (linear models).
  std::size_t iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
};

struct Predictions {
  std::vector<Label> labels;
  /// gang probability (logreg, random forest) or margin (svm)
  std::vector<double> scores;
};

/// Throws ValidationError("degenerate training labels") when y holds a
/// single class, and on empty or mismatched input.
TrainedModel train(const Matrix& x, std::span<const Label> y, const TrainConfig& config);
Predictions predict(const TrainedModel& model, const Matrix& x);

// Regularized logistic objective over y in {0, 1}; exposed for checks.
double logreg_loss(std::span<const double> w, double b, const Matrix& x,
                   std::span<const double> y01, double l2);
/// Gradient with respect to (w..., b).
std::vector<double> logreg_gradient(std::span<const double> w, double b, const Matrix& x,
                                    std::span<const double> y01, double l2);

/// Regularized mean hinge objective over y in {-1, +1} with the same
/// per-sum penalty scale as the logistic model (bias penalized too).
double svm_objective(std::span<const double> w, double b, const Matrix& x,
                     std::span<const double> y_pm, double l2);

/// Self-describing JSON document with a format tag and version.
void write_model(const TrainedModel& model, std::ostream& out);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel read_model(std::istream& in);
TrainedModel load_model(const std::string& path);

}  // namespace profvec
