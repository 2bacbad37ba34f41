#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coreset/data_model.hpp"
#include "coreset/selection.hpp"

namespace coreset {

struct MixtureSpec {
  std::size_t classes = 10;
  std::size_t dims = 16;
  std::size_t n = 10000;
  double sigma = 0.28;
  std::vector<double> class_weights;  // empty: uniform
  double mean_radius = 1.0;           // class means lie on this sphere
  double train_fraction = 0.8;
  // Fraction of the training split (hardest first) whose label is flipped to
  // a uniformly chosen other class.
  double label_noise = 0.0;
  std::uint64_t seed = 0;
};

// Isotropic Gaussian mixture with a stratified train/test split. Training
// labels may be noisy; test labels never are.
struct SyntheticDataset {
  EmbeddingMatrix train_points;
  EmbeddingMatrix test_points;
  std::vector<std::uint32_t> train_labels;        // observed (possibly flipped)
  std::vector<std::uint32_t> train_clean_labels;  // generating class
  std::vector<std::uint32_t> test_labels;
  std::vector<std::vector<double>> means;         // classes x dims
  std::vector<double> class_weights;              // normalized
  double sigma = 0.0;
  std::vector<std::size_t> flipped;               // train positions with flipped labels

  [[nodiscard]] std::size_t classes() const { return means.size(); }
  [[nodiscard]] std::size_t dims() const { return train_points.cols(); }
  [[nodiscard]] std::size_t train_size() const { return train_points.rows(); }
  [[nodiscard]] std::size_t test_size() const { return test_points.rows(); }
};

// Throws std::invalid_argument for degenerate parameters (C < 2, n < 2C,
// sigma <= 0, bad weights, or a class too small to appear in both splits).
SyntheticDataset generate_mixture(const MixtureSpec& spec);

// Named configurations: "default", "separable", "noisy".
std::optional<MixtureSpec> preset(std::string_view name);

// Bayes posterior over classes for one point under the generating mixture.
std::vector<double> class_posteriors(const SyntheticDataset& ds, std::span<const float> x);

// Training-split difficulty: 1 − posterior of the observed label.
ScoreTable analytic_difficulty(const SyntheticDataset& ds);

// Majority-vote k-NN test accuracy using only the selected training rows.
// Vote ties go to the tied class with the closest neighbour. k_nn larger than
// the subset is clamped (a warning goes to `warning` when non-null).
double knn_accuracy(const SelectionResult& subset, const SyntheticDataset& ds, std::size_t k_nn,
                    std::size_t threads = 1, std::string* warning = nullptr);

// Multinomial logistic regression, weights stored row-major as
// [class][dim] followed by one bias per class.
struct LogRegModel {
  std::size_t classes = 0;
  std::size_t dims = 0;
  std::vector<double> params;

  [[nodiscard]] std::size_t parameter_count() const { return classes * (dims + 1); }
  // argmax of logits; ties go to `tie_order` (first listed wins).
  [[nodiscard]] std::uint32_t predict(std::span<const float> x,
                                      std::span<const std::uint32_t> tie_order) const;
};

// Mean softmax cross-entropy over the rows and its gradient w.r.t. params.
double logreg_loss_and_gradient(const LogRegModel& model, const EmbeddingMatrix& x,
                                std::span<const std::uint32_t> labels,
                                std::vector<double>* gradient);

// Full-batch gradient descent from zero weights. Throws std::runtime_error
// when the loss becomes non-finite.
LogRegModel train_logreg(const EmbeddingMatrix& x, std::span<const std::uint32_t> labels,
                         std::size_t classes, std::size_t epochs, double learning_rate);

// Test accuracy of a model trained on the selected training rows. Logit ties
// (e.g. the untrained zero model) go to the most frequent class in the subset.
double logreg_accuracy(const SelectionResult& subset, const SyntheticDataset& ds,
                       std::size_t epochs, double learning_rate, std::uint64_t seed);

struct KnnClassifier {
  std::size_t k = 5;
};
struct LogRegClassifier {
  std::size_t epochs = 200;
  double learning_rate = 0.5;
};
using Classifier = std::variant<KnnClassifier, LogRegClassifier>;

double evaluate_accuracy(const Classifier& classifier, const SelectionResult& subset,
                         const SyntheticDataset& ds, std::uint64_t seed, std::size_t threads);

struct SweepRow {
  Method method = Method::random;
  double alpha = 0.0;
  double beta = 0.0;   // 0 for methods without a hard cutoff
  std::size_t k = 0;   // 0 for methods without strata
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double auc_pr = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct SweepConfig {
  std::vector<Method> methods;
  std::vector<double> alphas;
  std::vector<double> betas{0.0};  // ccs only; combinations with beta > alpha are skipped
  std::vector<std::size_t> ks{50}; // ccs and stratified
  std::vector<std::uint64_t> seeds{0};
  Classifier classifier = KnnClassifier{};
  std::size_t threads = 1;
};

// Cartesian product over the grid, rows in canonical order (method, alpha,
// beta, k, seed). Each row draws from a stream keyed by (seed, alpha, beta, k).
// AUC_pr uses coreset rows as centers and test rows as targets.
SweepResult sweep(const SyntheticDataset& ds, const SweepConfig& config);

std::string format_sweep_csv(const SweepResult& result);

// {0, 0.1, ..., ⌊10·alpha⌋ / 10}: every feasible cutoff on a 0.1 grid.
std::vector<double> default_beta_grid(double alpha);

struct BetaCandidate {
  double beta = 0.0;
  double median_accuracy = 0.0;
  std::vector<double> accuracies;  // per seed
};

struct BetaSearchResult {
  double best_beta = 0.0;
  std::vector<BetaCandidate> candidates;
};

// CCS accuracy for every beta; the best has the highest median over seeds
// (ties: smaller beta).
BetaSearchResult beta_grid_search(const SyntheticDataset& ds, double alpha, std::size_t k,
                                  std::span<const double> beta_grid,
                                  std::span<const std::uint64_t> seeds,
                                  const Classifier& classifier, std::size_t threads = 1);

std::string format_beta_search_csv(double alpha, std::size_t k, const BetaSearchResult& result);

double median(std::vector<double> values);

}  // namespace coreset
