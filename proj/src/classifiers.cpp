#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "coreset/parallel.hpp"
#include "coreset/synthbench.hpp"

namespace coreset {

namespace {

void check_subset(const SelectionResult& subset, const SyntheticDataset& ds) {
  if (subset.selected.empty()) throw std::invalid_argument("classifier subset is empty");
  if (subset.source_n != ds.train_size()) {
    throw std::invalid_argument("subset source_n=" + std::to_string(subset.source_n) +
                                " does not match training size " +
                                std::to_string(ds.train_size()));
  }
  subset.validate();
}

}  // namespace

double knn_accuracy(const SelectionResult& subset, const SyntheticDataset& ds, std::size_t k_nn,
                    std::size_t threads, std::string* warning) {
  if (k_nn == 0) throw std::invalid_argument("k-NN needs k >= 1");
  check_subset(subset, ds);
  const auto& sel = subset.selected;
  std::size_t k = k_nn;
  if (k > sel.size()) {
    k = sel.size();
    if (warning != nullptr) {
      *warning = "k-NN k=" + std::to_string(k_nn) + " exceeds subset size " +
                 std::to_string(sel.size()) + "; using k=" + std::to_string(k);
    }
  }
  const std::size_t d = ds.dims();
  const std::size_t classes = ds.classes();
  std::vector<char> correct(ds.test_size(), 0);

  parallel_for(ds.test_size(), threads, [&](std::size_t t) {
    const float* x = ds.test_points.row(t).data();
    // Sorted by (distance, subset position); small k makes insertion cheap.
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k + 1);
    for (std::size_t s = 0; s < sel.size(); ++s) {
      const float* y = ds.train_points.row(sel[s]).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = static_cast<double>(x[j]) - static_cast<double>(y[j]);
        acc += diff * diff;
      }
      if (best.size() == k && acc >= best.back().first) continue;
      std::pair<double, std::size_t> item{acc, s};
      best.insert(std::upper_bound(best.begin(), best.end(), item), item);
      if (best.size() > k) best.pop_back();
    }
    std::vector<std::size_t> votes(classes, 0);
    for (const auto& [dist, s] : best) ++votes[ds.train_labels[sel[s]]];
    const std::size_t top = *std::max_element(votes.begin(), votes.end());
    std::uint32_t pred = 0;
    for (const auto& [dist, s] : best) {
      const auto label = ds.train_labels[sel[s]];
      if (votes[label] == top) {
        pred = label;
        break;
      }
    }
    correct[t] = pred == ds.test_labels[t];
  });
  const auto hits = std::count(correct.begin(), correct.end(), char{1});
  return static_cast<double>(hits) / static_cast<double>(ds.test_size());
}

std::uint32_t LogRegModel::predict(std::span<const float> x,
                                   std::span<const std::uint32_t> tie_order) const {
  std::vector<double> logit(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double z = params[classes * dims + c];
    for (std::size_t j = 0; j < dims; ++j) z += params[c * dims + j] * static_cast<double>(x[j]);
    logit[c] = z;
  }
  const double top = *std::max_element(logit.begin(), logit.end());
  for (std::uint32_t c : tie_order) {
    if (logit[c] == top) return c;
  }
  return static_cast<std::uint32_t>(std::max_element(logit.begin(), logit.end()) - logit.begin());
}

double logreg_loss_and_gradient(const LogRegModel& model, const EmbeddingMatrix& x,
                                std::span<const std::uint32_t> labels,
                                std::vector<double>* gradient) {
  const std::size_t classes = model.classes;
  const std::size_t d = model.dims;
  if (x.rows() == 0) throw std::invalid_argument("logistic regression needs at least one row");
  if (x.cols() != d || labels.size() != x.rows() || model.params.size() != model.parameter_count()) {
    throw std::invalid_argument("logistic regression shape mismatch");
  }
  if (gradient != nullptr) gradient->assign(model.parameter_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  std::vector<double> z(classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const float* xi = x.row(i).data();
    for (std::size_t c = 0; c < classes; ++c) {
      double v = model.params[classes * d + c];
      for (std::size_t j = 0; j < d; ++j) v += model.params[c * d + j] * static_cast<double>(xi[j]);
      z[c] = v;
    }
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double v : z) total += std::exp(v - top);
    const double log_norm = top + std::log(total);
    loss += (log_norm - z[labels[i]]) * inv_n;
    if (gradient == nullptr) continue;
    for (std::size_t c = 0; c < classes; ++c) {
      const double resid = (std::exp(z[c] - log_norm) - (c == labels[i] ? 1.0 : 0.0)) * inv_n;
      for (std::size_t j = 0; j < d; ++j) (*gradient)[c * d + j] += resid * static_cast<double>(xi[j]);
      (*gradient)[classes * d + c] += resid;
    }
  }
  return loss;
}

LogRegModel train_logreg(const EmbeddingMatrix& x, std::span<const std::uint32_t> labels,
                         std::size_t classes, std::size_t epochs, double learning_rate) {
  if (classes < 2) throw std::invalid_argument("logistic regression needs at least 2 classes");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  for (std::uint32_t y : labels) {
    if (y >= classes) throw std::invalid_argument("label " + std::to_string(y) + " out of range");
  }
  LogRegModel model{classes, x.cols(), {}};
  model.params.assign(model.parameter_count(), 0.0);
  std::vector<double> grad;
  for (std::size_t e = 0; e < epochs; ++e) {
    const double loss = logreg_loss_and_gradient(model, x, labels, &grad);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("logistic regression diverged at epoch " + std::to_string(e));
    }
    for (std::size_t p = 0; p < grad.size(); ++p) {
      model.params[p] -= learning_rate * grad[p];
      if (!std::isfinite(model.params[p])) {
        throw std::runtime_error("logistic regression diverged at epoch " + std::to_string(e));
      }
    }
  }
  return model;
}

// Training is deterministic from zero weights; the seed is accepted so every
// classifier shares one call shape.
double logreg_accuracy(const SelectionResult& subset, const SyntheticDataset& ds,
                       std::size_t epochs, double learning_rate, std::uint64_t /*seed*/) {
  check_subset(subset, ds);
  const auto x = ds.train_points.select_rows(subset.selected);
  std::vector<std::uint32_t> labels;
  labels.reserve(subset.selected.size());
  for (std::size_t i : subset.selected) labels.push_back(ds.train_labels[i]);

  std::vector<std::size_t> freq(ds.classes(), 0);
  for (auto y : labels) ++freq[y];
  std::vector<std::uint32_t> tie_order(ds.classes());
  std::iota(tie_order.begin(), tie_order.end(), 0u);
  std::stable_sort(tie_order.begin(), tie_order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return freq[a] > freq[b]; });

  const auto model = train_logreg(x, labels, ds.classes(), epochs, learning_rate);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < ds.test_size(); ++t) {
    hits += model.predict(ds.test_points.row(t), tie_order) == ds.test_labels[t];
  }
  return static_cast<double>(hits) / static_cast<double>(ds.test_size());
}

}  // namespace coreset
