#pragma once

// One dictionary per class; a query goes to the class whose dictionary
// reconstructs it with the lowest kernel-space error.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nnkm/coder.hpp"
#include "nnkm/dictionary.hpp"
#include "nnkm/error.hpp"
#include "nnkm/kernel.hpp"
#include "nnkm/trainer.hpp"

namespace nnkm {

struct ClassifierModel {
  std::vector<Dictionary> dictionaries;
  std::vector<int> class_ids;  // class_ids[c] labels dictionaries[c]

  std::size_t classes() const { return dictionaries.size(); }

  void validate() const {
    if (dictionaries.empty()) throw data_error("classifier model has no dictionaries");
    if (dictionaries.size() != class_ids.size()) {
      throw data_error("classifier model: one class id per dictionary required");
    }
    std::vector<int> sorted = class_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw data_error("classifier model: class ids must be unique");
    }
    for (const auto& d : dictionaries) {
      if (!(d.kernel() == dictionaries.front().kernel()) ||
          d.meta().sparsity_k != dictionaries.front().meta().sparsity_k) {
        throw data_error("classifier model: dictionaries must share kernel and sparsity");
      }
      if (d.dims() != dictionaries.front().dims()) {
        throw data_error("classifier model: dictionaries must share feature dimension");
      }
    }
  }

  Eigen::Index dims() const { return dictionaries.front().dims(); }
  const KernelSpec& kernel() const { return dictionaries.front().kernel(); }
  int sparsity_k() const { return dictionaries.front().meta().sparsity_k; }
};

// Class ids in increasing order with the member indices of each.
inline std::map<int, std::vector<Eigen::Index>> partition_by_label(const FeatureMatrix& data) {
  if (!data.labels) throw data_error("labels are required for per-class training");
  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < data.labels->size(); ++i) {
    members[(*data.labels)[i]].push_back(static_cast<Eigen::Index>(i));
  }
  return members;
}

// Trains one dictionary per label with seed config.seed + class_id, so adding
// a class leaves the other dictionaries untouched.
inline ClassifierModel fit_per_class(const FeatureMatrix& data, const KernelSpec& kernel,
                                     const FitConfig& config, std::vector<FitReport>* reports = nullptr) {
  data.validate();
  const auto members = partition_by_label(data);
  for (const auto& [label, idx] : members) {
    if (static_cast<Eigen::Index>(idx.size()) < config.atoms_M) {
      throw data_error("class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                       " samples, fewer than atoms_M = " + std::to_string(config.atoms_M));
    }
  }
  ClassifierModel model;
  if (reports) reports->clear();
  for (const auto& [label, idx] : members) {
    FitConfig per_class = config;
    per_class.seed = config.seed + static_cast<std::uint64_t>(label);
    FeatureMatrix subset = data.subset(idx);
    subset.labels.reset();
    try {
      FitResult result = fit(subset, kernel, per_class);
      model.dictionaries.push_back(std::move(result.dictionary));
      if (reports) reports->push_back(std::move(result.report));
    } catch (const Error& e) {
      throw Error(e.kind(), "class " + std::to_string(label) + ": " + e.what());
    }
    model.class_ids.push_back(label);
  }
  return model;
}

struct Classification {
  std::vector<int> labels;  // predicted class id per query
  Matrix errors;            // Q x C reconstruction errors, column c for class_ids[c]
};

// Lowest error wins; ties go to the lowest class id.
inline std::vector<int> predict_from_errors(const Matrix& errors, const std::vector<int>& class_ids) {
  detail::check_same_dims(errors.cols(), static_cast<Eigen::Index>(class_ids.size()));
  std::vector<Eigen::Index> order(class_ids.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<Eigen::Index>(c);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return class_ids[a] < class_ids[b]; });
  std::vector<int> labels(static_cast<std::size_t>(errors.rows()));
  for (Eigen::Index q = 0; q < errors.rows(); ++q) {
    Eigen::Index best = order.front();
    for (const Eigen::Index c : order) {
      if (errors(q, c) < errors(q, best)) best = c;
    }
    labels[static_cast<std::size_t>(q)] = class_ids[static_cast<std::size_t>(best)];
  }
  return labels;
}

inline Classification classify(const Eigen::Ref<const Matrix>& queries, const ClassifierModel& model,
                               const CodingConfig& config, int threads = 1) {
  model.validate();
  detail::check_same_dims(queries.rows(), model.dims());
  Classification out;
  out.errors.resize(queries.cols(), static_cast<Eigen::Index>(model.classes()));
  for (std::size_t c = 0; c < model.classes(); ++c) {
    const CodeBatch batch = code_batch(queries, model.dictionaries[c], config, threads);
    batch.throw_if_failed();
    for (Eigen::Index q = 0; q < queries.cols(); ++q) {
      out.errors(q, static_cast<Eigen::Index>(c)) = batch.errors[static_cast<std::size_t>(q)];
    }
  }
  out.labels = predict_from_errors(out.errors, model.class_ids);
  return out;
}

inline Classification classify(const FeatureMatrix& queries, const ClassifierModel& model,
                               const CodingConfig& config, int threads = 1) {
  return classify(queries.data, model, config, threads);
}

// Coding config matching the sparsity the model was trained with.
inline CodingConfig coding_for(const ClassifierModel& model) {
  CodingConfig c;
  c.sparsity_k = model.sparsity_k();
  return c;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw usage_error("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                      std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw usage_error("accuracy: empty label vectors");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace nnkm
