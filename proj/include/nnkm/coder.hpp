#pragma once

// NNK sparse coding against a fixed dictionary.
//
// For a query q with atom similarities s = A^T k_q, the code is found on the
// k atoms most similar to q: solve the non-negative quadratic on that
// candidate set and prune what the solver left at (numerically) zero. The
// surviving atoms form a polytope around phi(q); redundant candidates get no
// weight, so the number of nonzeros adapts and may fall below k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nnkm/detail/parallel.hpp"
#include "nnkm/dictionary.hpp"
#include "nnkm/error.hpp"
#include "nnkm/kernel.hpp"
#include "nnkm/nnls.hpp"

namespace nnkm {

struct CodingConfig {
  int sparsity_k = 5;
  double prune_rel_tol = 1e-10;
  int nnls_max_iter = 500;
  // Candidates passed to the solver; 0 means exactly sparsity_k.
  int candidate_pool = 0;
  // With k = 1, assign to the nearest atom in kernel distance with weight 1
  // (kernel kMeans) instead of the most similar atom with its NNLS weight.
  bool kmeans_when_one_sparse = true;

  void validate() const {
    if (sparsity_k < 1) throw usage_error("sparsity_k must be >= 1");
    if (!(prune_rel_tol > 0.0 && prune_rel_tol < 1.0)) {
      throw usage_error("prune_rel_tol must lie in (0, 1)");
    }
    if (nnls_max_iter < 1) throw usage_error("nnls_max_iter must be >= 1");
    if (candidate_pool < 0) throw usage_error("candidate_pool must be >= 0");
  }
};

struct CodeEntry {
  Eigen::Index atom = 0;
  double weight = 0.0;

  friend bool operator==(const CodeEntry&, const CodeEntry&) = default;
};

// One column of W. Entries have strictly increasing atom indices and strictly
// positive weights.
struct SparseCode {
  std::vector<CodeEntry> entries;
  double query_self_similarity = 0.0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  Vector dense(Eigen::Index atoms) const {
    Vector w = Vector::Zero(atoms);
    for (const auto& e : entries) w[e.atom] = e.weight;
    return w;
  }

  friend bool operator==(const SparseCode&, const SparseCode&) = default;
};

// Indices of the min(k, M) largest similarities, ties to the lowest index,
// returned in increasing index order.
inline std::vector<Eigen::Index> select_candidates(const Eigen::Ref<const Vector>& sims, int k) {
  if (sims.size() == 0) throw usage_error("select_candidates: empty dictionary");
  if (k < 1) throw usage_error("select_candidates: k must be >= 1");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(sims.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
                    });
  order.resize(take);
  std::sort(order.begin(), order.end());
  return order;
}

namespace detail {

// kappa(q,q) - 2 theta^T s + theta^T G theta, clamped at zero.
inline double code_error(double self_similarity, const SparseCode& code,
                         const Eigen::Ref<const Vector>& sims,
                         const Eigen::Ref<const Matrix>& atom_gram) {
  double linear = 0.0;
  double quadratic = 0.0;
  for (const auto& a : code.entries) {
    linear += a.weight * sims[a.atom];
    for (const auto& b : code.entries) quadratic += a.weight * atom_gram(a.atom, b.atom) * b.weight;
  }
  return std::max(0.0, self_similarity - 2.0 * linear + quadratic);
}

}  // namespace detail

// ||phi_q - Phi A theta||^2 for a code produced against the dictionary whose
// atom similarities are `sims` and atom Gram is `atom_gram`.
inline double reconstruction_error(const SparseCode& code, const Eigen::Ref<const Vector>& sims,
                                   const Eigen::Ref<const Matrix>& atom_gram) {
  return detail::code_error(code.query_self_similarity, code, sims, atom_gram);
}

inline double reconstruction_error(const SparseCode& code, const Eigen::Ref<const Vector>& sims,
                                   const Dictionary& dict) {
  detail::check_same_dims(sims.size(), dict.atoms());
  return reconstruction_error(code, sims, dict.atom_gram());
}

namespace detail {

inline SparseCode nearest_atom_code(double self_similarity, const Eigen::Ref<const Vector>& sims,
                                    const Eigen::Ref<const Matrix>& atom_gram) {
  SparseCode code;
  code.query_self_similarity = self_similarity;
  Eigen::Index best = 0;
  double best_error = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < sims.size(); ++m) {
    // Same expression as reconstruction_error for a unit weight on atom m.
    const double error = self_similarity - 2.0 * (1.0 * sims[m]) + 1.0 * atom_gram(m, m) * 1.0;
    if (error < best_error) {
      best_error = error;
      best = m;
    }
  }
  code.entries.push_back({best, 1.0});
  return code;
}

inline Vector solve_on(const std::vector<Eigen::Index>& support, const Eigen::Ref<const Vector>& sims,
                       const Eigen::Ref<const Matrix>& atom_gram, int max_iter) {
  const auto n = static_cast<Eigen::Index>(support.size());
  Matrix kss(n, n);
  Vector ks(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    ks[a] = sims[support[a]];
    for (Eigen::Index b = 0; b < n; ++b) kss(a, b) = atom_gram(support[a], support[b]);
  }
  return nnls_on_support(kss, ks, max_iter);
}

}  // namespace detail

// Codes one query from its self-similarity kappa(q,q), its atom similarities
// and the atom Gram. Shared by the trainer (similarities from K A) and by
// code_one (similarities from a kernel row against the support).
inline SparseCode code_from_similarities(double self_similarity, const Eigen::Ref<const Vector>& sims,
                                         const Eigen::Ref<const Matrix>& atom_gram,
                                         const CodingConfig& config) {
  const Eigen::Index atoms = sims.size();
  if (atoms == 0) throw usage_error("cannot code against an empty dictionary");
  detail::check_same_dims(atom_gram.rows(), atoms);

  if (config.sparsity_k == 1 && config.kmeans_when_one_sparse) {
    return detail::nearest_atom_code(self_similarity, sims, atom_gram);
  }

  SparseCode code;
  code.query_self_similarity = self_similarity;
  if ((sims.array() == 0.0).all()) return code;

  const int budget = static_cast<int>(std::min<Eigen::Index>(config.sparsity_k, atoms));
  const int pool = std::max(config.candidate_pool, budget);
  std::vector<Eigen::Index> support = select_candidates(sims, pool);
  Vector theta = detail::solve_on(support, sims, atom_gram, config.nnls_max_iter);

  // A pool wider than k can leave more than k positive weights; keep the k
  // largest and re-solve on them.
  for (;;) {
    std::vector<Eigen::Index> order;
    for (Eigen::Index a = 0; a < theta.size(); ++a) {
      if (theta[a] > 0.0) order.push_back(a);
    }
    if (static_cast<int>(order.size()) <= budget) break;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return theta[a] > theta[b]; });
    order.resize(static_cast<std::size_t>(budget));
    std::sort(order.begin(), order.end());
    std::vector<Eigen::Index> narrowed;
    for (const Eigen::Index a : order) narrowed.push_back(support[a]);
    support = std::move(narrowed);
    theta = detail::solve_on(support, sims, atom_gram, config.nnls_max_iter);
  }

  const double max_weight = theta.size() > 0 ? theta.maxCoeff() : 0.0;
  if (!(max_weight > 0.0)) return code;
  const double floor = config.prune_rel_tol * max_weight;
  for (std::size_t a = 0; a < support.size(); ++a) {
    const double w = theta[static_cast<Eigen::Index>(a)];
    if (w > floor) code.entries.push_back({support[a], w});
  }
  return code;
}

inline SparseCode code_one(const Eigen::Ref<const Vector>& query, const Dictionary& dict,
                           const CodingConfig& config) {
  config.validate();
  detail::check_same_dims(query.size(), dict.dims());
  const double self_similarity = kernel_eval(query, query, dict.kernel());
  return code_from_similarities(self_similarity, dict.query_similarities(query), dict.atom_gram(),
                                config);
}

struct CodingFailure {
  std::size_t index = 0;
  ErrorKind kind = ErrorKind::numerical;
  std::string message;
};

struct CodeBatch {
  std::vector<SparseCode> codes;
  std::vector<double> errors;  // reconstruction error per query
  std::vector<CodingFailure> failures;

  bool ok() const { return failures.empty(); }

  // Rethrows the lowest-index failure, if any.
  void throw_if_failed() const {
    if (!failures.empty()) {
      throw SampleError(failures.front().kind, failures.front().index, failures.front().message);
    }
  }
};

// Codes every column of `queries`. Each column goes through exactly the same
// scalar path as code_one, so results are identical to the sequential loop
// for any thread count. Failed samples get an empty code, a NaN error and a
// failure record; the rest are still coded.
inline CodeBatch code_batch(const Eigen::Ref<const Matrix>& queries, const Dictionary& dict,
                            const CodingConfig& config, int threads = 1) {
  config.validate();
  detail::check_same_dims(queries.rows(), dict.dims());
  const auto n = static_cast<std::size_t>(queries.cols());
  CodeBatch batch;
  batch.codes.resize(n);
  batch.errors.assign(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::optional<CodingFailure>> failed(n);

  detail::parallel_for(n, threads, [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    try {
      const Vector sims = dict.query_similarities(queries.col(col));
      const double self_similarity = kernel_eval(queries.col(col), queries.col(col), dict.kernel());
      batch.codes[i] = code_from_similarities(self_similarity, sims, dict.atom_gram(), config);
      batch.errors[i] = reconstruction_error(batch.codes[i], sims, dict.atom_gram());
    } catch (const Error& e) {
      failed[i] = CodingFailure{i, e.kind(), e.what()};
    } catch (const std::exception& e) {
      failed[i] = CodingFailure{i, ErrorKind::numerical, e.what()};
    }
  });
  for (auto& f : failed) {
    if (f) batch.failures.push_back(std::move(*f));
  }
  return batch;
}

inline CodeBatch code_batch(const FeatureMatrix& queries, const Dictionary& dict,
                            const CodingConfig& config, int threads = 1) {
  return code_batch(queries.data, dict, config, threads);
}

}  // namespace nnkm
