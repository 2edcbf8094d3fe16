#pragma once

// NNK-Means training: alternate NNK sparse coding of every sample against the
// current dictionary with the closed-form update A = W^T (W W^T)^{-1}, which
// is the exact minimizer of ||Phi - Phi A W||_F^2 for fixed codes. With k = 1
// the codes are cluster indicators, W W^T is the diagonal of cluster sizes and
// the update is the kernel kMeans centroid step.
//
// During training the support is the whole training set (A is N x M); the
// returned dictionary is trimmed to the samples with a nonzero row in A.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "nnkm/coder.hpp"
#include "nnkm/detail/parallel.hpp"
#include "nnkm/dictionary.hpp"
#include "nnkm/error.hpp"
#include "nnkm/kernel.hpp"
#include "nnkm/random.hpp"

namespace nnkm {

enum class DeadAtomPolicy { reseed_worst, drop };
enum class InitMethod { uniform, kmeans_plus_plus };

struct FitConfig {
  int atoms_M = 10;
  int sparsity_k = 5;
  int max_iters = 10;
  double rel_obj_tol = 1e-6;
  std::uint64_t seed = 0;
  DeadAtomPolicy dead_atom_policy = DeadAtomPolicy::reseed_worst;
  InitMethod init = InitMethod::uniform;
  // Keep a sample's previous code when it still beats the new one under the
  // current dictionary. Makes every coding step non-increasing.
  bool monotone_guard = true;

  double prune_rel_tol = 1e-10;
  int nnls_max_iter = 500;
  int candidate_pool = 0;
  bool kmeans_when_one_sparse = true;

  int threads = 1;
  Eigen::Index gram_cap = kDefaultGramCap;

  CodingConfig coding() const {
    CodingConfig c;
    c.sparsity_k = sparsity_k;
    c.prune_rel_tol = prune_rel_tol;
    c.nnls_max_iter = nnls_max_iter;
    c.candidate_pool = candidate_pool;
    c.kmeans_when_one_sparse = kmeans_when_one_sparse;
    return c;
  }

  void validate(Eigen::Index samples) const {
    if (atoms_M < 1) throw usage_error("atoms_M must be >= 1");
    if (atoms_M > samples) {
      throw usage_error("atoms_M (" + std::to_string(atoms_M) + ") exceeds the number of samples (" +
                        std::to_string(samples) + ")");
    }
    if (max_iters < 1) throw usage_error("max_iters must be >= 1");
    if (!(rel_obj_tol > 0.0)) throw usage_error("rel_obj_tol must be > 0");
    coding().validate();
  }
};

struct DeadAtomEvent {
  int iteration = 0;
  Eigen::Index atom = 0;

  friend bool operator==(const DeadAtomEvent&, const DeadAtomEvent&) = default;
};

struct PhaseTiming {
  double coding_s = 0.0;
  double update_s = 0.0;
};

struct FitReport {
  std::vector<double> objective_per_iter;  // ||Phi - Phi A W||_F^2 after each update
  std::vector<DeadAtomEvent> dead_atom_events;
  std::vector<PhaseTiming> wall_time_per_phase;
  std::vector<std::size_t> guard_rejections;  // codes kept from the previous iteration
  bool converged = false;

  int iterations() const { return static_cast<int>(objective_per_iter.size()); }

  // Iterations are numbered from 1.
  bool had_dead_atoms(int iteration) const {
    return std::any_of(dead_atom_events.begin(), dead_atom_events.end(),
                       [&](const DeadAtomEvent& e) { return e.iteration == iteration; });
  }

  // Non-increasing objective across every pair of consecutive iterations
  // where the later one had no dead-atom event.
  bool monotone(double rel_slack = 1e-9) const {
    for (int t = 1; t < iterations(); ++t) {
      if (had_dead_atoms(t + 1)) continue;
      const double prev = objective_per_iter[static_cast<std::size_t>(t - 1)];
      const double next = objective_per_iter[static_cast<std::size_t>(t)];
      if (next > prev + rel_slack * std::max(1.0, prev)) return false;
    }
    return true;
  }
};

struct IterationState {
  int iteration = 0;
  double objective = 0.0;
  std::size_t dead_atoms = 0;
  const std::vector<SparseCode>& codes;
  const Matrix& coefficients;  // N x M, rows indexed by training sample
};

using ProgressCallback = std::function<void(const IterationState&)>;

struct FitResult {
  Dictionary dictionary;
  FitReport report;
};

// Training-sample indices of the initial atoms, in atom order.
inline std::vector<Eigen::Index> initial_atoms(const GramView& gram, const FitConfig& config) {
  const Eigen::Index n = gram.size();
  config.validate(n);
  const auto count = static_cast<std::size_t>(config.atoms_M);
  Rng rng(config.seed);
  std::vector<Eigen::Index> chosen;
  if (config.init == InitMethod::uniform) {
    for (const std::size_t i : sample_without_replacement(static_cast<std::size_t>(n), count, rng)) {
      chosen.push_back(static_cast<Eigen::Index>(i));
    }
    return chosen;
  }

  // kMeans++ seeding with squared RKHS distances.
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  const Vector diag = gram.diagonal();
  Vector nearest = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Eigen::Index next = static_cast<Eigen::Index>(rng.uniform_below(static_cast<std::uint64_t>(n)));
  while (chosen.size() < count) {
    chosen.push_back(next);
    taken[static_cast<std::size_t>(next)] = true;
    const Vector row = gram.row(next);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = std::max(0.0, diag[i] + diag[next] - 2.0 * row[i]);
      nearest[i] = std::min(nearest[i], d);
      if (!taken[static_cast<std::size_t>(i)]) total += nearest[i];
    }
    if (chosen.size() == count) break;
    next = -1;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double running = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        running += nearest[i];
        if (running > target) {
          next = i;
          break;
        }
      }
    }
    if (next < 0) {
      // All remaining mass is zero (duplicates) or round-off ran past the end.
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!taken[static_cast<std::size_t>(i)]) free.push_back(i);
      }
      next = free[static_cast<std::size_t>(rng.uniform_below(free.size()))];
    }
  }
  return chosen;
}

// M distinct training samples as atoms: A's columns are basis vectors. The
// returned dictionary is trimmed, so its support holds the chosen samples in
// increasing sample order and A is a permutation matrix.
inline Dictionary init_dictionary(const FeatureMatrix& data, const KernelSpec& kernel,
                                  const FitConfig& config) {
  data.validate();
  const GramView gram = GramView::on_the_fly(data.data, kernel);
  const auto chosen = initial_atoms(gram, config);
  Matrix a = Matrix::Zero(data.samples(), config.atoms_M);
  for (std::size_t m = 0; m < chosen.size(); ++m) a(chosen[m], static_cast<Eigen::Index>(m)) = 1.0;
  return Dictionary::trimmed(data.data, a, kernel, {config.sparsity_k, 0, config.seed});
}

// A = W^T (W W^T)^{-1} for the sparse M x N code matrix whose columns are
// `codes`. Returns the N x M coefficient matrix. Cost O(M^3 + N M k).
inline Matrix dictionary_update(const std::vector<SparseCode>& codes, Eigen::Index atoms) {
  if (atoms < 1) throw usage_error("dictionary_update: need at least one atom");
  Matrix wwt = Matrix::Zero(atoms, atoms);
  for (const auto& code : codes) {
    for (const auto& a : code.entries) {
      if (a.atom < 0 || a.atom >= atoms) throw usage_error("dictionary_update: atom index out of range");
      if (!(a.weight >= 0.0)) throw usage_error("dictionary_update: codes must be non-negative");
      for (const auto& b : code.entries) wwt(a.atom, b.atom) += a.weight * b.weight;
    }
  }
  for (Eigen::Index m = 0; m < atoms; ++m) {
    if (wwt(m, m) == 0.0) {
      throw numerical_error("dictionary_update: atom " + std::to_string(m) +
                            " is unused, W W^T is singular");
    }
  }
  Eigen::LLT<Matrix> llt(wwt);
  if (llt.info() != Eigen::Success) {
    Matrix jittered = wwt;
    jittered.diagonal().array() += 1e-8 * wwt.trace() / static_cast<double>(atoms);
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("dictionary_update: W W^T is singular even after jitter");
    }
  }
  const Matrix inverse = llt.solve(Matrix::Identity(atoms, atoms));
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(codes.size()), atoms);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (const auto& e : codes[i].entries) {
      a.row(static_cast<Eigen::Index>(i)) += e.weight * inverse.row(e.atom);
    }
  }
  return a;
}

namespace detail {

inline double objective_from(const Vector& diag, const Matrix& gram_a, const Matrix& atom_gram,
                             const std::vector<SparseCode>& codes) {
  double total = 0.0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    total += code_error(diag[row], codes[i], gram_a.row(row).transpose(), atom_gram);
  }
  return std::max(0.0, total);
}

}  // namespace detail

// ||Phi - Phi A W||_F^2 = tr(K) - 2 tr(K A W) + tr(W^T A^T K A W), evaluated
// per sample through the Gram.
inline double objective(const GramView& gram, const Matrix& coefficients,
                        const std::vector<SparseCode>& codes) {
  detail::check_same_dims(coefficients.rows(), gram.size());
  if (static_cast<Eigen::Index>(codes.size()) != gram.size()) {
    throw usage_error("objective: one code per sample required");
  }
  const Matrix gram_a = gram.times(coefficients);
  return detail::objective_from(gram.diagonal(), gram_a, detail::atom_gram(coefficients, gram_a), codes);
}

inline double objective(const FeatureMatrix& data, const KernelSpec& kernel,
                        const Matrix& coefficients, const std::vector<SparseCode>& codes) {
  return objective(GramView::automatic(data.data, kernel), coefficients, codes);
}

struct DeadAtomOutcome {
  std::vector<SparseCode> codes;
  std::vector<Eigen::Index> dead;  // atom indices before any renumbering
  Eigen::Index atoms = 0;          // atom count after handling
};

// Atoms that no code uses make W W^T singular. reseed_worst hands each dead
// atom (ascending) the not-yet-reseeded sample with the largest current
// error, coded 1-sparse onto that atom with weight 1; this repeats while the
// reseeding itself empties other atoms. drop removes dead atoms and
// renumbers the survivors.
inline DeadAtomOutcome handle_dead_atoms(std::vector<SparseCode> codes, const std::vector<double>& errors,
                                         Eigen::Index atoms, DeadAtomPolicy policy) {
  if (errors.size() != codes.size()) throw usage_error("handle_dead_atoms: one error per code required");
  DeadAtomOutcome out;
  const auto usage = [&] {
    std::vector<std::size_t> counts(static_cast<std::size_t>(atoms), 0);
    for (const auto& c : codes) {
      for (const auto& e : c.entries) ++counts[static_cast<std::size_t>(e.atom)];
    }
    return counts;
  };

  if (policy == DeadAtomPolicy::drop) {
    const auto counts = usage();
    std::vector<Eigen::Index> renumber(static_cast<std::size_t>(atoms), -1);
    Eigen::Index kept = 0;
    for (Eigen::Index m = 0; m < atoms; ++m) {
      if (counts[static_cast<std::size_t>(m)] == 0) {
        out.dead.push_back(m);
      } else {
        renumber[static_cast<std::size_t>(m)] = kept++;
      }
    }
    if (kept == 0) throw numerical_error("every atom is unused; nothing left to update");
    for (auto& c : codes) {
      for (auto& e : c.entries) e.atom = renumber[static_cast<std::size_t>(e.atom)];
    }
    out.atoms = kept;
    out.codes = std::move(codes);
    return out;
  }

  std::vector<bool> reseeded(codes.size(), false);
  for (;;) {
    const auto counts = usage();
    bool changed = false;
    for (Eigen::Index m = 0; m < atoms; ++m) {
      if (counts[static_cast<std::size_t>(m)] != 0) continue;
      std::size_t worst = codes.size();
      double worst_error = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < codes.size(); ++i) {
        if (!reseeded[i] && errors[i] > worst_error) {
          worst_error = errors[i];
          worst = i;
        }
      }
      if (worst == codes.size()) throw numerical_error("no sample left to reseed a dead atom");
      reseeded[worst] = true;
      codes[worst].entries.assign(1, CodeEntry{m, 1.0});
      out.dead.push_back(m);
      changed = true;
      break;  // recount: the reseeded sample may have been another atom's last user
    }
    if (!changed) break;
  }
  out.atoms = atoms;
  out.codes = std::move(codes);
  return out;
}

inline FitResult fit(const FeatureMatrix& data, const KernelSpec& kernel, const FitConfig& config,
                     const ProgressCallback& progress = {}) {
  using Clock = std::chrono::steady_clock;
  const auto seconds = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };

  data.validate();
  kernel.validate();
  const Eigen::Index n = data.samples();
  config.validate(n);
  const CodingConfig coding = config.coding();

  const GramView gram = GramView::automatic(data.data, kernel, config.gram_cap);
  const Vector diag = gram.diagonal();
  Eigen::Index atoms = config.atoms_M;

  Matrix a = Matrix::Zero(n, atoms);
  {
    const auto chosen = initial_atoms(gram, config);
    for (std::size_t m = 0; m < chosen.size(); ++m) a(chosen[m], static_cast<Eigen::Index>(m)) = 1.0;
  }
  Matrix gram_a = gram.times(a);
  Matrix g = detail::atom_gram(a, gram_a);

  FitReport report;
  std::vector<SparseCode> previous;
  const auto count = static_cast<std::size_t>(n);

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    const auto t0 = Clock::now();
    std::vector<SparseCode> codes(count);
    std::vector<double> errors(count);
    std::vector<unsigned char> kept_previous(count, 0);
    std::vector<std::optional<CodingFailure>> failed(count);

    detail::parallel_for(count, config.threads, [&](std::size_t i) {
      const auto row = static_cast<Eigen::Index>(i);
      try {
        const Vector sims = gram_a.row(row).transpose();
        SparseCode code = code_from_similarities(diag[row], sims, g, coding);
        double error = detail::code_error(diag[row], code, sims, g);
        if (config.monotone_guard && !previous.empty()) {
          const double before = detail::code_error(diag[row], previous[i], sims, g);
          if (before < error) {
            code = previous[i];
            error = before;
            kept_previous[i] = 1;
          }
        }
        codes[i] = std::move(code);
        errors[i] = error;
      } catch (const Error& e) {
        failed[i] = CodingFailure{i, e.kind(), e.what()};
      }
    });
    for (const auto& f : failed) {
      if (f) {
        throw SampleError(f->kind, f->index,
                          "iteration " + std::to_string(iter) + ": " + f->message);
      }
    }
    const bool stable = !previous.empty() && codes == previous;
    const auto t1 = Clock::now();

    DeadAtomOutcome handled = handle_dead_atoms(std::move(codes), errors, atoms, config.dead_atom_policy);
    for (const Eigen::Index m : handled.dead) report.dead_atom_events.push_back({iter, m});
    atoms = handled.atoms;
    codes = std::move(handled.codes);

    try {
      a = dictionary_update(codes, atoms);
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(iter) + ": " + e.what());
    }
    gram_a = gram.times(a);
    g = detail::atom_gram(a, gram_a);
    const double obj = detail::objective_from(diag, gram_a, g, codes);
    const auto t2 = Clock::now();

    report.objective_per_iter.push_back(obj);
    report.wall_time_per_phase.push_back({seconds(t0, t1), seconds(t1, t2)});
    report.guard_rejections.push_back(
        static_cast<std::size_t>(std::count(kept_previous.begin(), kept_previous.end(), 1)));
    if (progress) progress(IterationState{iter, obj, handled.dead.size(), codes, a});

    if (handled.dead.empty()) {
      if (stable) {
        report.converged = true;
        break;
      }
      if (iter > 1) {
        const double prev = report.objective_per_iter[report.objective_per_iter.size() - 2];
        if (prev - obj < config.rel_obj_tol * prev || prev == 0.0) {
          report.converged = true;
          break;
        }
      }
    }
    previous = std::move(codes);
  }

  DictionaryMeta meta{config.sparsity_k, report.iterations(), config.seed};
  return {Dictionary::trimmed(data.data, a, kernel, meta), std::move(report)};
}

}  // namespace nnkm
