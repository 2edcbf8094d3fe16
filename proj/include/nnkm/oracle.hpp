#pragma once

// Brute-force references for tests. Nothing here calls the production
// solvers: linear systems go through a naive Gaussian elimination so that a
// bug in the Cholesky paths cannot cancel out against itself.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nnkm/dictionary.hpp"
#include "nnkm/error.hpp"
#include "nnkm/kernel.hpp"
#include "nnkm/random.hpp"

namespace nnkm::oracle {

struct OracleBudget {
  int max_support = 12;
  Eigen::Index max_samples = 5000;
};

// Solves a x = b by elimination with partial pivoting. Returns nullopt when a
// pivot falls below rel_tol times the largest entry of a.
inline std::optional<Vector> gauss_solve(Matrix a, Vector b, double rel_tol = 1e-12) {
  const Eigen::Index n = a.rows();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
  }
  if (n > 0 && scale == 0.0) return std::nullopt;
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (std::abs(a(pivot, col)) <= rel_tol * scale) return std::nullopt;
    if (pivot != col) {
      for (Eigen::Index j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
      std::swap(b[col], b[pivot]);
    }
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      for (Eigen::Index j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  Vector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (Eigen::Index j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

inline double quadratic(const Matrix& kss, const Vector& ks, const Vector& theta) {
  double q = 0.0;
  double l = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    l += ks[i] * theta[i];
    for (Eigen::Index j = 0; j < theta.size(); ++j) q += theta[i] * kss(i, j) * theta[j];
  }
  return q - 2.0 * l;
}

struct NnlsSolution {
  Vector theta;
  double objective = 0.0;  // theta^T Kss theta - 2 ks^T theta
};

// Global minimizer of theta^T Kss theta - 2 ks^T theta over theta >= 0 by
// trying every active set.
inline NnlsSolution nnls_enumerate(const Matrix& kss, const Vector& ks, const OracleBudget& budget = {}) {
  const Eigen::Index n = ks.size();
  if (kss.rows() != n || kss.cols() != n) throw usage_error("nnls_enumerate: shape mismatch");
  if (n > budget.max_support || n > 20) {
    throw usage_error("nnls_enumerate: support of " + std::to_string(n) + " exceeds the oracle budget");
  }
  NnlsSolution best{Vector::Zero(n), 0.0};
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(idx.size());
    Matrix sub(m, m);
    Vector rhs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      rhs[a] = ks[idx[a]];
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = kss(idx[a], idx[b]);
    }
    const auto x = gauss_solve(sub, rhs);
    if (!x) continue;
    Vector theta = Vector::Zero(n);
    bool feasible = true;
    for (Eigen::Index a = 0; a < m; ++a) {
      if ((*x)[a] < -1e-12) {
        feasible = false;
        break;
      }
      theta[idx[a]] = std::max(0.0, (*x)[a]);
    }
    if (!feasible) continue;
    const double obj = quadratic(kss, ks, theta);
    if (obj < best.objective) best = {theta, obj};
  }
  return best;
}

// Largest violation of the KKT conditions, in absolute units: stationarity on
// positive entries, dual feasibility on zero entries, primal feasibility.
inline double kkt_violation(const Matrix& kss, const Vector& ks, const Vector& theta) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    double grad = -ks[i];
    for (Eigen::Index j = 0; j < theta.size(); ++j) grad += kss(i, j) * theta[j];
    if (theta[i] < 0.0) worst = std::max(worst, -theta[i]);
    if (theta[i] > 0.0) {
      worst = std::max(worst, std::abs(grad));
    } else {
      worst = std::max(worst, -grad);
    }
  }
  return worst;
}

struct SubsetCode {
  std::vector<Eigen::Index> support;  // atoms with positive weight
  Vector theta;                       // dense over all M atoms
  double objective = 0.0;             // ||phi_q - D theta||^2
};

// Atom similarities and atom Gram evaluated entry by entry from the kernel.
inline Vector atom_similarities(const Eigen::Ref<const Vector>& query, const Dictionary& dict) {
  const Matrix& a = dict.coefficients();
  Vector s = Vector::Zero(a.cols());
  for (Eigen::Index p = 0; p < a.rows(); ++p) {
    const double k = kernel_eval(query, dict.support().col(p), dict.kernel());
    for (Eigen::Index m = 0; m < a.cols(); ++m) s[m] += a(p, m) * k;
  }
  return s;
}

inline Matrix atom_gram(const Dictionary& dict) {
  const Matrix& a = dict.coefficients();
  const Eigen::Index p = a.rows();
  Matrix k(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) k(i, j) = kernel_eval(dict.support().col(i), dict.support().col(j), dict.kernel());
  }
  Matrix g = Matrix::Zero(a.cols(), a.cols());
  for (Eigen::Index m = 0; m < a.cols(); ++m) {
    for (Eigen::Index n = 0; n < a.cols(); ++n) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) s += a(i, m) * k(i, j) * a(j, n);
      }
      g(m, n) = s;
    }
  }
  return g;
}

// Exhaustive search over every support of size <= k.
inline SubsetCode best_subset_code(const Eigen::Ref<const Vector>& query, const Dictionary& dict, int k,
                                   const OracleBudget& budget = {}) {
  const Eigen::Index atoms = dict.atoms();
  if (atoms > budget.max_support) {
    throw usage_error("best_subset_code: " + std::to_string(atoms) + " atoms exceed the oracle budget");
  }
  if (k < 1) throw usage_error("best_subset_code: k must be >= 1");
  const Vector s = atom_similarities(query, dict);
  const Matrix g = atom_gram(dict);
  const double self = kernel_eval(query, query, dict.kernel());

  SubsetCode best{{}, Vector::Zero(atoms), self};
  for (std::uint32_t mask = 1; mask < (1u << atoms); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < atoms; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    if (static_cast<int>(idx.size()) > k) continue;
    const auto m = static_cast<Eigen::Index>(idx.size());
    Matrix sub(m, m);
    Vector rhs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      rhs[a] = s[idx[a]];
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = g(idx[a], idx[b]);
    }
    const NnlsSolution sol = nnls_enumerate(sub, rhs, budget);
    const double obj = self + sol.objective;
    if (obj < best.objective) {
      best.objective = obj;
      best.theta.setZero();
      best.support.clear();
      for (Eigen::Index a = 0; a < m; ++a) {
        if (sol.theta[a] > 0.0) {
          best.theta[idx[a]] = sol.theta[a];
          best.support.push_back(idx[a]);
        }
      }
    }
  }
  best.objective = std::max(0.0, best.objective);
  return best;
}

// D minimizing ||X - D W||_F^2: solves D (W W^T) = X W^T row by row.
inline Matrix least_squares_dictionary(const Matrix& x, const Matrix& w) {
  const Matrix wwt = w * w.transpose();
  const Matrix xwt = x * w.transpose();
  Matrix d(x.rows(), w.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto row = gauss_solve(wwt, xwt.row(r).transpose());
    if (!row) throw numerical_error("least_squares_dictionary: W W^T is singular");
    d.row(r) = row->transpose();
  }
  return d;
}

struct LloydIteration {
  std::vector<Eigen::Index> assignments;  // after empty-cluster reseeding
  Matrix centroids;                       // d x M, after the mean update
  std::vector<Eigen::Index> reseeded;     // clusters refilled this iteration
  double objective = 0.0;                 // sum of squared distances to the new centroids
};

struct LloydRun {
  std::vector<Eigen::Index> initial;  // sample index of each starting centroid
  std::vector<LloydIteration> iterations;
};

// Textbook Lloyd iterations on Euclidean data. Initial centroids are drawn
// exactly like the trainer's uniform initialization; an empty cluster
// (lowest index first) takes the not-yet-reseeded sample farthest from its
// assigned centroid, and counts are redone after each reseed.
inline LloydRun lloyd_reference(const Matrix& data, Eigen::Index clusters, std::uint64_t seed, int max_iters,
                                const OracleBudget& budget = {}) {
  const Eigen::Index n = data.cols();
  if (n > budget.max_samples) throw usage_error("lloyd_reference: too many samples for the oracle budget");
  if (clusters < 1 || clusters > n) throw usage_error("lloyd_reference: bad cluster count");
  LloydRun run;
  Rng rng(seed);
  for (const std::size_t i : sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(clusters), rng)) {
    run.initial.push_back(static_cast<Eigen::Index>(i));
  }
  Matrix centroids(data.rows(), clusters);
  for (Eigen::Index m = 0; m < clusters; ++m) centroids.col(m) = data.col(run.initial[static_cast<std::size_t>(m)]);

  const auto dist2 = [&](Eigen::Index i, const Matrix& c, Eigen::Index m) {
    double s = 0.0;
    for (Eigen::Index f = 0; f < data.rows(); ++f) {
      const double diff = data(f, i) - c(f, m);
      s += diff * diff;
    }
    return s;
  };

  std::vector<Eigen::Index> previous;
  for (int iter = 1; iter <= max_iters; ++iter) {
    LloydIteration step;
    step.assignments.resize(static_cast<std::size_t>(n));
    std::vector<double> err(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index m = 0; m < clusters; ++m) {
        const double d = dist2(i, centroids, m);
        if (d < best_d) {
          best_d = d;
          best = m;
        }
      }
      step.assignments[static_cast<std::size_t>(i)] = best;
      err[static_cast<std::size_t>(i)] = best_d;
    }
    const bool stable = !previous.empty() && step.assignments == previous;

    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (;;) {
      std::vector<Eigen::Index> counts(static_cast<std::size_t>(clusters), 0);
      for (const Eigen::Index a : step.assignments) ++counts[static_cast<std::size_t>(a)];
      Eigen::Index empty = -1;
      for (Eigen::Index m = 0; m < clusters && empty < 0; ++m) {
        if (counts[static_cast<std::size_t>(m)] == 0) empty = m;
      }
      if (empty < 0) break;
      Eigen::Index worst = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!taken[static_cast<std::size_t>(i)] &&
            (worst < 0 || err[static_cast<std::size_t>(i)] > err[static_cast<std::size_t>(worst)])) {
          worst = i;
        }
      }
      if (worst < 0) throw numerical_error("lloyd_reference: no sample left to reseed");
      taken[static_cast<std::size_t>(worst)] = true;
      step.assignments[static_cast<std::size_t>(worst)] = empty;
      step.reseeded.push_back(empty);
    }

    step.centroids = Matrix::Zero(data.rows(), clusters);
    std::vector<double> counts(static_cast<std::size_t>(clusters), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = step.assignments[static_cast<std::size_t>(i)];
      step.centroids.col(a) += data.col(i);
      counts[static_cast<std::size_t>(a)] += 1.0;
    }
    for (Eigen::Index m = 0; m < clusters; ++m) step.centroids.col(m) /= counts[static_cast<std::size_t>(m)];
    for (Eigen::Index i = 0; i < n; ++i) {
      step.objective += dist2(i, step.centroids, step.assignments[static_cast<std::size_t>(i)]);
    }
    centroids = step.centroids;
    previous = step.assignments;
    const bool done = stable && step.reseeded.empty();
    run.iterations.push_back(std::move(step));
    if (done) break;
  }
  return run;
}

}  // namespace nnkm::oracle
