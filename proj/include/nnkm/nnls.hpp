#pragma once

// Non-negative quadratic solve on a candidate support:
//
//   min_theta  theta^T K theta - 2 k^T theta   subject to theta >= 0
//
// with K the atom Gram restricted to the support and k the atom-query
// similarities. Lawson-Hanson active set: indices enter the passive set one at
// a time by largest positive dual, and leave when the interpolation step hits
// the boundary. Each passive subproblem is an SPD solve by Cholesky.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "nnkm/error.hpp"

namespace nnkm {

struct NnlsOptions {
  int max_iter = 500;
  // Dual threshold for admitting an index, relative to max(1, ||k||_inf).
  double entry_tol = 1e-11;
};

namespace detail {

inline double nnls_scale(const Eigen::VectorXd& k) {
  return std::max(1.0, k.size() > 0 ? k.cwiseAbs().maxCoeff() : 0.0);
}

// Solves K[P,P] z = k[P]; adds diagonal jitter 1e-10 * trace / |P| once when
// the factorization fails.
inline Eigen::VectorXd solve_passive(const Eigen::MatrixXd& kss, const Eigen::VectorXd& ks,
                                     const std::vector<Eigen::Index>& passive) {
  const auto n = static_cast<Eigen::Index>(passive.size());
  Eigen::MatrixXd sub(n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    rhs[a] = ks[passive[a]];
    for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = kss(passive[a], passive[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * std::max(sub.trace(), 0.0) / static_cast<double>(n);
    sub.diagonal().array() += jitter > 0.0 ? jitter : 1e-10;
    llt.compute(sub);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("support Gram is not positive definite even after jitter");
    }
  }
  return llt.solve(rhs);
}

}  // namespace detail

inline double nnls_objective(const Eigen::MatrixXd& kss, const Eigen::VectorXd& ks,
                             const Eigen::VectorXd& theta) {
  return theta.dot(kss * theta) - 2.0 * ks.dot(theta);
}

inline Eigen::VectorXd nnls_on_support(const Eigen::MatrixXd& kss, const Eigen::VectorXd& ks,
                                       const NnlsOptions& options = {}) {
  const Eigen::Index n = ks.size();
  if (kss.rows() != n || kss.cols() != n) {
    throw usage_error("nnls_on_support: Gram is " + std::to_string(kss.rows()) + "x" +
                      std::to_string(kss.cols()) + " but similarity vector has " +
                      std::to_string(n) + " entries");
  }
  if (options.max_iter < 1) throw usage_error("nnls_on_support: max_iter must be >= 1");
  const double magnitude = std::max(1.0, n > 0 ? kss.cwiseAbs().maxCoeff() : 0.0);
  if (n > 0 && (kss - kss.transpose()).cwiseAbs().maxCoeff() > 1e-12 * magnitude) {
    throw usage_error("nnls_on_support: support Gram is not symmetric");
  }

  const double tol = options.entry_tol * detail::nnls_scale(ks);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  std::vector<bool> in_passive(static_cast<std::size_t>(n), false);
  // Indices whose admission produced no progress; kept out until theta moves.
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  std::vector<Eigen::Index> passive;
  Eigen::VectorXd dual = ks;
  int iterations = 0;

  const auto bump = [&] {
    if (++iterations > options.max_iter) {
      throw NnlsError("active-set solver exceeded " + std::to_string(options.max_iter) +
                          " iterations (ill-conditioned support?)",
                      theta);
    }
  };

  for (;;) {
    Eigen::Index entering = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!in_passive[j] && !blocked[j] && dual[j] > best) {
        best = dual[j];
        entering = j;
      }
    }
    if (entering < 0) break;
    bump();

    passive.push_back(entering);
    std::sort(passive.begin(), passive.end());
    in_passive[entering] = true;

    bool progressed = false;
    for (;;) {
      const Eigen::VectorXd z = detail::solve_passive(kss, ks, passive);
      Eigen::Index p = 0;
      for (; p < static_cast<Eigen::Index>(passive.size()); ++p) {
        if (z[p] <= 0.0) break;
      }
      if (p == static_cast<Eigen::Index>(passive.size())) {
        for (std::size_t a = 0; a < passive.size(); ++a) theta[passive[a]] = z[static_cast<Eigen::Index>(a)];
        progressed = true;
        break;
      }
      bump();
      // Step from theta toward z until the first passive coordinate hits zero.
      double alpha = 1.0;
      Eigen::Index blocking = -1;
      for (std::size_t a = 0; a < passive.size(); ++a) {
        const double za = z[static_cast<Eigen::Index>(a)];
        if (za <= 0.0) {
          const double current = theta[passive[a]];
          const double ratio = current / (current - za);
          if (ratio < alpha) {
            alpha = ratio;
            blocking = passive[a];
          }
        }
      }
      for (std::size_t a = 0; a < passive.size(); ++a) {
        const Eigen::Index j = passive[a];
        theta[j] += alpha * (z[static_cast<Eigen::Index>(a)] - theta[j]);
      }
      if (blocking >= 0) theta[blocking] = 0.0;
      std::vector<Eigen::Index> kept;
      for (const Eigen::Index j : passive) {
        if (theta[j] > 0.0) {
          kept.push_back(j);
        } else {
          theta[j] = 0.0;
          in_passive[j] = false;
        }
      }
      passive = std::move(kept);
      if (alpha > 0.0) {
        progressed = true;
      } else if (!in_passive[entering]) {
        // The entering index bounced straight back out: its positive dual was
        // round-off. Keep it out until the iterate moves.
        blocked[entering] = true;
      }
      if (passive.empty()) break;
    }
    if (progressed) std::fill(blocked.begin(), blocked.end(), false);
    dual = ks - kss * theta;
  }
  return theta;
}

inline Eigen::VectorXd nnls_on_support(const Eigen::MatrixXd& kss, const Eigen::VectorXd& ks,
                                       int max_iter) {
  NnlsOptions options;
  options.max_iter = max_iter;
  return nnls_on_support(kss, ks, options);
}

}  // namespace nnkm
