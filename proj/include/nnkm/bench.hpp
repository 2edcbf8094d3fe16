#pragma once

// Accuracy / timing sweeps over the number of atoms, NNK-Means against the
// 1-sparse (kernel kMeans) trainer on the same splits.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nnkm/classifier.hpp"
#include "nnkm/coder.hpp"
#include "nnkm/error.hpp"
#include "nnkm/kernel.hpp"
#include "nnkm/trainer.hpp"

namespace nnkm {

struct BenchConfig {
  std::vector<int> atoms_grid{10};
  int sparsity_k = 30;
  int max_iters = 10;
  int repeats = 10;
  std::uint64_t seed = 0;  // repeat r trains with seed + r
  int threads = 1;
  bool baseline = true;    // also run the k = 1 trainer
  FitConfig base;          // remaining trainer knobs

  void validate() const {
    if (atoms_grid.empty()) throw usage_error("atoms grid is empty");
    for (const int m : atoms_grid) {
      if (m < 1) throw usage_error("atoms grid entries must be >= 1");
    }
    if (repeats < 1) throw usage_error("repeats must be >= 1");
    if (sparsity_k < 1) throw usage_error("sparsity must be >= 1");
    if (max_iters < 1) throw usage_error("iters must be >= 1");
  }
};

struct BenchRow {
  std::string method;  // "nnk" or "kmeans"
  int atoms = 0;
  int repeat = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double train_s = 0.0;
  double test_s = 0.0;
  double coding_s = 0.0;  // summed over classes and iterations
  double update_s = 0.0;
};

struct BenchSummary {
  std::string method;
  int atoms = 0;
  int runs = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double train_s_mean = 0.0;
  double train_s_std = 0.0;
  double test_s_mean = 0.0;
  double test_s_std = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (const double x : v) var += (x - mean) * (x - mean);
  var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

}  // namespace detail

inline BenchRow bench_once(const FeatureMatrix& train, const FeatureMatrix& test, const KernelSpec& kernel,
                           const FitConfig& config, const std::string& method) {
  if (!test.labels) throw data_error("bench needs labels on the test split");
  using Clock = std::chrono::steady_clock;
  BenchRow row;
  row.method = method;
  row.atoms = config.atoms_M;
  row.seed = config.seed;
  std::vector<FitReport> reports;
  const auto t0 = Clock::now();
  const ClassifierModel model = fit_per_class(train, kernel, config, &reports);
  const auto t1 = Clock::now();
  const Classification result = classify(test, model, config.coding(), config.threads);
  const auto t2 = Clock::now();
  row.accuracy = accuracy(result.labels, *test.labels);
  row.train_s = std::chrono::duration<double>(t1 - t0).count();
  row.test_s = std::chrono::duration<double>(t2 - t1).count();
  for (const auto& r : reports) {
    for (const auto& t : r.wall_time_per_phase) {
      row.coding_s += t.coding_s;
      row.update_s += t.update_s;
    }
  }
  return row;
}

inline std::vector<BenchRow> run_bench(const FeatureMatrix& train, const FeatureMatrix& test,
                                       const KernelSpec& kernel, const BenchConfig& config) {
  config.validate();
  std::vector<BenchRow> rows;
  for (const int atoms : config.atoms_grid) {
    for (int r = 0; r < config.repeats; ++r) {
      FitConfig fc = config.base;
      fc.atoms_M = atoms;
      fc.max_iters = config.max_iters;
      fc.seed = config.seed + static_cast<std::uint64_t>(r);
      fc.threads = config.threads;
      fc.sparsity_k = config.sparsity_k;
      BenchRow nnk = bench_once(train, test, kernel, fc, "nnk");
      nnk.repeat = r;
      rows.push_back(nnk);
      if (config.baseline) {
        fc.sparsity_k = 1;
        BenchRow km = bench_once(train, test, kernel, fc, "kmeans");
        km.repeat = r;
        rows.push_back(km);
      }
    }
  }
  return rows;
}

inline std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows) {
  std::vector<BenchSummary> out;
  for (const auto& row : rows) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const BenchSummary& s) {
      return s.method == row.method && s.atoms == row.atoms;
    });
    if (seen) continue;
    std::vector<double> acc, train_s, test_s;
    for (const auto& r : rows) {
      if (r.method != row.method || r.atoms != row.atoms) continue;
      acc.push_back(r.accuracy);
      train_s.push_back(r.train_s);
      test_s.push_back(r.test_s);
    }
    BenchSummary s;
    s.method = row.method;
    s.atoms = row.atoms;
    s.runs = static_cast<int>(acc.size());
    std::tie(s.accuracy_mean, s.accuracy_std) = detail::mean_std(acc);
    std::tie(s.train_s_mean, s.train_s_std) = detail::mean_std(train_s);
    std::tie(s.test_s_mean, s.test_s_std) = detail::mean_std(test_s);
    out.push_back(s);
  }
  return out;
}

// Repeats where NNK-Means matched or beat the baseline, per atom count.
inline int nnk_wins(const std::vector<BenchRow>& rows, int atoms) {
  int wins = 0;
  for (const auto& a : rows) {
    if (a.method != "nnk" || a.atoms != atoms) continue;
    for (const auto& b : rows) {
      if (b.method == "kmeans" && b.atoms == atoms && b.repeat == a.repeat && a.accuracy >= b.accuracy) ++wins;
    }
  }
  return wins;
}

// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw usage_error("loglog_slope needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

struct ScalingPoint {
  Eigen::Index samples = 0;
  double seconds = 0.0;  // best of the timed runs
};

// Coding wall time against a fixed dictionary on the first n columns of
// `queries` for each n in `sizes`.
inline std::vector<ScalingPoint> coding_scaling(const Matrix& queries, const Dictionary& dict,
                                                const CodingConfig& config, const std::vector<Eigen::Index>& sizes,
                                                int runs = 3, int threads = 1) {
  using Clock = std::chrono::steady_clock;
  std::vector<ScalingPoint> out;
  for (const Eigen::Index n : sizes) {
    if (n < 1 || n > queries.cols()) throw usage_error("coding_scaling: size out of range");
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < runs; ++r) {
      const auto t0 = Clock::now();
      const CodeBatch batch = code_batch(queries.leftCols(n), dict, config, threads);
      const auto t1 = Clock::now();
      batch.throw_if_failed();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    out.push_back({n, best});
  }
  return out;
}

}  // namespace nnkm
