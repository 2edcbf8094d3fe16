#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "nnkm/nnkm.hpp"

namespace nnkm::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline FeatureMatrix random_features(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix f;
  f.data = random_matrix(d, n, rng);
  return f;
}

// B^T B for a random B with `rank` rows; exactly symmetric.
inline Matrix random_psd(Eigen::Index n, Eigen::Index rank, Rng& rng) {
  const Matrix b = random_matrix(rank, n, rng);
  Matrix k = b.transpose() * b;
  return 0.5 * (k + k.transpose());
}

// A support quadratic as it arises in coding: K = B^T B and k = B^T q, so k
// always lies in the range of K and the problem is bounded below.
struct SupportProblem {
  Matrix kss;
  Vector ks;
};

inline SupportProblem random_support_problem(Eigen::Index n, Eigen::Index rank, Rng& rng) {
  const Matrix b = random_matrix(rank, n, rng);
  const Matrix q = random_matrix(rank, 1, rng);
  Matrix k = b.transpose() * b;
  return {0.5 * (k + k.transpose()), b.transpose() * q.col(0)};
}

inline Vector random_vector(Eigen::Index n, Rng& rng) { return random_matrix(n, 1, rng).col(0); }

// Scratch directory removed when the fixture goes away.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("nnkm_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace nnkm::testing
