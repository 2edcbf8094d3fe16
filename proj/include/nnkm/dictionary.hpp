#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nnkm/error.hpp"
#include "nnkm/kernel.hpp"

namespace nnkm {

namespace detail {

// A^T (K A), symmetrized exactly.
inline Matrix atom_gram(const Eigen::Ref<const Matrix>& coefficients,
                        const Eigen::Ref<const Matrix>& gram_times_coefficients) {
  Matrix g = coefficients.transpose() * gram_times_coefficients;
  return 0.5 * (g + g.transpose());
}

}  // namespace detail

struct DictionaryMeta {
  int sparsity_k = 0;
  int iterations_run = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const DictionaryMeta&, const DictionaryMeta&) = default;
};

// A dictionary D = Phi(support) * A in the RKHS of `kernel`. Atoms are never
// materialized; the M x M atom Gram A^T K A is computed once at construction
// and everything else is evaluated through kernel rows against the support.
class Dictionary {
 public:
  Dictionary() = default;

  Dictionary(Matrix support, Matrix coefficients, KernelSpec kernel, DictionaryMeta meta = {})
      : support_(std::move(support)),
        coefficients_(std::move(coefficients)),
        kernel_(kernel),
        meta_(meta) {
    kernel_.validate();
    if (support_.cols() != coefficients_.rows()) {
      throw data_error("dictionary support has " + std::to_string(support_.cols()) +
                       " samples but coefficient matrix has " +
                       std::to_string(coefficients_.rows()) + " rows");
    }
    if (coefficients_.cols() < 1) throw data_error("dictionary must have at least one atom");
    if (!support_.allFinite() || !coefficients_.allFinite()) {
      throw data_error("dictionary contains non-finite values");
    }
    const GramView support_gram = GramView::automatic(support_, kernel_);
    atom_gram_ = detail::atom_gram(coefficients_, support_gram.times(coefficients_));
  }

  // Drops the all-zero rows of `coefficients` (and the matching support
  // columns), keeping the remaining samples in their original order.
  static Dictionary trimmed(const Eigen::Ref<const Matrix>& samples,
                            const Eigen::Ref<const Matrix>& coefficients, KernelSpec kernel,
                            DictionaryMeta meta = {}) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < coefficients.rows(); ++i) {
      if ((coefficients.row(i).array() != 0.0).any()) rows.push_back(i);
    }
    Matrix support(samples.rows(), static_cast<Eigen::Index>(rows.size()));
    Matrix a(static_cast<Eigen::Index>(rows.size()), coefficients.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      support.col(static_cast<Eigen::Index>(r)) = samples.col(rows[r]);
      a.row(static_cast<Eigen::Index>(r)) = coefficients.row(rows[r]);
    }
    return Dictionary(std::move(support), std::move(a), kernel, meta);
  }

  const Matrix& support() const { return support_; }
  const Matrix& coefficients() const { return coefficients_; }
  const Matrix& atom_gram() const { return atom_gram_; }
  const KernelSpec& kernel() const { return kernel_; }
  const DictionaryMeta& meta() const { return meta_; }

  Eigen::Index atoms() const { return coefficients_.cols(); }
  Eigen::Index support_size() const { return support_.cols(); }
  Eigen::Index dims() const { return support_.rows(); }

  // (k_q^T A): similarity of phi(query) to every atom.
  Vector query_similarities(const Eigen::Ref<const Vector>& query) const {
    detail::check_same_dims(query.size(), dims());
    const Vector k_q = kernel_row(query, support_, kernel_);
    return coefficients_.transpose() * k_q;
  }

 private:
  Matrix support_;
  Matrix coefficients_;
  KernelSpec kernel_;
  DictionaryMeta meta_;
  Matrix atom_gram_;
};

// Input-space surrogate of the atoms: support * A (d x M). Exact atoms for the
// linear kernel.
inline Matrix export_atoms(const Dictionary& dict) { return dict.support() * dict.coefficients(); }

}  // namespace nnkm
