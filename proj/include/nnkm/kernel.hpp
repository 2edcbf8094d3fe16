#pragma once

// Kernel functions and Gram access.
//
// Everything downstream touches the data only through kernel values: atoms
// live in the RKHS as Phi * A, so inner products between samples, atoms and
// queries all reduce to entries of the Gram matrix K = Phi^T Phi.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>

#include "nnkm/error.hpp"

namespace nnkm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class KernelKind { gaussian, cosine, linear };

struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double sigma = 1.0;  // gaussian bandwidth only

  static KernelSpec gaussian(double sigma = 1.0) { return {KernelKind::gaussian, sigma}; }
  static KernelSpec cosine() { return {KernelKind::cosine, 1.0}; }
  static KernelSpec linear() { return {KernelKind::linear, 1.0}; }

  void validate() const {
    if (kind == KernelKind::gaussian && !(sigma > 0.0 && std::isfinite(sigma))) {
      throw usage_error("gaussian kernel requires a finite sigma > 0");
    }
  }

  // Grammar: `gaussian:sigma=<float>` | `gaussian` | `cosine` | `linear`.
  static KernelSpec parse(std::string_view text);

  // Inverse of parse(); sigma is printed in shortest round-trip form.
  std::string to_string() const;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline std::string_view kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::cosine: return "cosine";
    case KernelKind::linear: return "linear";
  }
  return "unknown";
}

inline KernelSpec KernelSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view params =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (name == "linear" || name == "cosine") {
    if (!params.empty()) throw usage_error("kernel '" + std::string(name) + "' takes no parameters");
    return name == "linear" ? linear() : cosine();
  }
  if (name != "gaussian") throw usage_error("unknown kernel '" + std::string(text) + "'");
  KernelSpec spec = gaussian();
  if (!params.empty()) {
    constexpr std::string_view key = "sigma=";
    if (params.substr(0, key.size()) != key) {
      throw usage_error("gaussian kernel expects 'sigma=<float>', got '" + std::string(params) + "'");
    }
    const std::string_view value = params.substr(key.size());
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), spec.sigma);
    if (ec != std::errc{} || end != value.data() + value.size()) {
      throw usage_error("invalid gaussian sigma '" + std::string(value) + "'");
    }
  }
  spec.validate();
  return spec;
}

inline std::string KernelSpec::to_string() const {
  std::string out(kernel_kind_name(kind));
  if (kind == KernelKind::gaussian) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, sigma);
    out += ":sigma=";
    out.append(buf, end);
  }
  return out;
}

// Dataset X (d x N), one sample per column.
struct FeatureMatrix {
  Matrix data;
  std::optional<std::vector<int>> labels;
  bool standardized = false;

  Eigen::Index dims() const { return data.rows(); }
  Eigen::Index samples() const { return data.cols(); }
  bool labeled() const { return labels.has_value(); }

  void validate() const {
    if (data.rows() < 1 || data.cols() < 1) throw data_error("feature matrix must be non-empty");
    if (!data.allFinite()) throw data_error("feature matrix contains NaN or infinite values");
    if (labels && static_cast<Eigen::Index>(labels->size()) != data.cols()) {
      throw data_error("label count does not match sample count");
    }
    if (labels) {
      for (const int label : *labels) {
        if (label < 0) throw data_error("labels must be non-negative integers");
      }
    }
  }

  // Columns `indices` as a new matrix (labels follow when present).
  FeatureMatrix subset(const std::vector<Eigen::Index>& indices) const {
    FeatureMatrix out;
    out.data.resize(data.rows(), static_cast<Eigen::Index>(indices.size()));
    if (labels) out.labels.emplace();
    for (std::size_t j = 0; j < indices.size(); ++j) {
      out.data.col(static_cast<Eigen::Index>(j)) = data.col(indices[j]);
      if (labels) out.labels->push_back((*labels)[static_cast<std::size_t>(indices[j])]);
    }
    out.standardized = standardized;
    return out;
  }
};

namespace detail {

inline void check_same_dims(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw usage_error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Plain left-to-right loops: the summation order must not depend on how the
// operands happen to be aligned, so kappa(x, y) == kappa(y, x) bitwise.
inline double squared_distance(const double* x, const double* y, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diff = x[i] - y[i];
    acc += diff * diff;
  }
  return acc;
}

inline double dot(const double* x, const double* y, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

inline double checked_norm(const double* x, Eigen::Index n) {
  const double norm = std::sqrt(dot(x, x, n));
  if (norm == 0.0) throw data_error("cosine kernel is undefined for a zero vector");
  return norm;
}

inline double evaluate(const double* x, const double* y, Eigen::Index n, const KernelSpec& spec) {
  switch (spec.kind) {
    case KernelKind::gaussian:
      return std::exp(-squared_distance(x, y, n) / (2.0 * spec.sigma * spec.sigma));
    case KernelKind::cosine:
      return dot(x, y, n) / (checked_norm(x, n) * checked_norm(y, n));
    case KernelKind::linear:
      return dot(x, y, n);
  }
  return 0.0;
}

}  // namespace detail

inline double kernel_eval(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                          const KernelSpec& spec) {
  detail::check_same_dims(x.size(), y.size());
  spec.validate();
  return detail::evaluate(x.data(), y.data(), x.size(), spec);
}

// kappa(x, support_p) for every column p of `support`; entry p is bitwise
// equal to kernel_eval(x, support.col(p)).
inline Vector kernel_row(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Matrix>& support,
                         const KernelSpec& spec) {
  detail::check_same_dims(x.size(), support.rows());
  spec.validate();
  const Eigen::Index dims = x.size();
  Vector out(support.cols());
  for (Eigen::Index p = 0; p < support.cols(); ++p) {
    out[p] = detail::evaluate(x.data(), support.data() + p * support.outerStride(), dims, spec);
  }
  return out;
}

// Q x P matrix of kappa(query_q, support_p).
inline Matrix cross_similarity(const Eigen::Ref<const Matrix>& queries,
                               const Eigen::Ref<const Matrix>& support, const KernelSpec& spec) {
  detail::check_same_dims(queries.rows(), support.rows());
  if (spec.kind == KernelKind::linear) return queries.transpose() * support;
  Matrix out(queries.cols(), support.cols());
  for (Eigen::Index q = 0; q < queries.cols(); ++q) {
    out.row(q) = kernel_row(queries.col(q), support, spec).transpose();
  }
  return out;
}

inline constexpr Eigen::Index kDefaultGramCap = 20000;

// Read access to K for a fixed dataset. Either a materialized symmetric cache
// or rows evaluated on demand, for datasets above the memory cap.
class GramView {
 public:
  // Materializes the full cache. Fails when N exceeds `cap`.
  static GramView cached(const Matrix& data, const KernelSpec& spec,
                         Eigen::Index cap = kDefaultGramCap) {
    spec.validate();
    const Eigen::Index n = data.cols();
    if (n > cap) {
      throw usage_error("Gram matrix of " + std::to_string(n) + " samples exceeds the cache cap of " +
                        std::to_string(cap) + "; use on-the-fly mode (GramView::on_the_fly)");
    }
    GramView view(data, spec);
    Matrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double value = kernel_eval(data.col(i), data.col(j), spec);
        k(i, j) = value;
        k(j, i) = value;
      }
    }
    view.cache_ = std::move(k);
    return view;
  }

  static GramView on_the_fly(const Matrix& data, const KernelSpec& spec) {
    spec.validate();
    return GramView(data, spec);
  }

  // Cached when N <= cap, otherwise on the fly.
  static GramView automatic(const Matrix& data, const KernelSpec& spec,
                            Eigen::Index cap = kDefaultGramCap) {
    return data.cols() <= cap ? cached(data, spec, cap) : on_the_fly(data, spec);
  }

  Eigen::Index size() const { return data_->cols(); }
  bool is_cached() const { return cache_.has_value(); }
  const KernelSpec& kernel() const { return spec_; }
  const Matrix& source() const { return *data_; }
  const Matrix& matrix() const {
    if (!cache_) throw usage_error("Gram matrix is not materialized");
    return *cache_;
  }

  double operator()(Eigen::Index i, Eigen::Index j) const {
    if (cache_) return (*cache_)(i, j);
    return kernel_eval(data_->col(i), data_->col(j), spec_);
  }

  Vector row(Eigen::Index i) const {
    if (cache_) return cache_->row(i).transpose();
    return kernel_row(data_->col(i), *data_, spec_);
  }

  Vector diagonal() const {
    if (cache_) return cache_->diagonal();
    Vector d(size());
    for (Eigen::Index i = 0; i < size(); ++i) d[i] = kernel_eval(data_->col(i), data_->col(i), spec_);
    return d;
  }

  // K * rhs.
  Matrix times(const Eigen::Ref<const Matrix>& rhs) const {
    detail::check_same_dims(rhs.rows(), size());
    if (cache_) return *cache_ * rhs;
    Matrix out(size(), rhs.cols());
    for (Eigen::Index i = 0; i < size(); ++i) out.row(i) = row(i).transpose() * rhs;
    return out;
  }

 private:
  GramView(const Matrix& data, const KernelSpec& spec) : data_(&data), spec_(spec) {}

  const Matrix* data_;
  KernelSpec spec_;
  std::optional<Matrix> cache_;
};

inline GramView gram(const FeatureMatrix& data, const KernelSpec& spec,
                     Eigen::Index cap = kDefaultGramCap) {
  return GramView::cached(data.data, spec, cap);
}

}  // namespace nnkm
