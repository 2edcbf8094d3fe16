#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace nnkm {

// Broad failure class. The CLI maps these onto exit codes 2, 3 and 4.
enum class ErrorKind { usage, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }
inline Error numerical_error(const std::string& what) { return {ErrorKind::numerical, what}; }

// Raised when the active-set solver hits its iteration cap. Carries the best
// feasible iterate seen so callers can inspect how far it got.
class NnlsError : public Error {
 public:
  NnlsError(const std::string& what, Eigen::VectorXd best)
      : Error(ErrorKind::numerical, what), best_(std::move(best)) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }

 private:
  Eigen::VectorXd best_;
};

// A failure tied to one sample of a batch.
class SampleError : public Error {
 public:
  SampleError(ErrorKind kind, std::size_t index, const std::string& what)
      : Error(kind, "sample " + std::to_string(index) + ": " + what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace nnkm
