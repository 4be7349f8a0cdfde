#ifndef SSQP_LINALG_HPP
#define SSQP_LINALG_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ssqp {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Vector<double>;
using Mat = Matrix<double>;

template <typename Scalar>
using ConstVecRef = Eigen::Ref<const Vector<Scalar>>;

template <typename Scalar>
using ConstMatRef = Eigen::Ref<const Matrix<Scalar>>;

// Error hierarchy. Everything thrown by the library derives from Error,
// except precondition violations on plain arguments (std::invalid_argument).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Jacobian (or constraint matrix) failed the full-row-rank test.
class RankError : public Error {
 public:
  using Error::Error;
};

// Reduced Hessian Z^T H Z is not positive definite.
class CurvatureError : public Error {
 public:
  using Error::Error;
};

// An evaluator returned a non-finite value or a wrongly sized result.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Inputs that should be consistent (e.g. J d = -c) are not.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// An error raised inside the iteration loop, tagged with the iterate index.
class IterationError : public Error {
 public:
  IterationError(long k, const std::string& what)
      : Error("iteration " + std::to_string(k) + ": " + what), iteration_(k) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

/// Value on the extended half-line [0, +inf]. Trial quantities use an
/// explicit infinity rather than a floating-point overflow.
template <typename Scalar>
class Extended {
 public:
  explicit Extended(Scalar v) : value_(v), infinite_(false) {}
  static Extended infinity() {
    Extended e(Scalar(0));
    e.infinite_ = true;
    return e;
  }

  bool is_infinite() const { return infinite_; }
  /// Finite value; +inf (IEEE) when infinite, for printing only.
  Scalar value() const {
    return infinite_ ? std::numeric_limits<Scalar>::infinity() : value_;
  }

  /// a <= e, with every finite a below infinity.
  friend bool operator<=(Scalar a, const Extended& e) {
    return e.infinite_ || a <= e.value_;
  }
  friend bool operator>(Scalar a, const Extended& e) { return !(a <= e); }

 private:
  Scalar value_;
  bool infinite_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace ssqp

#endif  // SSQP_LINALG_HPP
