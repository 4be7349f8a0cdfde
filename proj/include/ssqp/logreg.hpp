#ifndef SSQP_LOGREG_HPP
#define SSQP_LOGREG_HPP

// Constrained logistic regression
//
//   min (1/N) sum_i log(1 + exp(-gamma_i d_i^T x))  s.t.  A x = b,  ||x||^2 = 1
//
// built from LIBSVM-format data with standard-normal (A, b, x_1).

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include <Eigen/SparseCore>

#include "ssqp/problem.hpp"

namespace ssqp {

using SparseMat = Eigen::SparseMatrix<double>;

struct Dataset {
  SparseMat features;  // n x N, column i is sample d_i
  Vec labels;          // N entries in {-1, +1}

  Index dim() const { return features.rows(); }
  Index size() const { return features.cols(); }
};

/// Parse "label idx:val idx:val ..." lines with 1-based strictly increasing
/// indices. Labels map to their sign; 0 maps to -1. Blank lines and lines
/// starting with '#' are skipped. `dim` overrides n (must cover every index).
Dataset parse_libsvm(std::istream& in, std::optional<Index> dim = std::nullopt);
Dataset load_libsvm(const std::string& path, std::optional<Index> dim = std::nullopt);

/// Inverse of parse_libsvm, one line per sample, 17 significant digits.
std::string write_libsvm(const Dataset& ds);

/// log(1 + exp(-t)) without overflow.
double log1p_exp_neg(double t);
/// 1 / (1 + exp(t)) without overflow.
double sigmoid_neg(double t);

enum class BatchSampling { with_replacement, without_replacement };

class ConstrainedLogRegInstance {
 public:
  /// A must have full row rank (sigma_min >= 1e-8 sigma_max) and the
  /// Jacobian at x_1 must pass the KKT rank test.
  ConstrainedLogRegInstance(Dataset ds, Mat a, Vec b, Vec x1);

  Index n() const { return data_->ds.dim(); }
  Index m() const { return data_->a.rows() + 1; }
  Index m_lin() const { return data_->a.rows(); }
  Index samples() const { return data_->ds.size(); }
  const Dataset& dataset() const { return data_->ds; }
  const Mat& a() const { return data_->a; }
  const Vec& b() const { return data_->b; }
  const Vec& initial_point() const { return data_->x1; }

  double objective(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  /// (A x - b; ||x||^2 - 1)
  Vec constraints(const Vec& x) const;
  /// (A; 2 x^T)
  Mat jacobian(const Vec& x) const;

  /// Average of per-sample gradients over zero-based sample indices.
  Vec minibatch_gradient(const Vec& x, std::span<const Index> indices) const;

  /// lambda_max(D D^T) / (4N), a global Lipschitz constant of grad f.
  double gradient_lipschitz_bound() const;
  /// Lipschitz constant of grad c: the sphere row contributes 2x, so 2.
  double jacobian_lipschitz() const { return 2.0; }

  /// ||A^+ b||, the distance from 0 to {A x = b}. The feasible set
  /// {A x = b, ||x|| = 1} is empty when this exceeds 1.
  double affine_min_norm() const;
  bool feasible() const { return affine_min_norm() <= 1.0; }

  Problem problem() const;
  StochasticGradientOracle oracle(
      BatchSampling mode = BatchSampling::with_replacement) const;

 private:
  struct Data {
    Dataset ds;
    Mat a;
    Vec b;
    Vec x1;
  };
  std::shared_ptr<const Data> data_;
};

/// Draw A (m_lin x n), b, x_1 with standard-normal entries from `seed`, in
/// that order, redrawing until the rank checks pass (at most 10 retries).
ConstrainedLogRegInstance build_instance(const Dataset& ds, Index m_lin, std::uint64_t seed);

/// Per-sample average with one-based indices, each in [1, N].
Vec logistic_minibatch_gradient(const ConstrainedLogRegInstance& inst, const Vec& x,
                                std::span<const Index> one_based_indices);

}  // namespace ssqp

#endif  // SSQP_LOGREG_HPP
