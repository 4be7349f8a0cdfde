#ifndef SSQP_MULTIPLIERS_HPP
#define SSQP_MULTIPLIERS_HPP

// Lagrange-multiplier estimators built from an iterate/multiplier history:
// running average from index kbar, and the epsilon-window average over the
// trailing iterates within an epsilon-ball of the current one.
//
// Iteration indices are one-based throughout, matching the solver's k.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ssqp/linalg.hpp"

namespace ssqp {

template <typename Scalar>
using History = std::vector<Vector<Scalar>>;

/// (1 / (k - kbar + 1)) sum_{i = kbar}^{k} y_i
template <typename Scalar>
Vector<Scalar> running_average(const History<Scalar>& ys, long k, long kbar) {
  if (kbar < 1 || k < kbar) throw std::invalid_argument("running_average requires k >= kbar >= 1");
  if (k > static_cast<long>(ys.size())) throw std::invalid_argument("running_average: k beyond history");
  Vector<Scalar> sum = ys[static_cast<std::size_t>(kbar - 1)];
  for (long i = kbar + 1; i <= k; ++i) sum += ys[static_cast<std::size_t>(i - 1)];
  return sum / Scalar(k - kbar + 1);
}

template <typename Scalar>
struct WindowedAverage {
  Vector<Scalar> mean;
  long k_prime = 0;  // first index of the window
};

/// k' is the smallest index with ||x_j - x_k|| <= eps for every j in [k', k];
/// the estimate is the mean of y_{k'..k}. Backward scan from k, O(k - k').
template <typename Scalar>
WindowedAverage<Scalar> windowed_average(const History<Scalar>& xs, const History<Scalar>& ys,
                                         long k, Scalar eps) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("window radius must be positive");
  if (xs.size() != ys.size()) throw std::invalid_argument("histories are not aligned");
  if (k < 1 || k > static_cast<long>(xs.size())) throw std::invalid_argument("k out of range");
  const auto& xk = xs[static_cast<std::size_t>(k - 1)];
  WindowedAverage<Scalar> out;
  out.mean = ys[static_cast<std::size_t>(k - 1)];
  long j = k - 1;
  for (; j >= 1; --j) {
    if ((xs[static_cast<std::size_t>(j - 1)] - xk).norm() > eps) break;
    out.mean += ys[static_cast<std::size_t>(j - 1)];
  }
  out.k_prime = j + 1;
  out.mean /= Scalar(k - out.k_prime + 1);
  return out;
}

/// Incrementally maintained multiplier history with the running average and
/// a set of epsilon-window averages.
///
/// Windowed queries skip whole blocks of past iterates using the triangle
/// inequality on a per-block center and radius, so long converged tails cost
/// O(k / B + B) per query instead of O(k). Results agree with
/// windowed_average up to summation order.
template <typename Scalar>
class MultiplierTrace {
 public:
  static constexpr long block_size = 256;

  explicit MultiplierTrace(long kbar = 1) : kbar_(kbar) {
    if (kbar < 1) throw std::invalid_argument("averaging start index must be >= 1");
  }

  void push(const Vector<Scalar>& x, const Vector<Scalar>& y) {
    if (!xs_.empty() && (x.size() != xs_.front().size() || y.size() != ys_.front().size())) {
      throw std::invalid_argument("MultiplierTrace: dimension changed");
    }
    xs_.push_back(x);
    ys_.push_back(y);
    const long k = size();
    if (k >= kbar_) {
      if (k == kbar_) {
        running_sum_ = y;
      } else {
        running_sum_ += y;
      }
    }
    if (k % block_size == 0) close_block(k);
  }

  long size() const { return static_cast<long>(xs_.size()); }
  long kbar() const { return kbar_; }
  const History<Scalar>& iterates() const { return xs_; }
  const History<Scalar>& multipliers() const { return ys_; }

  /// Average of y_{kbar..k} at the latest k.
  Vector<Scalar> running_average() const {
    if (size() < kbar_) throw std::invalid_argument("history shorter than averaging start");
    return running_sum_ / Scalar(size() - kbar_ + 1);
  }

  /// Window average at the latest k.
  WindowedAverage<Scalar> windowed(Scalar eps) const {
    if (!(eps > Scalar(0))) throw std::invalid_argument("window radius must be positive");
    const long k = size();
    if (k < 1) throw std::invalid_argument("empty history");
    const auto& xk = xs_[static_cast<std::size_t>(k - 1)];
    WindowedAverage<Scalar> out;
    out.mean = ys_[static_cast<std::size_t>(k - 1)];
    const long closed = static_cast<long>(blocks_.size()) * block_size;  // indices 1..closed blocked
    long j = k - 1;
    // Open tail first, one index at a time.
    for (; j > closed; --j) {
      if ((xs_[static_cast<std::size_t>(j - 1)] - xk).norm() > eps) return finish(out, k, j + 1);
      out.mean += ys_[static_cast<std::size_t>(j - 1)];
    }
    for (long b = static_cast<long>(blocks_.size()) - 1; b >= 0; --b) {
      const Block& blk = blocks_[static_cast<std::size_t>(b)];
      const long first = b * block_size + 1;
      const long last = first + block_size - 1;
      if (last > j) {
        // Block overlaps indices already consumed (only when k sits inside it).
        for (; j >= first; --j) {
          if ((xs_[static_cast<std::size_t>(j - 1)] - xk).norm() > eps) return finish(out, k, j + 1);
          out.mean += ys_[static_cast<std::size_t>(j - 1)];
        }
        continue;
      }
      const Scalar dc = (blk.center - xk).norm();
      if (dc + blk.radius <= eps) {
        out.mean += blk.ysum;
        j = first - 1;
        continue;
      }
      if (dc - blk.radius > eps) return finish(out, k, last + 1);
      for (; j >= first; --j) {
        if ((xs_[static_cast<std::size_t>(j - 1)] - xk).norm() > eps) return finish(out, k, j + 1);
        out.mean += ys_[static_cast<std::size_t>(j - 1)];
      }
    }
    return finish(out, k, 1);
  }

 private:
  struct Block {
    Vector<Scalar> center;
    Scalar radius;
    Vector<Scalar> ysum;
  };

  static WindowedAverage<Scalar> finish(WindowedAverage<Scalar>& out, long k, long k_prime) {
    out.k_prime = k_prime;
    out.mean /= Scalar(k - k_prime + 1);
    return std::move(out);
  }

  void close_block(long k) {
    const long first = k - block_size + 1;
    Block blk;
    blk.center = xs_[static_cast<std::size_t>(first - 1)];
    blk.radius = Scalar(0);
    blk.ysum = Vector<Scalar>::Zero(ys_.front().size());
    // Summed from the back so block sums follow the scan order of windowed_average.
    for (long i = k; i >= first; --i) {
      using std::max;
      blk.radius = max(blk.radius, Scalar((xs_[static_cast<std::size_t>(i - 1)] - blk.center).norm()));
      blk.ysum += ys_[static_cast<std::size_t>(i - 1)];
    }
    // Slack absorbs rounding in the radius so the skip test stays conservative.
    blk.radius *= Scalar(1) + Scalar(64) * std::numeric_limits<Scalar>::epsilon();
    blocks_.push_back(std::move(blk));
  }

  long kbar_;
  History<Scalar> xs_;
  History<Scalar> ys_;
  Vector<Scalar> running_sum_;
  std::vector<Block> blocks_;
};

/// kappa_H L_c / r^2 + L_grad_f / r + kappa_grad_f L_M
template <typename Scalar>
Scalar kappa_y(Scalar kappa_h, Scalar lipschitz_c, Scalar r, Scalar lipschitz_grad,
               Scalar kappa_grad_f, Scalar lipschitz_m) {
  if (!(kappa_h > 0) || !(lipschitz_c > 0) || !(r > 0) || !(lipschitz_grad > 0) ||
      !(kappa_grad_f > 0) || !(lipschitz_m > 0)) {
    throw std::invalid_argument("kappa_y: all constants must be positive");
  }
  return kappa_h * lipschitz_c / (r * r) + lipschitz_grad / r + kappa_grad_f * lipschitz_m;
}

template <typename Scalar>
struct MultiplierBoundReport {
  std::vector<Scalar> ratios;  // ||y_k^true - y*|| / max(||x_k - x*||, 1e-14), one per k
  Scalar tail_max = Scalar(0);
  std::vector<long> exceeding;  // indices k >= tail_start with ratio > kappa_y
  long zero_distance_mismatches = 0;  // x_k == x* but y_k^true != y*
};

/// Per-iterate check of ||y_k^true - y*|| <= kappa_y ||x_k - x*||.
template <typename Scalar>
MultiplierBoundReport<Scalar> check_true_multiplier_bound(const History<Scalar>& xs,
                                                          const History<Scalar>& y_true,
                                                          const Vector<Scalar>& x_star,
                                                          const Vector<Scalar>& y_star,
                                                          Scalar kappa, long tail_start) {
  if (xs.size() != y_true.size()) throw std::invalid_argument("histories are not aligned");
  MultiplierBoundReport<Scalar> rep;
  rep.ratios.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long k = static_cast<long>(i) + 1;
    const Scalar dx = (xs[i] - x_star).norm();
    const Scalar dy = (y_true[i] - y_star).norm();
    Scalar ratio = Scalar(0);
    if (dx == Scalar(0)) {
      if (dy > Scalar(1e-12) * (Scalar(1) + y_star.norm())) ++rep.zero_distance_mismatches;
    } else {
      using std::max;
      ratio = dy / max(dx, Scalar(1e-14));
    }
    rep.ratios.push_back(ratio);
    if (k >= tail_start) {
      rep.tail_max = std::max(rep.tail_max, ratio);
      if (ratio > kappa) rep.exceeding.push_back(k);
    }
  }
  return rep;
}

}  // namespace ssqp

#endif  // SSQP_MULTIPLIERS_HPP
