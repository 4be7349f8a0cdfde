#include "ssqp/logreg.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ssqp/kkt.hpp"

namespace ssqp {

namespace {

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, long long& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<Index> dim) {
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> labels;
  std::string line;
  std::size_t lineno = 0;
  long long max_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok) || tok.front() == '#') continue;
    double label = 0.0;
    if (!parse_double(tok, label)) throw ParseError(lineno, "bad label '" + tok + "'");
    const Index col = static_cast<Index>(labels.size());
    labels.push_back(label > 0.0 ? 1.0 : -1.0);
    long long prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "expected idx:val, got '" + tok + "'");
      long long idx = 0;
      double val = 0.0;
      if (!parse_index(std::string_view(tok).substr(0, colon), idx)) {
        throw ParseError(lineno, "bad feature index in '" + tok + "'");
      }
      if (!parse_double(std::string_view(tok).substr(colon + 1), val)) {
        throw ParseError(lineno, "bad feature value in '" + tok + "'");
      }
      if (idx < 1) throw ParseError(lineno, "feature indices are 1-based, got " + std::to_string(idx));
      if (idx <= prev) throw ParseError(lineno, "feature indices must be strictly increasing");
      prev = idx;
      max_index = std::max(max_index, idx);
      triplets.emplace_back(static_cast<Index>(idx - 1), col, val);
    }
  }
  Index n = static_cast<Index>(max_index);
  if (dim) {
    if (*dim < n) {
      throw ParseError(lineno, "dimension override " + std::to_string(*dim) +
                                   " is smaller than the largest index " + std::to_string(n));
    }
    n = *dim;
  }
  Dataset ds;
  ds.features.resize(n, static_cast<Index>(labels.size()));
  ds.features.setFromTriplets(triplets.begin(), triplets.end());
  ds.features.makeCompressed();
  ds.labels = Eigen::Map<const Vec>(labels.data(), static_cast<Index>(labels.size()));
  return ds;
}

Dataset load_libsvm(const std::string& path, std::optional<Index> dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  return parse_libsvm(in, dim);
}

std::string write_libsvm(const Dataset& ds) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Index i = 0; i < ds.size(); ++i) {
    os << (ds.labels(i) > 0 ? "+1" : "-1");
    for (SparseMat::InnerIterator it(ds.features, i); it; ++it) {
      os << ' ' << (it.row() + 1) << ':' << it.value();
    }
    os << '\n';
  }
  return os.str();
}

double log1p_exp_neg(double t) {
  if (t > 0.0) return std::log1p(std::exp(-t));
  return -t + std::log1p(std::exp(t));
}

double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

ConstrainedLogRegInstance::ConstrainedLogRegInstance(Dataset ds, Mat a, Vec b, Vec x1) {
  if (ds.size() < 1) throw std::invalid_argument("dataset has no samples");
  const Index n = ds.dim();
  if (a.cols() != n || b.size() != a.rows() || x1.size() != n) {
    throw std::invalid_argument("instance data has inconsistent dimensions");
  }
  if (a.rows() + 1 > n) throw std::invalid_argument("need m_lin + 1 <= n");
  for (Index i = 0; i < ds.size(); ++i) {
    if (ds.labels(i) != 1.0 && ds.labels(i) != -1.0) {
      throw std::invalid_argument("labels must be +1 or -1");
    }
  }
  if (a.rows() > 0) {
    Eigen::JacobiSVD<Mat> svd(a);
    const auto& s = svd.singularValues();
    if (!(s(s.size() - 1) >= 1e-8 * s(0))) throw RankError("constraint matrix A is not of full row rank");
  }
  auto data = std::make_shared<Data>();
  data->ds = std::move(ds);
  data->a = std::move(a);
  data->b = std::move(b);
  data->x1 = std::move(x1);
  data_ = std::move(data);
  // Throws RankError when [A; 2 x_1^T] fails the solver's rank test.
  JacobianFactorization<double> probe(jacobian(data_->x1));
}

double ConstrainedLogRegInstance::objective(const Vec& x) const {
  const auto& ds = data_->ds;
  const Vec z = ds.features.transpose() * x;
  double acc = 0.0;
  for (Index i = 0; i < z.size(); ++i) acc += log1p_exp_neg(ds.labels(i) * z(i));
  return acc / static_cast<double>(z.size());
}

Vec ConstrainedLogRegInstance::gradient(const Vec& x) const {
  const auto& ds = data_->ds;
  Vec w = ds.features.transpose() * x;
  const double inv_n = 1.0 / static_cast<double>(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    const double gamma = ds.labels(i);
    w(i) = -gamma * sigmoid_neg(gamma * w(i)) * inv_n;
  }
  return ds.features * w;
}

Vec ConstrainedLogRegInstance::constraints(const Vec& x) const {
  Vec c(m());
  c.head(m_lin()) = data_->a * x - data_->b;
  c(m_lin()) = x.squaredNorm() - 1.0;
  return c;
}

Mat ConstrainedLogRegInstance::jacobian(const Vec& x) const {
  Mat j(m(), n());
  j.topRows(m_lin()) = data_->a;
  j.row(m_lin()) = 2.0 * x.transpose();
  return j;
}

Vec ConstrainedLogRegInstance::minibatch_gradient(const Vec& x,
                                                  std::span<const Index> indices) const {
  if (indices.empty()) throw std::invalid_argument("mini-batch is empty");
  const auto& ds = data_->ds;
  Vec g = Vec::Zero(n());
  for (Index i : indices) {
    if (i < 0 || i >= ds.size()) throw std::invalid_argument("sample index out of range");
    double z = 0.0;
    for (SparseMat::InnerIterator it(ds.features, i); it; ++it) z += it.value() * x(it.row());
    const double gamma = ds.labels(i);
    const double weight = -gamma * sigmoid_neg(gamma * z);
    for (SparseMat::InnerIterator it(ds.features, i); it; ++it) g(it.row()) += weight * it.value();
  }
  return g / static_cast<double>(indices.size());
}

double ConstrainedLogRegInstance::gradient_lipschitz_bound() const {
  const auto& d = data_->ds.features;
  const Mat gram = Mat(d * d.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() / (4.0 * static_cast<double>(samples()));
}

double ConstrainedLogRegInstance::affine_min_norm() const {
  if (m_lin() == 0) return 0.0;
  // A has full row rank, so A^+ b = A^T (A A^T)^{-1} b.
  return JacobianFactorization<double>(a()).pinv_transpose(b()).norm();
}

Problem ConstrainedLogRegInstance::problem() const {
  Problem p;
  p.n = n();
  p.m = m();
  p.objective = [self = *this](const Vec& x) { return self.objective(x); };
  p.gradient = [self = *this](const Vec& x) { return self.gradient(x); };
  p.constraints = [self = *this](const Vec& x) { return self.constraints(x); };
  p.jacobian = [self = *this](const Vec& x) { return self.jacobian(x); };
  p.initial_point = initial_point();
  p.name = "constrained-logreg";
  return p;
}

StochasticGradientOracle ConstrainedLogRegInstance::oracle(BatchSampling mode) const {
  StochasticGradientOracle o;
  const Index total = samples();
  o.sampler = [self = *this, mode, total](const Vec& x, Index batch, Rng& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(batch));
    if (mode == BatchSampling::with_replacement) {
      std::uniform_int_distribution<Index> pick(0, total - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      if (batch > total) throw std::invalid_argument("batch exceeds sample count");
      // Partial Fisher-Yates shuffle.
      std::vector<Index> pool(static_cast<std::size_t>(total));
      for (Index i = 0; i < total; ++i) pool[static_cast<std::size_t>(i)] = i;
      for (Index i = 0; i < batch; ++i) {
        std::uniform_int_distribution<Index> pick(i, total - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      }
      std::copy(pool.begin(), pool.begin() + batch, idx.begin());
    }
    return self.minibatch_gradient(x, idx);
  };
  o.variance = -1.0;  // unknown until estimated
  o.name = mode == BatchSampling::with_replacement ? "logistic-minibatch"
                                                   : "logistic-minibatch-noreplace";
  return o;
}

ConstrainedLogRegInstance build_instance(const Dataset& ds, Index m_lin, std::uint64_t seed) {
  if (m_lin < 0 || m_lin + 1 > ds.dim()) throw std::invalid_argument("need m_lin + 1 <= n");
  if (ds.size() < 1) throw std::invalid_argument("dataset has no samples");
  Rng rng(seed);
  const Index n = ds.dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt <= 10; ++attempt) {
    // Row-major draw order: A, then b, then x_1.
    Mat a(m_lin, n);
    for (Index i = 0; i < m_lin; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = normal(rng);
    Vec b(m_lin);
    for (Index i = 0; i < m_lin; ++i) b(i) = normal(rng);
    Vec x1(n);
    for (Index j = 0; j < n; ++j) x1(j) = normal(rng);
    try {
      return ConstrainedLogRegInstance(ds, std::move(a), std::move(b), std::move(x1));
    } catch (const RankError&) {
      continue;
    }
  }
  throw RankError("could not draw a full-row-rank constraint matrix in 10 retries");
}

Vec logistic_minibatch_gradient(const ConstrainedLogRegInstance& inst, const Vec& x,
                                std::span<const Index> one_based_indices) {
  std::vector<Index> idx;
  idx.reserve(one_based_indices.size());
  for (Index i : one_based_indices) {
    if (i < 1 || i > inst.samples()) throw std::invalid_argument("sample index out of range");
    idx.push_back(i - 1);
  }
  return inst.minibatch_gradient(x, idx);
}

}  // namespace ssqp
