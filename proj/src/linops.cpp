#include "tpem/linops.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <cmath>
#include <map>
#include <mutex>

namespace tpem {

HSpacePtr HSpace::euclidean(Index dim, std::string label) {
  if (dim < 0) throw DimensionError("HSpace: negative dimension");
  auto s = std::shared_ptr<HSpace>(new HSpace(Kind::Euclidean, dim, std::move(label)));
  return s;
}

HSpacePtr HSpace::diagonal(RVec weights, std::string label) {
  for (Index i = 0; i < weights.size(); ++i)
    if (!(weights[i] > 0.0)) throw PreconditionError("HSpace: diagonal Gram weights must be positive");
  auto s = std::shared_ptr<HSpace>(new HSpace(Kind::Diagonal, weights.size(), std::move(label)));
  s->sqrtw_ = weights.cwiseSqrt();
  s->w_ = std::move(weights);
  return s;
}

double HSpace::weightAt(Index i) const {
  if (kind_ == Kind::Euclidean) return 1.0;
  if (kind_ == Kind::Diagonal) return w_[i];
  throw ShapeError("HSpace::weightAt: dense Gram has no diagonal weights");
}

HSpacePtr HSpace::dense(Mat gram, std::string label) {
  if (gram.rows() != gram.cols()) throw DimensionError("HSpace: Gram matrix must be square");
  const double scale = gram.size() ? gram.cwiseAbs().maxCoeff() : 0.0;
  if (gram.size() && (gram - gram.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
    throw PreconditionError("HSpace: Gram matrix is not Hermitian");
  auto s = std::shared_ptr<HSpace>(new HSpace(Kind::Dense, gram.rows(), std::move(label)));
  s->gram_ = 0.5 * (gram + gram.adjoint().eval());
  const Index n = s->gram_.rows();
  s->realGram_ = is_real_matrix(s->gram_);
  int info = 0;
  if (s->realGram_) {
    RMat f = s->gram_.real();
    info = n ? LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', int(n), f.data(), int(n)) : 0;
    s->cholL_ = f.triangularView<Eigen::Lower>().toDenseMatrix().cast<Complex>();
  } else {
    Mat f = s->gram_;
    info = n ? LAPACKE_zpotrf(LAPACK_COL_MAJOR, 'L', int(n), reinterpret_cast<lapack_complex_double*>(f.data()), int(n))
             : 0;
    s->cholL_ = f.triangularView<Eigen::Lower>();
  }
  if (info != 0)
    throw PreconditionError("HSpace: Gram matrix is not positive definite (label=" + s->label_ + ")");
  return s;
}

namespace {

// op: 0 = L x, 1 = L^H x, 2 = L^{-1} x, 3 = L^{-H} x, with a real fast path
Mat chol_apply(const Mat& lfactor, bool realFactor, const Mat& x, int op) {
  const Index n = lfactor.rows();
  const Index m = x.cols();
  if (n == 0 || m == 0) return x;
  const bool solve = op >= 2;
  const bool adj = (op == 1 || op == 3);
  if (realFactor) {
    RMat lf = lfactor.real();
    RMat rhs(n, 2 * m);
    rhs.leftCols(m) = x.real();
    rhs.rightCols(m) = x.imag();
    if (solve)
      cblas_dtrsm(CblasColMajor, CblasLeft, CblasLower, adj ? CblasTrans : CblasNoTrans, CblasNonUnit, int(n),
                  int(2 * m), 1.0, lf.data(), int(n), rhs.data(), int(n));
    else
      cblas_dtrmm(CblasColMajor, CblasLeft, CblasLower, adj ? CblasTrans : CblasNoTrans, CblasNonUnit, int(n),
                  int(2 * m), 1.0, lf.data(), int(n), rhs.data(), int(n));
    Mat out(n, m);
    out.real() = rhs.leftCols(m);
    out.imag() = rhs.rightCols(m);
    return out;
  }
  Mat rhs = x;
  const Complex one(1.0, 0.0);
  if (solve)
    cblas_ztrsm(CblasColMajor, CblasLeft, CblasLower, adj ? CblasConjTrans : CblasNoTrans, CblasNonUnit,
                int(n), int(m), &one, lfactor.data(), int(n), rhs.data(), int(n));
  else
    cblas_ztrmm(CblasColMajor, CblasLeft, CblasLower, adj ? CblasConjTrans : CblasNoTrans, CblasNonUnit,
                int(n), int(m), &one, lfactor.data(), int(n), rhs.data(), int(n));
  return rhs;
}

}  // namespace

namespace {
// Direct sums are memoized on their part list so repeated flattenings of
// block operators over the same spaces agree by pointer identity.
std::map<std::vector<const HSpace*>, std::weak_ptr<const HSpace>>& direct_sum_cache() {
  static std::map<std::vector<const HSpace*>, std::weak_ptr<const HSpace>> cache;
  return cache;
}
std::mutex& direct_sum_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

HSpacePtr HSpace::directSum(const std::vector<HSpacePtr>& parts, std::string label) {
  std::vector<const HSpace*> key;
  key.reserve(parts.size());
  for (const auto& p : parts) key.push_back(p.get());
  {
    std::lock_guard<std::mutex> lock(direct_sum_mutex());
    auto it = direct_sum_cache().find(key);
    if (it != direct_sum_cache().end())
      if (auto hit = it->second.lock()) return hit;
  }
  Index dim = 0;
  bool euclid = true, diag = true;
  for (const auto& p : parts) {
    dim += p->dim();
    euclid = euclid && p->isEuclidean();
    diag = diag && p->isDiagonal();
  }
  HSpacePtr sum;
  if (euclid) {
    sum = euclidean(dim, std::move(label));
  } else if (diag) {
    RVec w(dim);
    Index at = 0;
    for (const auto& p : parts) {
      if (p->isEuclidean())
        w.segment(at, p->dim()).setOnes();
      else
        w.segment(at, p->dim()) = p->w_;
      at += p->dim();
    }
    sum = diagonal(std::move(w), std::move(label));
  } else {
    Mat g = Mat::Zero(dim, dim);
    Index at = 0;
    for (const auto& p : parts) {
      g.block(at, at, p->dim(), p->dim()) = p->gram();
      at += p->dim();
    }
    sum = dense(std::move(g), std::move(label));
  }
  std::lock_guard<std::mutex> lock(direct_sum_mutex());
  direct_sum_cache()[key] = sum;
  return sum;
}

Mat HSpace::gram() const {
  switch (kind_) {
    case Kind::Euclidean:
      return Mat::Identity(dim_, dim_);
    case Kind::Diagonal:
      return w_.cast<Complex>().asDiagonal();
    default:
      return gram_;
  }
}

Complex HSpace::inner(const Vec& x, const Vec& y) const {
  if (x.size() != dim_ || y.size() != dim_) throw DimensionError("HSpace::inner: size mismatch");
  switch (kind_) {
    case Kind::Euclidean:
      return x.dot(y);
    case Kind::Diagonal:
      return x.dot(w_.cast<Complex>().cwiseProduct(y));
    default:
      return x.dot(gram_ * y);
  }
}

double HSpace::norm(const Vec& x) const {
  double n2 = std::real(inner(x, x));
  return n2 > 0.0 ? std::sqrt(n2) : 0.0;
}

Mat HSpace::applyGram(const Mat& m) const {
  switch (kind_) {
    case Kind::Euclidean:
      return m;
    case Kind::Diagonal:
      return w_.cast<Complex>().asDiagonal() * m;
    default:
      return blas_mul(gram_, m);
  }
}

Mat HSpace::solveGram(const Mat& m) const {
  switch (kind_) {
    case Kind::Euclidean:
      return m;
    case Kind::Diagonal:
      return w_.cwiseInverse().cast<Complex>().asDiagonal() * m;
    default:
      return chol_apply(cholL_, realGram_, chol_apply(cholL_, realGram_, m, 2), 3);
  }
}

Mat HSpace::mulFH(const Mat& m) const {
  switch (kind_) {
    case Kind::Euclidean:
      return m;
    case Kind::Diagonal:
      return sqrtw_.cast<Complex>().asDiagonal() * m;
    default:
      return chol_apply(cholL_, realGram_, m, 1);
  }
}

Mat HSpace::mulF(const Mat& m) const {
  switch (kind_) {
    case Kind::Euclidean:
      return m;
    case Kind::Diagonal:
      return sqrtw_.cast<Complex>().asDiagonal() * m;
    default:
      return chol_apply(cholL_, realGram_, m, 0);
  }
}

Mat HSpace::solveF(const Mat& m) const {
  switch (kind_) {
    case Kind::Euclidean:
      return m;
    case Kind::Diagonal:
      return sqrtw_.cwiseInverse().cast<Complex>().asDiagonal() * m;
    default:
      return chol_apply(cholL_, realGram_, m, 2);
  }
}

Mat HSpace::solveFH(const Mat& m) const {
  switch (kind_) {
    case Kind::Euclidean:
      return m;
    case Kind::Diagonal:
      return sqrtw_.cwiseInverse().cast<Complex>().asDiagonal() * m;
    default:
      return chol_apply(cholL_, realGram_, m, 3);
  }
}

LinOp::LinOp(HSpacePtr src, HSpacePtr dst, Mat m) : src_(std::move(src)), dst_(std::move(dst)), m_(std::move(m)) {
  if (m_.rows() != dst_->dim() || m_.cols() != src_->dim())
    throw DimensionError("LinOp: matrix is " + std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()) +
                         " but spaces demand " + std::to_string(dst_->dim()) + "x" + std::to_string(src_->dim()));
}


bool is_real_matrix(const Mat& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (m(i, j).imag() != 0.0) return false;
  return true;
}

Mat blas_mul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw DimensionError("blas_mul: inner dimensions differ");
  const Index m = a.rows(), k = a.cols(), n = b.cols();
  if (m == 0 || n == 0) return Mat::Zero(m, n);
  if (k == 0) return Mat::Zero(m, n);
  if (std::min({m, n, k}) < 32) return a * b;
  if (is_real_matrix(a) && is_real_matrix(b)) {
    RMat ar = a.real(), br = b.real(), cr(m, n);
    cblas_dgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, int(m), int(n), int(k), 1.0, ar.data(), int(m),
                br.data(), int(k), 0.0, cr.data(), int(m));
    return cr.cast<Complex>();
  }
  Mat c(m, n);
  const Complex one(1.0, 0.0), zero(0.0, 0.0);
  cblas_zgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, int(m), int(n), int(k), &one, a.data(), int(m),
              b.data(), int(k), &zero, c.data(), int(m));
  return c;
}

RVec hermitian_eigenvalues(const Mat& h) {
  const Index n = h.rows();
  RVec w(n);
  if (n == 0) return w;
  if (n <= 24) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  if (is_real_matrix(h)) {
    RMat a = h.real();
    if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', int(n), a.data(), int(n), w.data()) != 0)
      throw Error("hermitian_eigenvalues: dsyevd failed");
    return w;
  }
  Mat a = h;
  if (LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', int(n), reinterpret_cast<lapack_complex_double*>(a.data()),
                     int(n), w.data()) != 0)
    throw Error("hermitian_eigenvalues: zheevd failed");
  return w;
}

LinOp LinOp::identity(const HSpacePtr& s) { return LinOp(s, s, Mat::Identity(s->dim(), s->dim())); }

LinOp LinOp::zero(const HSpacePtr& src, const HSpacePtr& dst) {
  return LinOp(src, dst, Mat::Zero(dst->dim(), src->dim()));
}

LinOp LinOp::scalar(const HSpacePtr& s, Complex value) {
  return LinOp(s, s, value * Mat::Identity(s->dim(), s->dim()));
}

Vec LinOp::apply(const Vec& x) const {
  if (x.size() != m_.cols()) throw DimensionError("LinOp::apply: vector size mismatch");
  return m_ * x;
}

LinOp LinOp::operator+(const LinOp& o) const {
  if (!same_space(src_, o.src_) || !same_space(dst_, o.dst_))
    throw DimensionError("LinOp::+: space mismatch");
  return LinOp(src_, dst_, m_ + o.m_);
}

LinOp LinOp::operator-(const LinOp& o) const {
  if (!same_space(src_, o.src_) || !same_space(dst_, o.dst_))
    throw DimensionError("LinOp::-: space mismatch");
  return LinOp(src_, dst_, m_ - o.m_);
}

LinOp LinOp::operator-() const { return LinOp(src_, dst_, -m_); }

LinOp LinOp::operator*(const LinOp& o) const {
  if (!same_space(src_, o.dst_)) throw DimensionError("LinOp::*: composition space mismatch");
  if (maxAbs() == 0.0 || o.maxAbs() == 0.0) return LinOp::zero(o.src_, dst_);
  return LinOp(o.src_, dst_, blas_mul(m_, o.m_));
}

LinOp LinOp::scaled(Complex c) const { return LinOp(src_, dst_, c * m_); }

LinOp adjoint(const LinOp& a) {
  // A* = G_src^{-1} A^H G_dst. Diagonal Grams go through entrywise weight
  // ratios: when the weights share a common base (as the mesh weights do),
  // the ratios are exact powers of two and the adjoint is an involution bit
  // for bit, which the structural exactness claims rely on.
  if (a.src()->isDiagonal() && a.dst()->isDiagonal()) {
    Mat m(a.cols(), a.rows());
    for (Index i = 0; i < a.cols(); ++i) {
      const double ws = a.src()->weightAt(i);
      for (Index j = 0; j < a.rows(); ++j) m(i, j) = std::conj(a.mat()(j, i)) * (a.dst()->weightAt(j) / ws);
    }
    return LinOp(a.dst(), a.src(), std::move(m));
  }
  Mat m = a.src()->solveGram(a.dst()->applyGram(a.mat()).adjoint());
  return LinOp(a.dst(), a.src(), std::move(m));
}

LinOp real_part(const LinOp& a) {
  if (!a.isSquare()) throw ShapeError("real_part: operator must act on a single space");
  return (a + adjoint(a)).scaled(0.5);
}

LinOp skew_part(const LinOp& a) {
  if (!a.isSquare()) throw ShapeError("skew_part: operator must act on a single space");
  return (a - adjoint(a)).scaled(0.5);
}

namespace {

// Hermitian part of the operator in Gram-orthonormal coordinates:
// (F^H A F^{-H} + (..)^H)/2 with G = F F^H.
Mat hermitian_part_ortho(const LinOp& a) {
  const auto& s = a.src();
  Mat ao = s->mulFH(a.mat());                  // F^H A
  Mat tr = s->solveF(ao.adjoint()).adjoint();  // (F^{-1} (F^H A)^H)^H = F^H A F^{-H}
  return Mat(0.5 * (tr + tr.adjoint().eval()));
}

}  // namespace

double positivity_constant(const LinOp& a) {
  if (!a.isSquare()) throw ShapeError("positivity_constant: operator must act on a single space");
  if (a.rows() == 0) return 0.0;
  Mat h = hermitian_part_ortho(a);
  return hermitian_eigenvalues(h).minCoeff();
}

Definiteness classify_positivity(const LinOp& a, double tol) {
  double c = positivity_constant(a);
  if (c >= tol) return Definiteness::Positive;
  if (c > -tol) return Definiteness::IndefiniteToTolerance;
  return Definiteness::NotPositive;
}

double operator_norm(const LinOp& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  // F_dst^H A F_src^{-H}, then the largest singular value.
  Mat t = a.dst()->mulFH(a.mat());
  t = a.src()->solveF(t.adjoint()).adjoint();
  if (t.rows() <= 64 && t.cols() <= 64) {
    Eigen::JacobiSVD<Mat> svd(t);
    return svd.singularValues()(0);
  }
  // Largest eigenvalue of t^H t; adequate for the sizes in play.
  Mat g = blas_mul(t.adjoint(), t);
  double l = hermitian_eigenvalues(g).maxCoeff();
  return l > 0.0 ? std::sqrt(l) : 0.0;
}

double frobenius_norm(const LinOp& a) {
  Mat t = a.dst()->mulFH(a.mat());
  t = a.src()->solveF(t.adjoint()).adjoint();
  return t.norm();
}

LinOp inverse(const LinOp& a, double tol) {
  if (!a.isSquare()) throw ShapeError("inverse: operator must act on a single space");
  const Index n = a.rows();
  if (n == 0) return a;
  Mat inv;
  std::vector<int> ipiv(static_cast<size_t>(n));
  if (is_real_matrix(a.mat())) {
    RMat f = a.mat().real();
    if (LAPACKE_dgetrf(LAPACK_COL_MAJOR, int(n), int(n), f.data(), int(n), ipiv.data()) != 0 ||
        LAPACKE_dgetri(LAPACK_COL_MAJOR, int(n), f.data(), int(n), ipiv.data()) != 0)
      throw SingularError("inverse: singular matrix");
    inv = f.cast<Complex>();
  } else {
    Mat f = a.mat();
    auto* data = reinterpret_cast<lapack_complex_double*>(f.data());
    if (LAPACKE_zgetrf(LAPACK_COL_MAJOR, int(n), int(n), data, int(n), ipiv.data()) != 0 ||
        LAPACKE_zgetri(LAPACK_COL_MAJOR, int(n), data, int(n), ipiv.data()) != 0)
      throw SingularError("inverse: singular matrix");
    inv = std::move(f);
  }
  if (!inv.allFinite()) throw SingularError("inverse: singular matrix");
  double resid = (blas_mul(a.mat(), inv) - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  if (resid > std::max(tol, 1e-8))
    throw SingularError("inverse: singular to tolerance (residual " + std::to_string(resid) + ")");
  return LinOp(a.dst(), a.src(), std::move(inv));
}

InverseWithBounds inverse_with_bounds(const LinOp& a, double c) {
  if (!a.isSquare()) throw ShapeError("inverse_with_bounds: operator must act on a single space");
  if (!(c > 0.0)) throw PreconditionError("inverse_with_bounds: require c > 0");
  const double ca = positivity_constant(a);
  if (ca < c - 1e-12)
    throw PreconditionError("inverse_with_bounds: positivity constant " + std::to_string(ca) +
                            " is below the requested c = " + std::to_string(c));
  LinOp inv = inverse(a);
  const double normBound = 1.0 / c;
  const double na = operator_norm(a);
  const double reBound = c / (na * na);
  if (operator_norm(inv) > normBound + 1e-10)
    throw Error("inverse_with_bounds: norm bound violated");
  if (positivity_constant(inv) < reBound - 1e-10)
    throw Error("inverse_with_bounds: real-part bound violated");
  return {std::move(inv), normBound, reBound};
}

}  // namespace tpem
