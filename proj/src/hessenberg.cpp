#include "tpem/kernels.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <omp.h>

#include <cmath>

namespace tpem {

namespace {

bool is_real(const Mat& a) {
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (a(i, j).imag() != 0.0) return false;
  return true;
}

}  // namespace

DenseLU DenseLU::factor(const Mat& a) {
  if (a.rows() != a.cols()) throw ShapeError("DenseLU: square matrix required");
  DenseLU lu;
  lu.n_ = a.rows();
  lu.real_ = is_real(a);
  lu.ipiv_.resize(size_t(lu.n_));
  int info = 0;
  if (lu.real_) {
    lu.rf_ = a.real();
    info = LAPACKE_dgetrf(LAPACK_COL_MAJOR, int(lu.n_), int(lu.n_), lu.rf_.data(), int(lu.n_), lu.ipiv_.data());
  } else {
    lu.cf_ = a;
    info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, int(lu.n_), int(lu.n_),
                          reinterpret_cast<lapack_complex_double*>(lu.cf_.data()), int(lu.n_), lu.ipiv_.data());
  }
  if (info != 0)
    throw SingularError("DenseLU: factorization failed (zero pivot at " + std::to_string(info) + ")");
  return lu;
}

Vec DenseLU::solve(const Vec& b) const { return solveMany(b).col(0); }

Mat DenseLU::solveMany(const Mat& b) const {
  if (b.rows() != n_) throw DimensionError("DenseLU::solve: right-hand side size mismatch");
  if (real_) {
    // solve for real and imaginary parts side by side
    RMat rhs(n_, 2 * b.cols());
    rhs.leftCols(b.cols()) = b.real();
    rhs.rightCols(b.cols()) = b.imag();
    int info = LAPACKE_dgetrs(LAPACK_COL_MAJOR, 'N', int(n_), int(rhs.cols()), rf_.data(), int(n_),
                              const_cast<int*>(ipiv_.data()), rhs.data(), int(n_));
    if (info != 0) throw SingularError("DenseLU::solve: LAPACK error");
    Mat out(n_, b.cols());
    out.real() = rhs.leftCols(b.cols());
    out.imag() = rhs.rightCols(b.cols());
    return out;
  }
  Mat rhs = b;
  int info = LAPACKE_zgetrs(LAPACK_COL_MAJOR, 'N', int(n_), int(b.cols()),
                            reinterpret_cast<const lapack_complex_double*>(cf_.data()), int(n_),
                            const_cast<int*>(ipiv_.data()),
                            reinterpret_cast<lapack_complex_double*>(rhs.data()), int(n_));
  if (info != 0) throw SingularError("DenseLU::solve: LAPACK error");
  return rhs;
}

HessenbergReduction HessenbergReduction::reduce(const Mat& a) {
  if (a.rows() != a.cols()) throw ShapeError("HessenbergReduction: square matrix required");
  HessenbergReduction h;
  h.n_ = a.rows();
  h.real_ = is_real(a);
  const int n = int(h.n_);
  if (h.n_ == 0) return h;
  if (h.real_) {
    RMat work = a.real();
    std::vector<double> tau(size_t(std::max(1, n - 1)));
    if (LAPACKE_dgehrd(LAPACK_COL_MAJOR, n, 1, n, work.data(), n, tau.data()) != 0)
      throw Error("HessenbergReduction: dgehrd failed");
    h.rh_ = work.triangularView<Eigen::Upper>();
    for (Index i = 0; i + 1 < h.n_; ++i) h.rh_(i + 1, i) = work(i + 1, i);
    if (LAPACKE_dorghr(LAPACK_COL_MAJOR, n, 1, n, work.data(), n, tau.data()) != 0)
      throw Error("HessenbergReduction: dorghr failed");
    h.rq_ = std::move(work);
  } else {
    Mat work = a;
    std::vector<Complex> tau(size_t(std::max(1, n - 1)));
    if (LAPACKE_zgehrd(LAPACK_COL_MAJOR, n, 1, n, reinterpret_cast<lapack_complex_double*>(work.data()), n,
                       reinterpret_cast<lapack_complex_double*>(tau.data())) != 0)
      throw Error("HessenbergReduction: zgehrd failed");
    h.ch_ = work.triangularView<Eigen::Upper>();
    for (Index i = 0; i + 1 < h.n_; ++i) h.ch_(i + 1, i) = work(i + 1, i);
    if (LAPACKE_zunghr(LAPACK_COL_MAJOR, n, 1, n, reinterpret_cast<lapack_complex_double*>(work.data()), n,
                       reinterpret_cast<lapack_complex_double*>(tau.data())) != 0)
      throw Error("HessenbergReduction: zunghr failed");
    h.cq_ = std::move(work);
  }
  h.packRowMajor();
  return h;
}

void HessenbergReduction::packRowMajor() {
  hRowMajorRe_.assign(size_t(n_ * n_), 0.0);
  hRowMajorIm_.assign(real_ ? 0 : size_t(n_ * n_), 0.0);
  for (Index i = 0; i < n_; ++i)
    for (Index j = std::max<Index>(0, i - 1); j < n_; ++j) {
      if (real_) {
        hRowMajorRe_[size_t(i * n_ + j)] = rh_(i, j);
      } else {
        hRowMajorRe_[size_t(i * n_ + j)] = ch_(i, j).real();
        hRowMajorIm_[size_t(i * n_ + j)] = ch_(i, j).imag();
      }
    }
}

namespace {

// q^T x or q x on complex data through one real gemm over stacked re/im
Mat real_q_apply(const RMat& q, const Mat& x, bool transpose) {
  const Index n = q.rows(), m = x.cols();
  RMat rhs(n, 2 * m), res(n, 2 * m);
  rhs.leftCols(m) = x.real();
  rhs.rightCols(m) = x.imag();
  cblas_dgemm(CblasColMajor, transpose ? CblasTrans : CblasNoTrans, CblasNoTrans, int(n), int(2 * m), int(n),
              1.0, q.data(), int(n), rhs.data(), int(n), 0.0, res.data(), int(n));
  Mat out(n, m);
  out.real() = res.leftCols(m);
  out.imag() = res.rightCols(m);
  return out;
}

Mat complex_q_apply(const Mat& q, const Mat& x, bool adjoint) {
  const Index n = q.rows(), m = x.cols();
  Mat out(n, m);
  const Complex one(1.0, 0.0), zero(0.0, 0.0);
  cblas_zgemm(CblasColMajor, adjoint ? CblasConjTrans : CblasNoTrans, CblasNoTrans, int(n), int(m), int(n),
              &one, q.data(), int(n), x.data(), int(n), &zero, out.data(), int(n));
  return out;
}

}  // namespace

Mat HessenbergReduction::applyQH(const Mat& x) const {
  if (n_ == 0 || x.cols() == 0) return x;
  return real_ ? real_q_apply(rq_, x, true) : complex_q_apply(cq_, x, true);
}

Mat HessenbergReduction::applyQ(const Mat& x) const {
  if (n_ == 0 || x.cols() == 0) return x;
  return real_ ? real_q_apply(rq_, x, false) : complex_q_apply(cq_, x, false);
}

Vec HessenbergReduction::shiftedSolve(Complex shift, const Vec& b) const {
  if (b.size() != n_) throw DimensionError("shiftedSolve: size mismatch");
  const Index n = n_;
  if (n == 0) return b;
  // row-major working copy of H + shift
  std::vector<Complex> u(size_t(n * n));
  for (Index i = 0; i < n; ++i) {
    const Index j0 = std::max<Index>(0, i - 1);
    Complex* row = &u[size_t(i * n)];
    const double* re = &hRowMajorRe_[size_t(i * n)];
    if (real_) {
      for (Index j = j0; j < n; ++j) row[j] = Complex(re[j], 0.0);
    } else {
      const double* im = &hRowMajorIm_[size_t(i * n)];
      for (Index j = j0; j < n; ++j) row[j] = Complex(re[j], im[j]);
    }
    row[i] += shift;
  }
  Vec x = b;
  // forward elimination of the subdiagonal with adjacent-row pivoting
  for (Index k = 0; k + 1 < n; ++k) {
    Complex* rk = &u[size_t(k * n)];
    Complex* rk1 = &u[size_t((k + 1) * n)];
    if (std::norm(rk1[k]) > std::norm(rk[k])) {
      for (Index j = k; j < n; ++j) std::swap(rk[j], rk1[j]);
      std::swap(x[k], x[k + 1]);
    }
    if (rk[k] == Complex(0.0, 0.0)) throw SingularError("shiftedSolve: singular shifted Hessenberg matrix");
    const Complex m = rk1[k] / rk[k];
    if (m != Complex(0.0, 0.0)) {
      for (Index j = k + 1; j < n; ++j) rk1[j] -= m * rk[j];
      x[k + 1] -= m * x[k];
    }
  }
  // back substitution
  for (Index i = n - 1; i >= 0; --i) {
    const Complex* ri = &u[size_t(i * n)];
    Complex s = x[i];
    for (Index j = i + 1; j < n; ++j) s -= ri[j] * x[j];
    if (ri[i] == Complex(0.0, 0.0)) throw SingularError("shiftedSolve: singular shifted Hessenberg matrix");
    x[i] = s / ri[i];
  }
  return x;
}

Vec HessenbergReduction::shiftedSolveReference(Complex shift, const Vec& b) const {
  Mat h(n_, n_);
  if (real_)
    h = rh_.cast<Complex>();
  else
    h = ch_;
  h.diagonal().array() += shift;
  return h.partialPivLu().solve(b);
}

void parallel_for(Index n, int threads, const std::function<void(Index)>& body) {
  if (threads <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (Index i = 0; i < n; ++i) body(i);
}

Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace tpem
