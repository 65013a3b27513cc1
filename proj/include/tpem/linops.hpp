#pragma once
// Finite-dimensional Hilbert spaces with explicit Gram matrices, and the
// Gram-weighted operator algebra (adjoints, real parts, positivity
// constants, guarded inverses) that the rest of the solver is built on.

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace tpem {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};
struct SingularError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

class HSpace;
using HSpacePtr = std::shared_ptr<const HSpace>;

// Inner-product space with a Hermitian positive-definite Gram matrix.
// The Gram is held through its lower Cholesky factor F (G = F F^H),
// computed once at construction. Euclidean and diagonal Grams keep the
// factor implicit so large graph/volume spaces stay cheap.
class HSpace {
 public:
  static HSpacePtr euclidean(Index dim, std::string label);
  static HSpacePtr diagonal(RVec weights, std::string label);
  static HSpacePtr dense(Mat gram, std::string label);
  // Direct sum; Gram is the block diagonal of the summand Grams.
  static HSpacePtr directSum(const std::vector<HSpacePtr>& parts, std::string label);

  Index dim() const { return dim_; }
  const std::string& label() const { return label_; }
  bool isEuclidean() const { return kind_ == Kind::Euclidean; }
  bool isDiagonal() const { return kind_ != Kind::Dense; }
  // diagonal Gram weight (1 for euclidean spaces)
  double weightAt(Index i) const;

  Mat gram() const;  // materialized on demand

  // <x,y> is conjugate-linear in the first argument.
  Complex inner(const Vec& x, const Vec& y) const;
  double norm(const Vec& x) const;

  // G*M and G^{-1}*M
  Mat applyGram(const Mat& m) const;
  Mat solveGram(const Mat& m) const;
  // Cholesky factor applications: F^H*M, F*M, F^{-1}*M, F^{-H}*M
  Mat mulFH(const Mat& m) const;
  Mat mulF(const Mat& m) const;
  Mat solveF(const Mat& m) const;
  Mat solveFH(const Mat& m) const;

 private:
  enum class Kind { Euclidean, Diagonal, Dense };
  HSpace(Kind k, Index dim, std::string label) : kind_(k), dim_(dim), label_(std::move(label)) {}

  Kind kind_;
  Index dim_;
  std::string label_;
  RVec w_;        // diagonal case: the weights themselves
  RVec sqrtw_;    // diagonal case: sqrt of the weights
  Mat gram_;      // dense case
  Mat cholL_;     // dense case: lower Cholesky factor, computed once
  bool realGram_ = false;
};

inline bool same_space(const HSpacePtr& a, const HSpacePtr& b) { return a.get() == b.get(); }

// Bounded operator between two HSpaces, stored as a dense matrix
// (dst.dim x src.dim) over the coordinate bases.
class LinOp {
 public:
  LinOp() = default;
  LinOp(HSpacePtr src, HSpacePtr dst, Mat m);

  static LinOp identity(const HSpacePtr& s);
  static LinOp zero(const HSpacePtr& src, const HSpacePtr& dst);
  static LinOp scalar(const HSpacePtr& s, Complex value);  // value * identity

  const HSpacePtr& src() const { return src_; }
  const HSpacePtr& dst() const { return dst_; }
  const Mat& mat() const { return m_; }
  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  bool isSquare() const { return same_space(src_, dst_); }

  Vec apply(const Vec& x) const;

  LinOp operator+(const LinOp& o) const;
  LinOp operator-(const LinOp& o) const;
  LinOp operator-() const;
  LinOp operator*(const LinOp& o) const;  // composition
  LinOp scaled(Complex c) const;

  double maxAbs() const { return m_.size() ? m_.cwiseAbs().maxCoeff() : 0.0; }

 private:
  HSpacePtr src_, dst_;
  Mat m_;
};

// Gram-weighted adjoint: <a x, y>_dst = <x, adjoint(a) y>_src.
LinOp adjoint(const LinOp& a);

// (a + a*)/2; requires src == dst.
LinOp real_part(const LinOp& a);
// (a - a*)/2
LinOp skew_part(const LinOp& a);

// Smallest eigenvalue of real_part(a) in the Gram inner product; a >> 0
// iff the value is positive.
double positivity_constant(const LinOp& a);

enum class Definiteness { Positive, IndefiniteToTolerance, NotPositive };
// Positivity decision with the certificate tolerance; values inside
// (-tol, tol) are reported indefinite-to-tolerance, never positive.
Definiteness classify_positivity(const LinOp& a, double tol = 1e-10);

// Largest Gram-weighted singular value, sup ||a x||_dst / ||x||_src.
double operator_norm(const LinOp& a);

// Frobenius norm in the Gram-orthonormal coordinates.
double frobenius_norm(const LinOp& a);

// Guarded inverse; throws SingularError when the matrix is singular to
// tolerance (checked through the inverse residual).
LinOp inverse(const LinOp& a, double tol = 1e-12);

// Dense product through BLAS, with a real fast path. Large compositions go
// through this; the structural exact-zero identities stay intact because
// the stencil entries they cancel over are exactly representable.
Mat blas_mul(const Mat& a, const Mat& b);

// Ascending eigenvalues of a Hermitian matrix (LAPACK, real fast path).
RVec hermitian_eigenvalues(const Mat& h);

bool is_real_matrix(const Mat& m);

struct InverseWithBounds {
  LinOp inv;
  double normBound;  // 1/c
  double reBound;    // c * ||a||^{-2}
};
// Certified inverse of an operator with Re a >= c > 0. Both bounds are
// recomputed on the result and asserted before returning.
InverseWithBounds inverse_with_bounds(const LinOp& a, double c);

}  // namespace tpem
