#pragma once
// Dense kernels for the causal and frequency-domain solvers: LAPACK-backed
// LU with many right-hand sides, Hessenberg reduction of a system pencil,
// and shifted Hessenberg solves. The shifted solve comes in an optimized
// row-major form (used by the OpenMP frequency sweep) and a plain reference
// form kept for testing and benchmarking.

#include "tpem/linops.hpp"

#include <functional>
#include <vector>

namespace tpem {

// One-time factorization with repeated solves; real storage when the matrix
// is real (half the memory, a quarter of the flops).
class DenseLU {
 public:
  DenseLU() = default;
  static DenseLU factor(const Mat& a);  // throws SingularError on breakdown
  bool isReal() const { return real_; }
  Index dim() const { return n_; }
  Vec solve(const Vec& b) const;
  Mat solveMany(const Mat& b) const;

 private:
  bool real_ = false;
  Index n_ = 0;
  RMat rf_;
  Mat cf_;
  std::vector<int> ipiv_;
};

// Reduction A = Q H Q^H with H upper Hessenberg; real path when A is real.
class HessenbergReduction {
 public:
  static HessenbergReduction reduce(const Mat& a);
  bool isReal() const { return real_; }
  Index dim() const { return n_; }
  // Q^H x and Q x (batched over columns)
  Mat applyQH(const Mat& x) const;
  Mat applyQ(const Mat& x) const;
  // (H + shift) y = b, optimized row-major Gauss with adjacent-row pivoting
  Vec shiftedSolve(Complex shift, const Vec& b) const;
  // reference implementation: dense LU of (H + shift) via Eigen
  Vec shiftedSolveReference(Complex shift, const Vec& b) const;

 private:
  bool real_ = false;
  Index n_ = 0;
  RMat rq_, rh_;           // real path
  Mat cq_, ch_;            // complex path
  std::vector<double> hRowMajorRe_, hRowMajorIm_;  // packed row-major H
  void packRowMajor();
};

// Deterministic parallel map: body(i) for i in [0, n), OpenMP across the
// given number of threads (1 = serial reference path).
void parallel_for(Index n, int threads, const std::function<void(Index)>& body);

Index next_pow2(Index n);

}  // namespace tpem
