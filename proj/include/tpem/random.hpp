#pragma once
// Seeded generators for random spaces, operators and structured test data.
// All draws go through a single mt19937_64 stream so runs are reproducible
// from the seed alone.

#include "tpem/linops.hpp"

#include <random>

namespace tpem {

using Rng = std::mt19937_64;

inline double randn(Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

inline Mat randn_mat(Index rows, Index cols, Rng& rng, bool complexEntries = true) {
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      m(i, j) = complexEntries ? Complex(randn(rng), randn(rng)) : Complex(randn(rng), 0.0);
  return m;
}

inline Vec randn_vec(Index n, Rng& rng, bool complexEntries = true) {
  return randn_mat(n, 1, rng, complexEntries).col(0);
}

// Hermitian positive-definite Gram with eigenvalues bounded away from zero.
inline HSpacePtr random_hspace(Index dim, Rng& rng, const std::string& label = "rnd") {
  Mat r = randn_mat(dim, dim, rng);
  Mat g = Mat::Identity(dim, dim) + (r * r.adjoint()) / double(std::max<Index>(dim, 1));
  return HSpace::dense(std::move(g), label);
}

inline LinOp random_op(const HSpacePtr& src, const HSpacePtr& dst, Rng& rng, bool complexEntries = true) {
  return LinOp(src, dst, randn_mat(dst->dim(), src->dim(), rng, complexEntries));
}

inline LinOp random_selfadjoint(const HSpacePtr& s, Rng& rng, bool complexEntries = true) {
  LinOp a = random_op(s, s, rng, complexEntries);
  return real_part(a);
}

inline LinOp random_skew(const HSpacePtr& s, Rng& rng, bool complexEntries = true) {
  LinOp a = random_op(s, s, rng, complexEntries);
  return skew_part(a);
}

// Selfadjoint with Re >= margin (positive definite by construction).
inline LinOp random_spd(const HSpacePtr& s, Rng& rng, double margin = 0.5, bool complexEntries = true) {
  LinOp a = random_op(s, s, rng, complexEntries);
  LinOp aa = adjoint(a) * a;
  return (aa.scaled(1.0 / std::max<double>(1.0, double(s->dim()))) + LinOp::scalar(s, margin));
}

}  // namespace tpem
