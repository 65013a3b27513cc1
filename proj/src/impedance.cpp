#include "tpem/impedance.hpp"

namespace tpem {

BoundaryTriple::BoundaryTriple(HSpacePtr x1, HSpacePtr x2, HSpacePtr x3, LinOp q, LinOp alpha, LinOp b, LinOp s)
    : bdGradScalar(std::move(x1)), bdCurl(std::move(x2)), bdGradSym(std::move(x3)),
      Q(std::move(q)), alphaB(std::move(alpha)), beta(std::move(b)), S(std::move(s)) {
  if (!same_space(Q.src(), bdCurl) || !same_space(Q.dst(), bdGradSym))
    throw DimensionError("BoundaryTriple: Q must map BD(curl) -> BD(Grad)");
  if (!same_space(alphaB.src(), bdGradSym) || !same_space(alphaB.dst(), bdGradSym))
    throw DimensionError("BoundaryTriple: alphaB must act on BD(Grad)");
  if (!same_space(beta.src(), bdGradScalar) || !same_space(beta.dst(), bdCurl))
    throw DimensionError("BoundaryTriple: beta must map BD(grad) -> BD(curl)");
  if (!same_space(S.src(), bdCurl) || !same_space(S.dst(), bdCurl))
    throw DimensionError("BoundaryTriple: S must act on BD(curl)");
  S = skew_part(S);  // x - x cancels bitwise, so S + S* is the exact zero matrix
}

BoundaryTriple trivial_triple(const HSpacePtr& x1, const HSpacePtr& x2, const HSpacePtr& x3) {
  return BoundaryTriple(x1, x2, x3, LinOp::zero(x2, x3), LinOp::zero(x3, x3), LinOp::zero(x1, x2),
                        LinOp::zero(x2, x2));
}

BoundaryTriple synthetic_triple(Index dimGradScalar, Index dimCurl, Index dimGradSym, uint64_t seed,
                                TripleScales scales, bool complexEntries) {
  auto x1 = HSpace::euclidean(dimGradScalar, "BD(grad):syn");
  auto x2 = HSpace::euclidean(dimCurl, "BD(curl):syn");
  auto x3 = HSpace::euclidean(dimGradSym, "BD(Grad):syn");
  return synthetic_triple_on(x1, x2, x3, seed, scales, complexEntries);
}

BoundaryTriple synthetic_triple_on(const HSpacePtr& x1, const HSpacePtr& x2, const HSpacePtr& x3,
                                   uint64_t seed, TripleScales scales, bool complexEntries) {
  Rng rng(seed);
  auto scaleOf = [](const HSpacePtr& a, const HSpacePtr& b) {
    return 1.0 / std::sqrt(double(std::max<Index>(1, std::max(a->dim(), b->dim()))));
  };
  LinOp q = random_op(x2, x3, rng, complexEntries).scaled(scales.q * scaleOf(x2, x3));
  LinOp alpha = random_op(x3, x3, rng, complexEntries).scaled(scales.alpha * scaleOf(x3, x3));
  LinOp beta = random_op(x1, x2, rng, complexEntries).scaled(scales.beta * scaleOf(x1, x2));
  LinOp s = random_op(x2, x2, rng, complexEntries);
  return BoundaryTriple(x1, x2, x3, std::move(q), std::move(alpha), std::move(beta), std::move(s));
}

BoundaryTriple mesh_triple(const SpatialComplex& c, const BdSuite& suite, uint64_t seed, TripleScales scales) {
  Rng rng(seed);
  const auto& x1 = suite.grad.space;
  const auto& x2 = suite.curl.space;
  const auto& x3 = suite.sgrad.space;
  auto scaleOf = [](const HSpacePtr& a, const HSpacePtr& b) {
    return 1.0 / std::sqrt(double(std::max<Index>(1, std::max(a->dim(), b->dim()))));
  };
  LinOp q = random_op(x2, x3, rng, false).scaled(scales.q * scaleOf(x2, x3));
  LinOp alpha = random_op(x3, x3, rng, false).scaled(scales.alpha * scaleOf(x3, x3));
  LinOp beta = random_op(x1, x2, rng, false).scaled(scales.beta * scaleOf(x1, x2));
  LinOp s = bd_map(suite.curl, suite.curl, c).op;
  return BoundaryTriple(x1, x2, x3, std::move(q), std::move(alpha), std::move(beta), std::move(s));
}

BlockOp assemble_b(const BoundaryTriple& t, const FrequencyPoint& z) {
  const auto& x1 = t.bdGradScalar;
  const auto& x2 = t.bdCurl;
  const auto& x3 = t.bdGradSym;
  LinOp qs = adjoint(t.Q);
  LinOp bs = adjoint(t.beta);
  BlockOp b({x1, x2, x3}, {x1, x2, x3});
  b.set(0, 0, LinOp::identity(x1));
  b.set(0, 1, -bs);
  b.set(0, 2, -(bs * qs));
  b.set(1, 0, t.beta);
  b.set(1, 1, LinOp::identity(x2));
  b.set(1, 2, -(t.S * qs));
  b.set(2, 0, t.Q * t.beta);
  b.set(2, 1, -(t.Q * t.S));
  b.set(2, 2, LinOp::identity(x3) + t.alphaB.scaled(1.0 / z.z));
  return b;
}

BlockOp k_matrix_formulas(const BoundaryTriple& t, const FrequencyPoint& z) {
  const double nu = z.nu();
  const double na = t.alphaNorm();
  if (!(nu > na))
    throw PreconditionError("k_matrix_formulas: require Re z > ||alphaB|| (got Re z = " + std::to_string(nu) +
                            ", ||alphaB|| = " + std::to_string(na) + ")");
  const auto& x1 = t.bdGradScalar;
  const auto& x2 = t.bdCurl;
  const auto& x3 = t.bdGradSym;
  LinOp qs = adjoint(t.Q);
  LinOp bs = adjoint(t.beta);
  LinOp qb = t.Q * t.beta;  // BD(grad) -> BD(Grad)
  LinOp qbs = adjoint(qb);  // (Q beta)*

  // Shared factors of the entry formulas.
  LinOp gi = inverse(LinOp::identity(x2) + t.beta * bs);  // (1 + beta beta*)^{-1}
  LinOp u = t.beta * qbs - t.S * qs;                      // beta (Q beta)* - curl_BD Q*
  LinOp v = qb * bs - t.Q * t.S;                          // Q beta beta* - Q curl_BD  (= u*)
  LinOp k33;
  try {
    k33 = inverse(LinOp::identity(x3) + qb * qbs + t.alphaB.scaled(1.0 / z.z) - v * gi * u);
  } catch (const SingularError&) {
    throw SingularError("k_matrix_formulas: the leading diagonal coefficient is singular at z");
  }
  LinOp b1 = bs * gi * u - qbs;  // BD(Grad) -> BD(grad)
  LinOp b2 = qb - v * gi * t.beta;

  LinOp k63 = -(gi * u * k33);
  LinOp k36 = -(k33 * v * gi);
  LinOp k93 = -(b1 * k33);
  LinOp k39 = -(k33 * b2);
  LinOp k66 = gi + gi * u * k33 * v * gi;
  LinOp k69 = -(gi * (t.beta - u * k33 * b2));
  LinOp k96 = (bs + b1 * k33 * v) * gi;
  LinOp k99 = LinOp::identity(x1) - bs * gi * t.beta + b1 * k33 * b2;

  BlockOp k({x3, x2, x1}, {x3, x2, x1});
  k.set(0, 0, std::move(k33));
  k.set(0, 1, std::move(k36));
  k.set(0, 2, std::move(k39));
  k.set(1, 0, std::move(k63));
  k.set(1, 1, std::move(k66));
  k.set(1, 2, std::move(k69));
  k.set(2, 0, std::move(k93));
  k.set(2, 1, std::move(k96));
  k.set(2, 2, std::move(k99));
  return k;
}

double k_times_b_residual(const BoundaryTriple& t, const FrequencyPoint& z) {
  BlockOp k = k_matrix_formulas(t, z);
  BlockOp bFlipped = permute_congruence(assemble_b(t, z), {2, 1, 0});
  LinOp prod = k.flatten() * bFlipped.flatten();
  return frobenius_norm(prod - LinOp::identity(prod.src()));
}

std::vector<double> z_sample_imag_factors() {
  return {0.0, 1.0, -1.0, 10.0, -10.0, 100.0, -100.0, 1000.0, -1000.0};
}

BPositivityBounds b_positivity_bounds(const BoundaryTriple& t, double nu) {
  if (!(nu > 0.0)) throw PreconditionError("b_positivity_bounds: require nu > 0");
  const double na = t.alphaNorm();
  BPositivityBounds out;
  out.reB = 1.0 - na / nu;
  out.positive = out.reB > 0.0;
  const double imagScale = 1.0 + na;
  for (double f : z_sample_imag_factors()) out.zSamples.emplace_back(nu, f * imagScale);

  double supB = 0.0;
  for (Complex z : out.zSamples) {
    BlockOp b = assemble_b(t, FrequencyPoint(z));
    supB = std::max(supB, operator_norm(b.flatten()));
    const double cB = positivity_constant(b.flatten());
    if (cB < out.reB - 1e-12)
      throw Error("b_positivity_bounds: measured Re B(z) bound violated (" + std::to_string(cB) + " < " +
                  std::to_string(out.reB) + ")");
  }
  out.reKlower = out.positive ? out.reB / (supB * supB) : 0.0;
  if (out.positive) {
    for (Complex z : out.zSamples) {
      BlockOp k = k_matrix_formulas(t, FrequencyPoint(z));
      const double cK = positivity_constant(k.flatten());
      if (cK < out.reKlower - 1e-12)
        throw Error("b_positivity_bounds: measured Re K(z) bound violated (" + std::to_string(cK) + " < " +
                    std::to_string(out.reKlower) + ")");
    }
  }
  return out;
}

}  // namespace tpem
