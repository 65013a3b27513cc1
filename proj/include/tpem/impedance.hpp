#pragma once
// Impedance boundary block operator B(z) on BD(grad) + BD(curl) + BD(Grad),
// its closed-form inverse assembled entry by entry (the K coefficients),
// and the positivity bounds used by the well-posedness certificate.

#include "tpem/bdspace.hpp"
#include "tpem/blockop.hpp"
#include "tpem/random.hpp"

namespace tpem {

struct FrequencyPoint {
  Complex z;
  explicit FrequencyPoint(Complex zz) : z(zz) {
    if (!(z.real() > 0.0)) throw PreconditionError("FrequencyPoint: require Re z > 0");
  }
  double nu() const { return z.real(); }
};

// The boundary operators of the impedance condition. S plays the role of
// the boundary rotation on BD(curl) and is forced exactly skew-adjoint at
// construction; alphaB is the boundary relaxation operator (kept separate
// from the material heat-capacity factor).
struct BoundaryTriple {
  HSpacePtr bdGradScalar;  // BD(grad)
  HSpacePtr bdCurl;        // BD(curl)
  HSpacePtr bdGradSym;     // BD(Grad)
  LinOp Q;                 // BD(curl) -> BD(Grad)
  LinOp alphaB;            // BD(Grad) -> BD(Grad)
  LinOp beta;              // BD(grad) -> BD(curl)
  LinOp S;                 // BD(curl) -> BD(curl), exactly skew

  BoundaryTriple(HSpacePtr x1, HSpacePtr x2, HSpacePtr x3, LinOp q, LinOp alpha, LinOp b, LinOp s);

  double alphaNorm() const { return operator_norm(alphaB); }
  bool isTrivial() const { return Q.maxAbs() == 0.0 && beta.maxAbs() == 0.0 && alphaB.maxAbs() == 0.0; }
};

struct TripleScales {
  double q = 1.0, alpha = 1.0, beta = 1.0;
};

// All couplings zero; the boundary block reduces to the identity.
BoundaryTriple trivial_triple(const HSpacePtr& x1, const HSpacePtr& x2, const HSpacePtr& x3);

// Seeded random operators on euclidean spaces of the given dimensions.
BoundaryTriple synthetic_triple(Index dimGradScalar, Index dimCurl, Index dimGradSym, uint64_t seed,
                                TripleScales scales = {}, bool complexEntries = true);

// Seeded random operators on existing boundary-data spaces (mesh-derived or
// otherwise); S is random and exactly skew.
BoundaryTriple synthetic_triple_on(const HSpacePtr& x1, const HSpacePtr& x2, const HSpacePtr& x3,
                                   uint64_t seed, TripleScales scales = {}, bool complexEntries = false);

// Mesh-derived triple: S is the exactly-skew part of the induced curl map
// on BD(curl); Q, alphaB, beta are seeded random operators scaled by the
// given factors.
BoundaryTriple mesh_triple(const SpatialComplex& c, const BdSuite& suite, uint64_t seed,
                           TripleScales scales = {});

// The 3x3 boundary block on BD(grad) + BD(curl) + BD(Grad):
//   [ 1      -beta*   -beta* Q* ]
//   [ beta    1       -S Q*     ]
//   [ Q beta -Q S      1 + alphaB/z ]
BlockOp assemble_b(const BoundaryTriple& t, const FrequencyPoint& z);

// Closed-form inverse of the boundary block, assembled from the explicit
// entry formulas (never from a matrix inversion of B itself), arranged in
// the layout the material operator uses: rows/columns ordered
// (BD(Grad), BD(curl), BD(grad)), i.e. flipped relative to assemble_b.
// Requires Re z > ||alphaB||.
BlockOp k_matrix_formulas(const BoundaryTriple& t, const FrequencyPoint& z);

// || K(z) * flip(B(z)) - 1 ||_F, the module's central identity.
double k_times_b_residual(const BoundaryTriple& t, const FrequencyPoint& z);

struct BPositivityBounds {
  double reB;       // 1 - ||alphaB||/nu
  double reKlower;  // reB * (sup_z ||B(z)||)^{-2} over the sample set
  std::vector<Complex> zSamples;
  bool positive;    // false when nu <= ||alphaB||
};

// Positivity bounds for Re B(z) and Re K(z) on the declared z-sample grid
// at Re z = nu; both are asserted against measured positivity constants.
BPositivityBounds b_positivity_bounds(const BoundaryTriple& t, double nu);

// The |Im z| factors of the declared z-sample grid.
std::vector<double> z_sample_imag_factors();

}  // namespace tpem
