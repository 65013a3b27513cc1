#pragma once
// Discrete spatial complex on a rectangular box. Scalar, vector and
// symmetric-matrix fields are collocated at the nodes of a tensor grid;
// the five first-order operators are built from one-dimensional
// summation-by-parts derivatives (second-order central stencils inside,
// one-sided closures at the ends, diagonal quadrature weights). With the
// diagonal volume Grams this makes every integration-by-parts identity
// hold with an exactly representable boundary term, and makes
// curl(grad u) and div(curl w) vanish identically.

#include "tpem/linops.hpp"

#include <array>
#include <map>
#include <vector>

namespace tpem {

enum class OpName { Grad, Div, Curl, SGrad, SDiv };
std::string to_string(OpName op);

struct Cells {
  int nx, ny, nz;
};
struct Lengths {
  double lx, ly, lz;
};

class SpatialComplex {
 public:
  Cells cells{};
  Lengths lengths{};

  // nodes per axis = cells + 1
  Index nodeCount() const { return npts_; }

  HSpacePtr S;    // scalar fields
  HSpacePtr V;    // 3-component vector fields (E, H, q, heat-flux space)
  HSpacePtr S3;   // 3-component displacement/velocity fields
  HSpacePtr SYM;  // symmetric 3x3 matrix fields, components (xx,yy,zz,xy,xz,yz)

  LinOp grad;   // S   -> V
  LinOp div;    // V   -> S
  LinOp curl;   // V   -> V
  LinOp sgrad;  // S3  -> SYM
  LinOp sdiv;   // SYM -> S3

  const LinOp& op(OpName name) const;
  // The operator's domain space and the dual operator of its
  // integration-by-parts pair.
  const HSpacePtr& domainOf(OpName name) const;

  // Coordinate indices that vanish on the homogeneous subspace of the
  // operator (Dirichlet nodes for grad/sgrad, normal components for
  // div/sdiv, tangential components for curl).
  const std::vector<Index>& homog(OpName name) const;
  Index homogDim(OpName name) const { return domainOf(name)->dim() - Index(homog(name).size()); }

  // Zero out the constrained coordinates, yielding a homogeneous element.
  Vec projectHomogeneous(OpName name, Vec u) const;

  Index interiorNodeCount() const;

 private:
  friend SpatialComplex build_complex(Cells, Lengths);
  Index npts_ = 0;
  std::map<OpName, std::vector<Index>> homog_;
};

SpatialComplex build_complex(Cells cells, Lengths lengths);

// Discrete boundary pairing <D u, w> + <u, D' w> (minus sign for the curl
// pair), which collapses to a pure surface quadrature; zero whenever either
// argument is homogeneous.
Complex ibp_boundary_pairing(const SpatialComplex& c, OpName name, const Vec& u, const Vec& w);

// One-dimensional summation-by-parts pieces, exposed for tests and for the
// degenerate-chain constructions.
RMat sbp_derivative_1d(int cells, double length);
RVec sbp_weights_1d(int cells, double length);

}  // namespace tpem
