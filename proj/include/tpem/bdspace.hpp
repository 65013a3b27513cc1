#pragma once
// Discrete abstract boundary data spaces: graph-orthogonal complements of
// the homogeneous subspace of each spatial operator, with the injection,
// the induced projector, and the boundary-data maps between them.

#include "tpem/linops.hpp"
#include "tpem/mesh.hpp"

namespace tpem {

struct BDSpace {
  OpName op = OpName::Grad;
  HSpacePtr parentL2;     // operator domain with the volume Gram
  HSpacePtr parentGraph;  // same coordinates with the graph Gram <u,v> + <Du,Dv>
  HSpacePtr space;        // the boundary data space; coordinates are
                          // graph-orthonormal, so its Gram is euclidean
  Mat basis;              // parent coordinates of the basis columns
  LinOp inject;           // space -> parentGraph (the embedding iota)
  LinOp project;          // parentGraph -> space (iota*)
  LinOp traceFromL2;      // same matrix as project, typed on the volume-Gram
                          // parent; its adjoint is the one entering the
                          // skew system operator

  Index dim() const { return space->dim(); }
};

// Graph-orthogonal complement of the coordinate subspace that vanishes on
// `constrained`. Exposed raw so degenerate chains and synthetic parents can
// be built in tests.
BDSpace bd_space_raw(const HSpacePtr& parentL2, const LinOp& d, std::vector<Index> constrained,
                     const std::string& label, OpName op = OpName::Grad);

BDSpace bd_space(const SpatialComplex& c, OpName op);

// iota iota* u in parent coordinates.
Vec bd_project(const BDSpace& bd, const Vec& u);

struct BdMapResult {
  LinOp op;                // iota*_dst . D . iota_src
  double unitarityDefect;  // ||(D_BD)* D_BD - 1||, diagnostic only
};

// Induced boundary-data operator for the integration-by-parts pairs
// (grad,div), (div,grad), (curl,curl), (Grad,Div), (Div,Grad).
BdMapResult bd_map(const BDSpace& srcBD, const BDSpace& dstBD, const SpatialComplex& c);

// Residual of the two-projection integration-by-parts identity: the full
// volume pairing minus the same pairing evaluated on the projected pair.
// U lives in the domain of the div-type operator, u in the domain of its
// dual. Expected at round-off level for every pair.
double bd_ibp_residual(const SpatialComplex& c, const BDSpace& bdDivLike, const BDSpace& bdGradLike,
                       const Vec& bigU, const Vec& u);

// The five boundary-data spaces of one spatial complex.
struct BdSuite {
  BDSpace grad, div, curl, sgrad, sdiv;
  const BDSpace& of(OpName op) const;
};
BdSuite build_bd_suite(const SpatialComplex& c);

}  // namespace tpem
