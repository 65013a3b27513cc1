#include "tpem/bdspace.hpp"

#include <algorithm>

namespace tpem {

BDSpace bd_space_raw(const HSpacePtr& parentL2, const LinOp& d, std::vector<Index> constrained,
                     const std::string& label, OpName op) {
  if (!same_space(d.src(), parentL2)) throw DimensionError("bd_space_raw: operator domain mismatch");
  std::sort(constrained.begin(), constrained.end());
  constrained.erase(std::unique(constrained.begin(), constrained.end()), constrained.end());
  const Index n = parentL2->dim();
  for (Index i : constrained)
    if (i < 0 || i >= n) throw PreconditionError("bd_space_raw: constrained index out of range");

  Mat gGraph = parentL2->gram() + blas_mul(d.mat().adjoint(), d.dst()->applyGram(d.mat()));
  auto parentGraph = HSpace::dense(std::move(gGraph), label + ":graph");

  const Index nb = Index(constrained.size());
  Mat eb = Mat::Zero(n, nb);
  for (Index j = 0; j < nb; ++j) eb(constrained[size_t(j)], j) = 1.0;

  Mat b0 = parentGraph->solveGram(eb);  // spans the complement
  Mat m = blas_mul(eb.adjoint(), b0);   // Gram of the spanning set
  Mat basis(n, nb);
  if (nb > 0) {
    Eigen::LLT<Mat> llt(Mat(0.5 * (m + m.adjoint().eval())));
    if (llt.info() != Eigen::Success)
      throw SingularError("bd_space_raw: complement spanning set is numerically dependent");
    // basis = b0 * L^{-H}
    Mat tmp = llt.matrixL().solve(b0.adjoint());
    basis = tmp.adjoint();
  }

  BDSpace bd;
  bd.op = op;
  bd.parentL2 = parentL2;
  bd.parentGraph = parentGraph;
  bd.space = HSpace::euclidean(nb, label);
  bd.basis = basis;
  bd.inject = LinOp(bd.space, parentGraph, basis);
  bd.project = adjoint(bd.inject);
  bd.traceFromL2 = LinOp(parentL2, bd.space, bd.project.mat());
  return bd;
}

BDSpace bd_space(const SpatialComplex& c, OpName op) {
  return bd_space_raw(c.domainOf(op), c.op(op), c.homog(op), "BD(" + to_string(op) + ")", op);
}

Vec bd_project(const BDSpace& bd, const Vec& u) {
  if (u.size() != bd.parentL2->dim()) throw DimensionError("bd_project: vector size mismatch");
  return bd.basis * (bd.project.mat() * u);
}

BdMapResult bd_map(const BDSpace& srcBD, const BDSpace& dstBD, const SpatialComplex& c) {
  const bool ok = (srcBD.op == OpName::Grad && dstBD.op == OpName::Div) ||
                  (srcBD.op == OpName::Div && dstBD.op == OpName::Grad) ||
                  (srcBD.op == OpName::Curl && dstBD.op == OpName::Curl) ||
                  (srcBD.op == OpName::SGrad && dstBD.op == OpName::SDiv) ||
                  (srcBD.op == OpName::SDiv && dstBD.op == OpName::SGrad);
  if (!ok)
    throw PreconditionError("bd_map: (" + to_string(srcBD.op) + "," + to_string(dstBD.op) +
                            ") is not an integration-by-parts pair");
  const LinOp& d = c.op(srcBD.op);
  LinOp op(srcBD.space, dstBD.space, blas_mul(dstBD.project.mat(), blas_mul(d.mat(), srcBD.basis)));
  double defect = 0.0;
  if (op.cols() > 0) {
    LinOp gram = adjoint(op) * op;
    defect = frobenius_norm(gram - LinOp::identity(srcBD.space));
  }
  return {std::move(op), defect};
}

double bd_ibp_residual(const SpatialComplex& c, const BDSpace& bdDivLike, const BDSpace& bdGradLike,
                       const Vec& bigU, const Vec& u) {
  OpName pairing;
  if (bdDivLike.op == OpName::Div && bdGradLike.op == OpName::Grad)
    pairing = OpName::Div;
  else if (bdDivLike.op == OpName::SDiv && bdGradLike.op == OpName::SGrad)
    pairing = OpName::SDiv;
  else if (bdDivLike.op == OpName::Curl && bdGradLike.op == OpName::Curl)
    pairing = OpName::Curl;
  else
    throw PreconditionError("bd_ibp_residual: not an integration-by-parts pair");
  if (bigU.size() != bdDivLike.parentL2->dim() || u.size() != bdGradLike.parentL2->dim())
    throw DimensionError("bd_ibp_residual: field size mismatch");
  Vec pU = bd_project(bdDivLike, bigU);
  Vec pu = bd_project(bdGradLike, u);
  Complex full = ibp_boundary_pairing(c, pairing, bigU, u);
  Complex projected = ibp_boundary_pairing(c, pairing, pU, pu);
  return std::abs(full - projected);
}

const BDSpace& BdSuite::of(OpName op) const {
  switch (op) {
    case OpName::Grad:
      return grad;
    case OpName::Div:
      return div;
    case OpName::Curl:
      return curl;
    case OpName::SGrad:
      return sgrad;
    default:
      return sdiv;
  }
}

BdSuite build_bd_suite(const SpatialComplex& c) {
  return {bd_space(c, OpName::Grad), bd_space(c, OpName::Div), bd_space(c, OpName::Curl),
          bd_space(c, OpName::SGrad), bd_space(c, OpName::SDiv)};
}

}  // namespace tpem
