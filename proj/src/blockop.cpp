#include "tpem/blockop.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <map>
#include <cmath>

namespace tpem {

BlockOp::BlockOp(std::vector<HSpacePtr> rowSpaces, std::vector<HSpacePtr> colSpaces)
    : rows_(std::move(rowSpaces)), cols_(std::move(colSpaces)) {
  blocks_.resize(rows_.size() * cols_.size());
  rowOff_.resize(rows_.size() + 1, 0);
  colOff_.resize(cols_.size() + 1, 0);
  for (size_t i = 0; i < rows_.size(); ++i) rowOff_[i + 1] = rowOff_[i] + rows_[i]->dim();
  for (size_t j = 0; j < cols_.size(); ++j) colOff_[j + 1] = colOff_[j] + cols_[j]->dim();
}

void BlockOp::set(Index i, Index j, LinOp op) {
  if (i < 0 || i >= blockRows() || j < 0 || j >= blockCols()) throw DimensionError("BlockOp::set: index out of range");
  if (!same_space(op.src(), cols_[j]) || !same_space(op.dst(), rows_[i]))
    throw DimensionError("BlockOp::set: block spaces do not match the declared row/column spaces");
  blocks_[size_t(i * blockCols() + j)] = std::move(op);
}

void BlockOp::clear(Index i, Index j) { blocks_[size_t(i * blockCols() + j)].reset(); }

const std::optional<LinOp>& BlockOp::at(Index i, Index j) const {
  return blocks_[size_t(i * blockCols() + j)];
}

LinOp BlockOp::block(Index i, Index j) const {
  const auto& b = at(i, j);
  if (b) return *b;
  return LinOp::zero(cols_[j], rows_[i]);
}

bool BlockOp::squareStructure() const {
  if (rows_.size() != cols_.size()) return false;
  for (size_t i = 0; i < rows_.size(); ++i)
    if (!same_space(rows_[i], cols_[i])) return false;
  return true;
}

Index BlockOp::totalRows() const { return rowOff_.back(); }
Index BlockOp::totalCols() const { return colOff_.back(); }
Index BlockOp::rowOffset(Index i) const { return rowOff_[size_t(i)]; }
Index BlockOp::colOffset(Index j) const { return colOff_[size_t(j)]; }

Vec BlockOp::apply(const Vec& x) const {
  if (x.size() != totalCols()) throw DimensionError("BlockOp::apply: vector size mismatch");
  Vec y = Vec::Zero(totalRows());
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = 0; j < blockCols(); ++j) {
      const auto& b = at(i, j);
      if (b) y.segment(rowOff_[size_t(i)], rows_[size_t(i)]->dim()) += b->mat() * x.segment(colOff_[size_t(j)], cols_[size_t(j)]->dim());
    }
  return y;
}

LinOp BlockOp::flatten() const {
  Mat m = Mat::Zero(totalRows(), totalCols());
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = 0; j < blockCols(); ++j) {
      const auto& b = at(i, j);
      if (b) m.block(rowOff_[size_t(i)], colOff_[size_t(j)], rows_[size_t(i)]->dim(), cols_[size_t(j)]->dim()) = b->mat();
    }
  return LinOp(colSum(), rowSum(), std::move(m));
}

HSpacePtr BlockOp::rowSum() const { return HSpace::directSum(rows_, "rowsum"); }
HSpacePtr BlockOp::colSum() const { return HSpace::directSum(cols_, "colsum"); }

BlockOp BlockOp::adjointBlocks() const {
  BlockOp r(cols_, rows_);
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = 0; j < blockCols(); ++j)
      if (const auto& b = at(i, j)) r.set(j, i, adjoint(*b));
  return r;
}

BlockOp BlockOp::operator+(const BlockOp& o) const {
  if (blockRows() != o.blockRows() || blockCols() != o.blockCols())
    throw DimensionError("BlockOp::+: block structure mismatch");
  BlockOp r(rows_, cols_);
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = 0; j < blockCols(); ++j) {
      const auto& a = at(i, j);
      const auto& b = o.at(i, j);
      if (a && b)
        r.set(i, j, *a + *b);
      else if (a)
        r.set(i, j, *a);
      else if (b)
        r.set(i, j, *b);
    }
  return r;
}

BlockOp BlockOp::scaled(Complex c) const {
  BlockOp r(rows_, cols_);
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = 0; j < blockCols(); ++j)
      if (const auto& b = at(i, j)) r.set(i, j, b->scaled(c));
  return r;
}

BlockOp BlockOp::hermitianPart() const {
  if (!squareStructure()) throw ShapeError("BlockOp::hermitianPart: square block structure required");
  BlockOp r(rows_, cols_);
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = 0; j < blockCols(); ++j) {
      const auto& a = at(i, j);
      const auto& b = at(j, i);
      if (!a && !b) continue;
      LinOp s = (block(i, j) + adjoint(block(j, i))).scaled(0.5);
      r.set(i, j, std::move(s));
    }
  return r;
}

double BlockOp::selfadjointDefect() const {
  if (!squareStructure()) throw ShapeError("BlockOp::selfadjointDefect: square block structure required");
  double worst = 0.0;
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = i; j < blockCols(); ++j) {
      if (!present(i, j) && !present(j, i)) continue;
      worst = std::max(worst, frobenius_norm(block(i, j) - adjoint(block(j, i))));
    }
  return worst;
}

double BlockOp::skewDefect() const {
  if (!squareStructure()) throw ShapeError("BlockOp::skewDefect: square block structure required");
  double worst = 0.0;
  for (Index i = 0; i < blockRows(); ++i)
    for (Index j = i; j < blockCols(); ++j) {
      if (!present(i, j) && !present(j, i)) continue;
      worst = std::max(worst, frobenius_norm(block(i, j) + adjoint(block(j, i))));
    }
  return worst;
}

BlockOp assemble_block(std::vector<HSpacePtr> rows, std::vector<HSpacePtr> cols,
                       const std::vector<std::tuple<Index, Index, LinOp>>& entries) {
  BlockOp b(std::move(rows), std::move(cols));
  for (const auto& [i, j, op] : entries) b.set(i, j, op);
  return b;
}

Inertia inertia(const BlockOp& a, double tol) {
  if (!a.squareStructure()) throw ShapeError("inertia: square block structure required");
  LinOp f = a.flatten();
  if (frobenius_norm(f - adjoint(f)) > 1e-8 * std::max(1.0, frobenius_norm(f)))
    throw PreconditionError("inertia: operator is not selfadjoint");
  // Eigenvalues of the Hermitian part in Gram-orthonormal coordinates.
  const auto& s = f.src();
  Mat ao = s->mulFH(f.mat());
  Mat t = s->solveF(ao.adjoint()).adjoint();
  Mat h = 0.5 * (t + t.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  Inertia r;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    double l = es.eigenvalues()(i);
    if (l > tol)
      ++r.nPlus;
    else if (l < -tol)
      ++r.nMinus;
    else
      ++r.nZero;
  }
  return r;
}

BlockOp permute_congruence(const BlockOp& a, const std::vector<Index>& perm) {
  if (!a.squareStructure()) throw ShapeError("permute_congruence: square block structure required");
  const Index n = a.blockRows();
  if (Index(perm.size()) != n) throw PreconditionError("permute_congruence: permutation length mismatch");
  std::vector<bool> seen(size_t(n), false);
  for (Index p : perm) {
    if (p < 0 || p >= n || seen[size_t(p)]) throw PreconditionError("permute_congruence: invalid permutation");
    seen[size_t(p)] = true;
  }
  std::vector<HSpacePtr> spaces(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) spaces[size_t(i)] = a.rowSpaces()[size_t(perm[size_t(i)])];
  BlockOp r(spaces, spaces);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (const auto& b = a.at(perm[size_t(i)], perm[size_t(j)])) r.set(i, j, *b);
  return r;
}

namespace {

void check_pivot_invertible(const LinOp& pivot, Index index) {
  if (pivot.rows() == 0) throw SingularError("gauss_step: pivot block " + std::to_string(index) + " is empty");
  const double tol = 1e-10;
  Mat t = pivot.dst()->mulFH(pivot.mat());
  t = pivot.src()->solveF(t.adjoint()).adjoint();
  const bool selfadj = (t - t.adjoint()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, t.cwiseAbs().maxCoeff());
  if (selfadj) {
    Mat h = 0.5 * (t + t.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().cwiseAbs().minCoeff() <= tol)
      throw SingularError("gauss_step: selfadjoint pivot block " + std::to_string(index) + " is singular to tolerance");
  } else {
    Eigen::JacobiSVD<Mat> svd(t);
    if (svd.singularValues().tail(1)(0) <= tol)
      throw SingularError("gauss_step: pivot block " + std::to_string(index) + " is singular to tolerance");
  }
}

}  // namespace

GaussStepResult gauss_step(const BlockOp& a, Index pivot) {
  if (!a.squareStructure()) throw ShapeError("gauss_step: square block structure required");
  const Index n = a.blockRows();
  if (pivot < 0 || pivot >= n) throw PreconditionError("gauss_step: pivot index out of range");
  if (a.selfadjointDefect() > 1e-8) throw PreconditionError("gauss_step: operator is not selfadjoint");
  LinOp app = a.block(pivot, pivot);
  check_pivot_invertible(app, pivot);
  LinOp appInv = inverse(app);

  GaussStep step;
  step.pivot = pivot;
  BlockOp r(a.rowSpaces(), a.colSpaces());
  r.set(pivot, pivot, app);
  for (Index j = 0; j < n; ++j) {
    if (j == pivot || !a.present(pivot, j)) continue;
    step.factors.emplace_back(j, appInv * a.block(pivot, j));
  }
  for (Index i = 0; i < n; ++i) {
    if (i == pivot) continue;
    for (Index j = 0; j < n; ++j) {
      if (j == pivot) continue;
      const bool corr = a.present(i, pivot) && a.present(pivot, j);
      if (!a.present(i, j) && !corr) continue;
      LinOp v = a.block(i, j);
      if (corr) v = v - a.block(i, pivot) * (appInv * a.block(pivot, j));
      r.set(i, j, std::move(v));
    }
  }
  return {std::move(r), std::move(step)};
}

BlockOp gauss_sweep(const BlockOp& a) {
  BlockOp cur = a;
  for (Index p = 0; p < a.blockRows(); ++p) cur = gauss_step(cur, p).reduced;
  return cur;
}

BlockOp gauss_expand(const BlockOp& reduced, const GaussStep& step) {
  // S^{-1} = I + E with E the factors on the pivot row; a = S^{-H} a' S^{-1}.
  const Index n = reduced.blockRows();
  BlockOp sinv(reduced.rowSpaces(), reduced.colSpaces());
  for (Index i = 0; i < n; ++i) sinv.set(i, i, LinOp::identity(reduced.rowSpaces()[size_t(i)]));
  for (const auto& [j, x] : step.factors) sinv.set(step.pivot, j, x);
  LinOp s = sinv.flatten();
  LinOp ap = reduced.flatten();
  LinOp out = adjoint(s) * ap * s;
  // Repackage into the original block structure.
  BlockOp r(reduced.rowSpaces(), reduced.colSpaces());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      Mat blockm = out.mat().block(reduced.rowOffset(i), reduced.colOffset(j),
                                   reduced.rowSpaces()[size_t(i)]->dim(), reduced.colSpaces()[size_t(j)]->dim());
      r.set(i, j, LinOp(reduced.colSpaces()[size_t(j)], reduced.rowSpaces()[size_t(i)], std::move(blockm)));
    }
  return r;
}

std::vector<std::vector<Index>> coupled_components(const BlockOp& a) {
  if (!a.squareStructure()) throw ShapeError("coupled_components: square block structure required");
  const Index n = a.blockRows();
  std::vector<Index> parent(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) parent[size_t(i)] = i;
  std::function<Index(Index)> find = [&](Index x) {
    while (parent[size_t(x)] != x) x = parent[size_t(x)] = parent[size_t(parent[size_t(x)])];
    return x;
  };
  auto unite = [&](Index x, Index y) { parent[size_t(find(x))] = find(y); };
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && a.present(i, j) && a.at(i, j)->maxAbs() > 0.0) unite(i, j);
  std::map<Index, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<Index>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

BlockOp subblock(const BlockOp& a, const std::vector<Index>& keep) {
  std::vector<HSpacePtr> rows, cols;
  for (Index i : keep) rows.push_back(a.rowSpaces()[size_t(i)]);
  for (Index j : keep) cols.push_back(a.colSpaces()[size_t(j)]);
  BlockOp r(rows, cols);
  for (Index i = 0; i < Index(keep.size()); ++i)
    for (Index j = 0; j < Index(keep.size()); ++j)
      if (const auto& b = a.at(keep[size_t(i)], keep[size_t(j)])) r.set(i, j, *b);
  return r;
}

}  // namespace tpem
