#pragma once
// Block operators over ordered lists of HSpaces, plus the congruence
// toolkit (block permutations, symmetric Gauss steps, inertia) used to
// replay the well-posedness proof chain.

#include "tpem/linops.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace tpem {

class BlockOp {
 public:
  BlockOp() = default;
  BlockOp(std::vector<HSpacePtr> rowSpaces, std::vector<HSpacePtr> colSpaces);

  Index blockRows() const { return Index(rows_.size()); }
  Index blockCols() const { return Index(cols_.size()); }
  const std::vector<HSpacePtr>& rowSpaces() const { return rows_; }
  const std::vector<HSpacePtr>& colSpaces() const { return cols_; }

  // Absent entries are exact zero blocks.
  void set(Index i, Index j, LinOp op);
  void clear(Index i, Index j);
  const std::optional<LinOp>& at(Index i, Index j) const;
  bool present(Index i, Index j) const { return at(i, j).has_value(); }
  // The block as a LinOp, materializing zero when absent.
  LinOp block(Index i, Index j) const;

  bool squareStructure() const;
  Index totalRows() const;
  Index totalCols() const;
  Index rowOffset(Index i) const;
  Index colOffset(Index j) const;

  Vec apply(const Vec& x) const;

  // Single operator on the direct-sum spaces.
  LinOp flatten() const;
  HSpacePtr rowSum() const;
  HSpacePtr colSum() const;

  BlockOp adjointBlocks() const;
  BlockOp operator+(const BlockOp& o) const;
  BlockOp scaled(Complex c) const;
  // Blockwise (a + a*)/2 for square structure.
  BlockOp hermitianPart() const;

  // max over blocks of ||a_ij + adjoint(a_ji)|| (Gram-weighted Frobenius);
  // zero iff selfadjoint. Never materializes the flattened matrix.
  double selfadjointDefect() const;
  // max over blocks of ||a_ij + adjoint(a_ji)|| for skewness.
  double skewDefect() const;

 private:
  std::vector<HSpacePtr> rows_, cols_;
  std::vector<std::optional<LinOp>> blocks_;  // row-major
  std::vector<Index> rowOff_, colOff_;
};

BlockOp assemble_block(std::vector<HSpacePtr> rows, std::vector<HSpacePtr> cols,
                       const std::vector<std::tuple<Index, Index, LinOp>>& entries);

struct Inertia {
  Index nPlus = 0, nZero = 0, nMinus = 0;
  bool operator==(const Inertia&) const = default;
};

// Sign counts of a selfadjoint block operator w.r.t. tolerance 1e-10.
Inertia inertia(const BlockOp& a, double tol = 1e-10);

struct PermutationStep {
  std::vector<Index> perm;  // result block i is input block perm[i]
};
struct GaussStep {
  Index pivot;
  // Elimination factors X_j = a_pp^{-1} a_pj for j != pivot; the congruence
  // transform is S = I - sum_j E_{pivot,j} X_j and S^{-1} = I + sum_j E X_j.
  std::vector<std::pair<Index, LinOp>> factors;
};
struct CongruenceStep {
  std::variant<PermutationStep, GaussStep> action;
  Inertia inertiaAfter;
};

struct CongruenceLog {
  Inertia inertiaInitial;
  std::vector<CongruenceStep> steps;
  bool inertiaChecked = true;  // large systems may skip the eigenvalue count
  bool inertiaConstant() const {
    for (const auto& s : steps)
      if (s.inertiaAfter != inertiaInitial) return false;
    return true;
  }
};

// P* a P for a block permutation; entry (i,j) of the result is a(perm[i], perm[j]).
BlockOp permute_congruence(const BlockOp& a, const std::vector<Index>& perm);

struct GaussStepResult {
  BlockOp reduced;
  GaussStep step;
};

// Symmetric Gauss step: congruence eliminating the pivot block row/column.
// The remaining diagonal is the Schur complement a22 - a21 a11^{-1} a12.
// Requires a selfadjoint (to tolerance) and the pivot invertible: smallest
// |eigenvalue| > 1e-10 for selfadjoint pivots, smallest singular value
// > 1e-10 otherwise.
GaussStepResult gauss_step(const BlockOp& a, Index pivot);

// Successive Gauss steps over every diagonal block (in index order),
// producing a block-diagonal congruent operator.
BlockOp gauss_sweep(const BlockOp& a);

// Reconstruction of the original action from a reduced operator and the
// recorded step: returns S^{-H} reduced S^{-1} (exact because the Gauss
// transform is unipotent).
BlockOp gauss_expand(const BlockOp& reduced, const GaussStep& step);

// Connected components of the block-coupling graph (blocks with zero
// matrices count as absent). Sorted within and across components.
std::vector<std::vector<Index>> coupled_components(const BlockOp& a);

// The square sub-operator on a subset of the block indices.
BlockOp subblock(const BlockOp& a, const std::vector<Index>& keep);

}  // namespace tpem
