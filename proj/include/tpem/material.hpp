#pragma once
// Material data, the selfadjoint operator M0 and the frequency-dependent
// M1(z) of the nine-slot system, the Schur operators of the well-posedness
// theorem, the congruence-chain replay and the certificate machinery.

#include "tpem/blockop.hpp"
#include "tpem/impedance.hpp"

#include <array>
#include <optional>

namespace tpem {

// Slot order of the nine-component state
//   (v, T, tauT, E, H, tauH, theta, q, tauQ)
// where theta stands for the relative temperature unknown.
enum Slot : int {
  SlotV = 0,
  SlotT = 1,
  SlotTauT = 2,
  SlotE = 3,
  SlotH = 4,
  SlotTauH = 5,
  SlotTheta = 6,
  SlotQ = 7,
  SlotTauQ = 8
};
constexpr int kSlotCount = 9;
const char* slot_name(int slot);

struct FieldSpaces {
  HSpacePtr S, V, SYM, S3;
};
FieldSpaces synthetic_field_spaces(Index dimS, Index dimV, Index dimSym, Index dimS3);
FieldSpaces field_spaces_of(const SpatialComplex& c);

struct SystemLayout {
  std::array<HSpacePtr, kSlotCount> spaces;
  std::vector<HSpacePtr> spaceList() const { return {spaces.begin(), spaces.end()}; }
  Index dim() const;
  Index offset(int slot) const;
  Index dimOf(int slot) const { return spaces[size_t(slot)]->dim(); }
  Vec zeroState() const { return Vec::Zero(dim()); }
  double stateNorm(const Vec& full) const;
};
SystemLayout make_layout(const FieldSpaces& f, const BoundaryTriple& t);

struct MaterialData {
  LinOp rhoStar;               // S3 -> S3, density
  LinOp cel;                   // SYM -> SYM, elasticity tensor
  LinOp e;                     // V -> SYM, piezoelectric coupling
  LinOp lambda;                // S -> SYM, thermal stress coupling
  LinOp p;                     // S -> V, pyroelectric coupling
  LinOp eps, mu, sigma;        // V -> V
  LinOp theta0, theta0Inv;     // S -> S, reference temperature and inverse
  LinOp gamma0;                // S -> S, theta0 times the heat capacity factor
  LinOp kappa0Inv, kappa1;     // V -> V, heat flux law coefficients
  LinOp celInv;                // cached inverse of cel

  const FieldSpaces& spaces() const { return spaces_; }
  FieldSpaces spaces_;
};

// Validates invariants (selfadjointness residuals, rho* and C positive,
// invertibility of C and theta0) and caches the inverses.
MaterialData make_material(FieldSpaces f, LinOp rhoStar, LinOp cel, LinOp e, LinOp lambda, LinOp p,
                           LinOp eps, LinOp mu, LinOp sigma, LinOp theta0, LinOp gamma0, LinOp kappa0Inv,
                           LinOp kappa1);

// rho* = C = eps = mu = gamma0 = kappa1 = kappa0^{-1} = theta0 = 1,
// sigma = e = lambda = p = 0.
MaterialData decoupled_unit_material(const FieldSpaces& f);

// One-dimensional sample with C=2, e=1, lambda=1, p=0.5, theta0=1, eps=1,
// mu=3, gamma0=2, rho*=1, sigma=0, kappa's=1.
MaterialData scalar_sample_material();

struct RandomMaterialOptions {
  double couplingScale = 0.25;
  bool complexEntries = true;
  bool withSigma = true;
  int maxShrinks = 12;
};
// Seeded admissible dataset: selfadjoint positive main coefficients and
// couplings shrunk until every theorem hypothesis holds with margin.
MaterialData random_admissible_material(const FieldSpaces& f, uint64_t seed, RandomMaterialOptions opts = {});

// The selfadjoint operator of the time-derivative term, following the
// nine-slot display literally (the T-pair couples to the H-pair through
// C^{-1} e, the tau rows and columns stay empty).
BlockOp assemble_m0(const MaterialData& d, const SystemLayout& layout);

// sigma at the E slot, kappa0^{-1} at the q slot, the K coefficients at the
// tau slots, everything else zero.
BlockOp assemble_m1(const MaterialData& d, const BoundaryTriple& t, const FrequencyPoint& z,
                    const SystemLayout& layout);

// True iff the only populated blocks of m1 are the ones the display allows.
bool m1_pattern_matches(const BlockOp& m1);

struct FluxInput {
  std::optional<Vec> gradU;  // SYM element (symmetrized displacement gradient)
  Vec electric;              // V
  Vec magnetic;              // V
  Vec thetaRel;              // S, relative temperature
};
struct FluxOutput {
  Vec magneticFlux;          // B = mu H
  std::optional<Vec> displacementFlux;  // D, needs gradU unless e = 0
  std::optional<Vec> entropy;           // eta, needs gradU unless lambda = 0
  bool partial = false;
};
FluxOutput reconstruct_fluxes(const MaterialData& d, const FluxInput& in);

struct SchurOperators {
  LinOp muMinus;  // mu - e* C^{-1} e
  LinOp m55;      // gamma0 - theta0 lambda* C^{-1} e (mu - e* C^{-1} e)^{-1} e* C^{-1} lambda theta0
  LinOp m44;      // eps + e* C^{-1} e - Y m55^{-1} Y*,  Y = p theta0 + e* C^{-1} lambda theta0
};
SchurOperators schur_m44_m55(const MaterialData& d);

// Effective permittivity at which m44 vanishes identically (the limit case
// the permuted chain is built to accommodate).
LinOp eddy_current_epsilon(const MaterialData& d);

struct EddyGamma {
  LinOp gamma0Prime;
  // The non-permuted elimination needs eps + e* C^{-1} e invertible, so the
  // degenerate limit eps = -e* C^{-1} e is excluded on that route.
  bool excludesEddyLimit = true;
  double epsPlusMinSingular = 0.0;
};
EddyGamma eddy_gamma0_prime(const MaterialData& d);

struct ChainOptions {
  bool checkInertia = true;
  Index inertiaMaxDim = 800;  // beyond this the eigenvalue count is skipped
};
struct ChainResult {
  BlockOp finalOp;       // fully reduced block operator (permuted order)
  LinOp muMinus, m44, m55;  // nu-normalized diagonal blocks, sigma removed
  CongruenceLog log;
  std::vector<std::string> stepNames;
};
// Replays the proof's chain on nu*M0 + Re M1(z): global permutation,
// Gauss step on the stress block, second permutation, Gauss steps on the
// magnetic and thermal blocks. Pivot failures name the violated hypothesis.
ChainResult congruence_chain(const MaterialData& d, const BoundaryTriple& t, double nu,
                             const FrequencyPoint& z, ChainOptions opts = {});

struct CertifyParams {
  double nuStart = 0.5;
  int maxDoublings = 60;
  double tol = 1e-10;
  bool refineBisection = true;
  ChainOptions chain{};
};

struct ConditionMargin {
  std::string name;
  double margin;
  bool pass;
};

struct Certificate {
  bool accepted = false;
  double nuMin = 0.0;
  double c = 0.0;  // min positivity constant of nu M0 + Re M1(z) over the z samples
  double alphaNorm = 0.0;
  std::vector<ConditionMargin> conditions;  // margins at nuMin (or the last attempt)
  std::vector<Complex> zSamples;
  CongruenceLog chain;
  std::vector<std::string> chainStepNames;
  bool chainChecked = false;
  double chainDiagResidual = 0.0;  // final diagonal vs the Schur formulas
  bool directRouteConsistent = false;  // c > 0 whenever the conditions pass
  std::string failureReason;
  CertifyParams params;
};

// Sufficient-condition search (geometric in nu with bisection refinement)
// plus the direct spectral route on the declared z-sample grid.
Certificate certify(const MaterialData& d, const BoundaryTriple& t, const CertifyParams& params = {});

// Positivity constant of nu M0 + Re M1(z), evaluated per coupling component
// so block-decoupled systems stay cheap.
double direct_positivity(const MaterialData& d, const BoundaryTriple& t, const FrequencyPoint& z,
                         const SystemLayout& layout);

std::string certificate_to_json(const Certificate& cert);

}  // namespace tpem
