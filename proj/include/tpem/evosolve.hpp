#pragma once
// Assembly of the nine-slot evolutionary system (skew spatial operator,
// selfadjoint mass operator, impedance boundary rows) and its two solvers:
// a causal implicit-Euler stepper with an explicit integrator state for the
// boundary relaxation, and a weighted discrete Fourier-Laplace solver.

#include "tpem/bdspace.hpp"
#include "tpem/kernels.hpp"
#include "tpem/material.hpp"

#include <map>
#include <memory>

namespace tpem {

// The skew system operator from the three column operators
// (grad; trace), (curl; trace), (-Grad; trace) and their volume-Gram
// adjoints; exactly skew-adjoint blockwise.
BlockOp assemble_a(const SpatialComplex& c, const BdSuite& suite, const SystemLayout& layout);

struct EvoSystem {
  std::shared_ptr<const SpatialComplex> complex;
  std::shared_ptr<const BdSuite> suite;
  BoundaryTriple triple;
  MaterialData material;
  SystemLayout layout;
  BlockOp A;   // exactly skew
  BlockOp M0;  // exactly selfadjoint
  // trace maps entering the boundary rows
  LinOp traceV;      // S3 -> BD(Grad)
  LinOp traceE;      // V  -> BD(curl)
  LinOp traceTheta;  // S  -> BD(grad)
  bool hasBoundaryMemory() const { return triple.alphaB.maxAbs() > 0.0; }
};

EvoSystem make_system(std::shared_ptr<const SpatialComplex> c, std::shared_ptr<const BdSuite> suite,
                      MaterialData material, BoundaryTriple triple);

struct SourceTerm {
  double dt = 0.0;
  Index nSteps = 0;
  Index onset = 0;                    // first sample index with nonzero data
  std::map<int, Mat> slotSamples;     // slot -> dim x (nSteps+1)
  Vec forceAt(const SystemLayout& layout, Index step) const;
  bool isZero() const;
  bool isReal() const;
  double weightedNorm(const SystemLayout& layout, double nu) const;
};

SourceTerm zero_sources(double dt, Index nSteps);

// Compactly supported smooth pulse: zero before the onset step exactly,
// a bump of the given width (seconds) after it. The spatial profile is
// either all ones ("uniform") or a seeded random field ("random").
SourceTerm gaussian_pulse_source(const SystemLayout& layout, int slot, Index onsetStep, double width,
                                 double amplitude, const std::string& profile, uint64_t seed, double dt,
                                 Index nSteps);

struct TimeSeries {
  double dt = 0.0;
  double nu = 0.0;
  Index onset = 0;
  std::vector<Vec> states;   // full nine-slot states, index 0..nSteps
  std::vector<Vec> wStates;  // boundary integrator, empty for the frequency solver
  bool wraparoundWarning = false;
  double weightedStateNorm(const SystemLayout& layout) const;
};

struct SimulateOptions {
  const Certificate* certificate = nullptr;
  bool overrideCertificate = false;
};

// Causal implicit-Euler trajectory; one factorization per coupling
// component, reused across all steps.
TimeSeries simulate(const EvoSystem& sys, const SourceTerm& sources, double dt, double nu, Index nSteps,
                    const SimulateOptions& opts = {});

enum class FreqMethod { Auto, Direct, Hessenberg };
struct FreqOptions {
  Index padFactor = 4;
  FreqMethod method = FreqMethod::Auto;
  int threads = 0;  // 0 = use all hardware threads
  const Certificate* certificate = nullptr;
  bool overrideCertificate = false;
};

// Weighted discrete Fourier-Laplace solve on a padded horizon; the
// boundary rows enter in inverted (K) form, eliminated exactly per
// frequency.
TimeSeries freq_solve(const EvoSystem& sys, const SourceTerm& sources, double nu, Index nSteps,
                      const FreqOptions& opts = {});

// Frequency solve of a linear pencil (z E0 + E1) X(z) = F(z) for the
// Laplace transform of the sampled right-hand side; exposed for the scalar
// toy checks and the solver cross-validation tests.
struct PencilFreqResult {
  Mat solution;  // dim x (nSteps+1)
  bool wraparoundWarning = false;
};
PencilFreqResult freq_solve_pencil(const Mat& e0, const Mat& e1, const Mat& samples, double dt, double nu,
                                   Index padFactor, int threads, bool useHessenberg);

// Max state norm strictly before the onset index.
double check_causality(const TimeSeries& series, const SystemLayout& layout, Index onsetIndex);

// slack = ||F||_nu / (c ||U||_nu) - 1; +inf for a zero trajectory.
double check_norm_bound(const TimeSeries& series, const SourceTerm& sources, const SystemLayout& layout,
                        double c);

// Per-step norms of the three boundary-constraint residuals
// (tauT vs the induced trace of T, tauH vs H, tauQ vs q); diagnostic only.
struct ConstraintResidualSeries {
  std::vector<double> stress, magnetic, heat;
};
ConstraintResidualSeries constraint_residual(const TimeSeries& series, const EvoSystem& sys);

// Energy functional <U, M0 U> + <w, Re(alphaB) w> used by the dissipation
// checks; the boundary-memory term makes the implicit-Euler decay argument
// close when alphaB has nonnegative real part.
double energy_functional(const EvoSystem& sys, const Vec& state, const Vec& w);

}  // namespace tpem
