#include "tpem/evosolve.hpp"

#include <cblas.h>
#include <fftw3.h>
#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace tpem {

BlockOp assemble_a(const SpatialComplex& c, const BdSuite& suite, const SystemLayout& layout) {
  BlockOp a(layout.spaceList(), layout.spaceList());
  // column operators: (-Grad; trace), (curl; trace), (grad; trace)
  LinOp mGrad = -c.sgrad;
  LinOp tV = suite.sgrad.traceFromL2;
  LinOp tE = suite.curl.traceFromL2;
  LinOp tTh = suite.grad.traceFromL2;
  a.set(SlotT, SlotV, mGrad);
  a.set(SlotTauT, SlotV, tV);
  a.set(SlotH, SlotE, c.curl);
  a.set(SlotTauH, SlotE, tE);
  a.set(SlotQ, SlotTheta, c.grad);
  a.set(SlotTauQ, SlotTheta, tTh);
  // upper blocks are the negated volume-Gram adjoints of the lower ones
  a.set(SlotV, SlotT, -adjoint(mGrad));
  a.set(SlotV, SlotTauT, -adjoint(tV));
  a.set(SlotE, SlotH, -adjoint(c.curl));
  a.set(SlotE, SlotTauH, -adjoint(tE));
  a.set(SlotTheta, SlotQ, -adjoint(c.grad));
  a.set(SlotTheta, SlotTauQ, -adjoint(tTh));
  return a;
}

EvoSystem make_system(std::shared_ptr<const SpatialComplex> c, std::shared_ptr<const BdSuite> suite,
                      MaterialData material, BoundaryTriple triple) {
  if (!same_space(triple.bdGradSym, suite->sgrad.space) || !same_space(triple.bdCurl, suite->curl.space) ||
      !same_space(triple.bdGradScalar, suite->grad.space))
    throw DimensionError("make_system: boundary triple does not live on the mesh boundary-data spaces");
  if (!same_space(material.spaces().S, c->S) || !same_space(material.spaces().V, c->V) ||
      !same_space(material.spaces().SYM, c->SYM) || !same_space(material.spaces().S3, c->S3))
    throw DimensionError("make_system: material data does not live on the mesh field spaces");
  EvoSystem sys{c,
                suite,
                std::move(triple),
                std::move(material),
                {},
                {},
                {},
                suite->sgrad.traceFromL2,
                suite->curl.traceFromL2,
                suite->grad.traceFromL2};
  sys.layout = make_layout(sys.material.spaces(), sys.triple);
  sys.A = assemble_a(*c, *suite, sys.layout);
  sys.M0 = assemble_m0(sys.material, sys.layout);
  return sys;
}

Vec SourceTerm::forceAt(const SystemLayout& layout, Index step) const {
  Vec f = layout.zeroState();
  for (const auto& [slot, samples] : slotSamples)
    f.segment(layout.offset(slot), layout.dimOf(slot)) = samples.col(step);
  return f;
}

bool SourceTerm::isZero() const {
  for (const auto& [slot, samples] : slotSamples)
    if (samples.cwiseAbs().maxCoeff() > 0.0) return false;
  return true;
}

bool SourceTerm::isReal() const {
  for (const auto& [slot, samples] : slotSamples)
    if (samples.imag().cwiseAbs().maxCoeff() != 0.0) return false;
  return true;
}

double SourceTerm::weightedNorm(const SystemLayout& layout, double nu) const {
  double acc = 0.0;
  for (Index j = 0; j <= nSteps; ++j) {
    double w = (j == 0 || j == nSteps) ? 0.5 * dt : dt;
    double n2 = 0.0;
    for (const auto& [slot, samples] : slotSamples) {
      double n = layout.spaces[size_t(slot)]->norm(samples.col(j));
      n2 += n * n;
    }
    acc += w * std::exp(-2.0 * nu * double(j) * dt) * n2;
  }
  return std::sqrt(acc);
}

SourceTerm zero_sources(double dt, Index nSteps) {
  SourceTerm s;
  s.dt = dt;
  s.nSteps = nSteps;
  s.onset = 0;
  return s;
}

SourceTerm gaussian_pulse_source(const SystemLayout& layout, int slot, Index onsetStep, double width,
                                 double amplitude, const std::string& profile, uint64_t seed, double dt,
                                 Index nSteps) {
  if (slot < 0 || slot >= kSlotCount) throw ConfigError("pulse source: slot index out of range");
  if (onsetStep < 0 || onsetStep > nSteps) throw ConfigError("pulse source: onset outside the horizon");
  if (!(width > 0.0)) throw ConfigError("pulse source: width must be positive");
  const Index dim = layout.dimOf(slot);
  Vec shape;
  if (profile == "uniform") {
    shape = Vec::Constant(dim, Complex(1.0, 0.0));
  } else if (profile == "random") {
    Rng rng(seed);
    shape = randn_vec(dim, rng, false);
    shape /= layout.spaces[size_t(slot)]->norm(shape);
  } else {
    throw ConfigError("pulse source: unknown profile '" + profile + "'");
  }
  Mat samples = Mat::Zero(dim, nSteps + 1);
  const double t0 = double(onsetStep) * dt;
  for (Index j = onsetStep; j <= nSteps; ++j) {
    // compactly supported bump on (t0, t0 + 2 width), identically zero outside
    double s = (double(j) * dt - t0 - width) / width;
    if (s <= -1.0 || s >= 1.0) continue;
    double bump = std::exp(1.0 - 1.0 / (1.0 - s * s));
    samples.col(j) = amplitude * bump * shape;
  }
  SourceTerm src;
  src.dt = dt;
  src.nSteps = nSteps;
  src.onset = onsetStep;
  src.slotSamples[slot] = std::move(samples);
  for (Index j = 0; j < onsetStep; ++j)
    if (src.slotSamples[slot].col(j).cwiseAbs().maxCoeff() != 0.0)
      throw Error("pulse source: samples before the onset must vanish exactly");
  return src;
}

double TimeSeries::weightedStateNorm(const SystemLayout& layout) const {
  double acc = 0.0;
  for (size_t j = 0; j < states.size(); ++j) {
    double w = (j == 0 || j + 1 == states.size()) ? 0.5 * dt : dt;
    double n = layout.stateNorm(states[j]);
    acc += w * std::exp(-2.0 * nu * double(j) * dt) * n * n;
  }
  return std::sqrt(acc);
}


namespace {

// repeated y = M x with a real fast path (two dgemv calls on re/im)
struct FastApply {
  bool real = false;
  RMat mr;
  Mat mc;
  Index rows = 0, cols = 0;
  static FastApply make(const Mat& m) {
    FastApply f;
    f.rows = m.rows();
    f.cols = m.cols();
    f.real = is_real_matrix(m);
    if (f.real)
      f.mr = m.real();
    else
      f.mc = m;
    return f;
  }
  void accumulate(Vec& y, const Vec& x) const {
    if (rows == 0 || cols == 0) return;
    if (real) {
      RVec xr = x.real(), xi = x.imag();
      RVec yr = RVec::Zero(rows), yi = RVec::Zero(rows);
      cblas_dgemv(CblasColMajor, CblasNoTrans, int(rows), int(cols), 1.0, mr.data(), int(rows), xr.data(), 1,
                  0.0, yr.data(), 1);
      cblas_dgemv(CblasColMajor, CblasNoTrans, int(rows), int(cols), 1.0, mr.data(), int(rows), xi.data(), 1,
                  0.0, yi.data(), 1);
      for (Index i = 0; i < rows; ++i) y[i] += Complex(yr[i], yi[i]);
      return;
    }
    const Complex one(1.0, 0.0);
    Vec t = Vec::Zero(rows);
    cblas_zgemv(CblasColMajor, CblasNoTrans, int(rows), int(cols), &one, mc.data(), int(rows), x.data(), 1,
                &one, t.data(), 1);
    y += t;
  }
};

}  // namespace

namespace {

constexpr int kWSlot = kSlotCount;  // extended index of the boundary integrator

struct ExtendedBlocks {
  std::array<std::array<Mat, kSlotCount + 1>, kSlotCount + 1> step;  // coefficient of X_n
  std::array<std::array<Mat, kSlotCount>, kSlotCount> m0dt;          // M0/dt blocks for the recursion
  std::array<Index, kSlotCount + 1> dims{};
  bool hasW = false;

  bool has(Index r, Index c) const { return step[size_t(r)][size_t(c)].size() > 0; }
};

void add_block(Mat& dst, const Mat& src) {
  if (dst.size() == 0)
    dst = src;
  else
    dst += src;
}

// Builds the implicit-Euler step blocks: interior rows carry
// M0/dt + sigma/kappa0^{-1} + A, the boundary rows carry the pre-inverted
// impedance block plus the integrator coupling, the integrator row closes
// the memory recursion.
ExtendedBlocks build_step_blocks(const EvoSystem& sys, double dt) {
  ExtendedBlocks b;
  const auto& layout = sys.layout;
  for (int i = 0; i < kSlotCount; ++i) b.dims[size_t(i)] = layout.dimOf(i);
  b.hasW = sys.hasBoundaryMemory();
  b.dims[size_t(kWSlot)] = b.hasW ? sys.triple.bdGradSym->dim() : 0;

  const int interior[6] = {SlotV, SlotT, SlotE, SlotH, SlotTheta, SlotQ};
  for (int r : interior)
    for (int c = 0; c < kSlotCount; ++c) {
      Mat m;
      if (sys.M0.present(r, c)) {
        Mat m0 = sys.M0.at(r, c)->mat() / dt;
        b.m0dt[size_t(r)][size_t(c)] = m0;
        add_block(m, m0);
      }
      if (sys.A.present(r, c)) add_block(m, sys.A.at(r, c)->mat());
      if (r == SlotE && c == SlotE && sys.material.sigma.maxAbs() > 0.0) add_block(m, sys.material.sigma.mat());
      if (r == SlotQ && c == SlotQ && sys.material.kappa0Inv.maxAbs() > 0.0)
        add_block(m, sys.material.kappa0Inv.mat());
      if (m.size() > 0) b.step[size_t(r)][size_t(c)] = std::move(m);
    }

  const auto& t = sys.triple;
  const Mat pv = sys.traceV.mat();
  const Mat pe = sys.traceE.mat();
  const Mat pth = sys.traceTheta.mat();
  auto eye = [](Index n) { return Mat::Identity(n, n); };

  // tauT row: tauT + P v + alphaB w - Q S (P E) + Q beta (P theta) = 0
  b.step[SlotTauT][SlotTauT] = eye(layout.dimOf(SlotTauT));
  b.step[SlotTauT][SlotV] = pv;
  if (b.hasW) b.step[SlotTauT][kWSlot] = t.alphaB.mat();
  {
    Mat qs = t.Q.mat() * t.S.mat();
    if (qs.size() && qs.cwiseAbs().maxCoeff() > 0.0) b.step[SlotTauT][SlotE] = -(qs * pe);
    Mat qb = t.Q.mat() * t.beta.mat();
    if (qb.size() && qb.cwiseAbs().maxCoeff() > 0.0) b.step[SlotTauT][SlotTheta] = qb * pth;
  }
  // tauH row: tauH - S Q* (P v) + P E + beta (P theta) = 0
  b.step[SlotTauH][SlotTauH] = eye(layout.dimOf(SlotTauH));
  b.step[SlotTauH][SlotE] = pe;
  {
    Mat sq = t.S.mat() * t.Q.mat().adjoint();
    if (sq.size() && sq.cwiseAbs().maxCoeff() > 0.0) b.step[SlotTauH][SlotV] = -(sq * pv);
    if (t.beta.maxAbs() > 0.0) b.step[SlotTauH][SlotTheta] = t.beta.mat() * pth;
  }
  // tauQ row: tauQ - beta* Q* (P v) - beta* (P E) + P theta = 0
  b.step[SlotTauQ][SlotTauQ] = eye(layout.dimOf(SlotTauQ));
  b.step[SlotTauQ][SlotTheta] = pth;
  {
    Mat bq = t.beta.mat().adjoint() * t.Q.mat().adjoint();
    if (bq.size() && bq.cwiseAbs().maxCoeff() > 0.0) b.step[SlotTauQ][SlotV] = -(bq * pv);
    if (t.beta.maxAbs() > 0.0) b.step[SlotTauQ][SlotE] = -(t.beta.mat().adjoint() * pe);
  }
  // integrator row: w - dt (P v) = w_prev
  if (b.hasW) {
    b.step[kWSlot][kWSlot] = eye(b.dims[size_t(kWSlot)]);
    b.step[kWSlot][SlotV] = -dt * pv;
  }
  return b;
}

std::vector<std::vector<Index>> extended_components(const ExtendedBlocks& b) {
  const Index n = kSlotCount + (b.hasW ? 1 : 0);
  std::vector<Index> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), Index(0));
  std::function<Index(Index)> find = [&](Index x) {
    while (parent[size_t(x)] != x) x = parent[size_t(x)] = parent[size_t(parent[size_t(x)])];
    return x;
  };
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      if (r != c && b.has(r, c) && b.step[size_t(r)][size_t(c)].cwiseAbs().maxCoeff() > 0.0)
        parent[size_t(find(r))] = find(c);
  std::map<Index, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<Index>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

struct ComponentSystem {
  std::vector<Index> slots;           // extended slot ids, ascending
  std::vector<Index> offsets;         // offsets inside the component vector
  Index dim = 0;
  Index offsetOf(Index slot) const {
    for (size_t i = 0; i < slots.size(); ++i)
      if (slots[i] == slot) return offsets[i];
    throw Error("component: slot not present");
  }
  bool contains(Index slot) const {
    return std::find(slots.begin(), slots.end(), slot) != slots.end();
  }
};

ComponentSystem make_component(const std::vector<Index>& slots, const std::array<Index, kSlotCount + 1>& dims) {
  ComponentSystem c;
  c.slots = slots;
  c.offsets.resize(slots.size());
  Index at = 0;
  for (size_t i = 0; i < slots.size(); ++i) {
    c.offsets[i] = at;
    at += dims[size_t(slots[i])];
  }
  c.dim = at;
  return c;
}

Mat assemble_component_matrix(const ExtendedBlocks& b, const ComponentSystem& comp) {
  Mat m = Mat::Zero(comp.dim, comp.dim);
  for (size_t i = 0; i < comp.slots.size(); ++i)
    for (size_t j = 0; j < comp.slots.size(); ++j) {
      const Mat& blk = b.step[size_t(comp.slots[i])][size_t(comp.slots[j])];
      if (blk.size() > 0) m.block(comp.offsets[i], comp.offsets[j], blk.rows(), blk.cols()) = blk;
    }
  return m;
}

}  // namespace

TimeSeries simulate(const EvoSystem& sys, const SourceTerm& sources, double dt, double nu, Index nSteps,
                    const SimulateOptions& opts) {
  if (!(dt > 0.0)) throw PreconditionError("simulate: dt must be positive");
  if (std::abs(sources.dt - dt) > 1e-15 * std::max(1.0, dt))
    throw PreconditionError("simulate: source sampling grid does not match dt");
  if (sources.nSteps < nSteps) throw PreconditionError("simulate: sources cover fewer steps than requested");
  if (!opts.overrideCertificate) {
    if (opts.certificate == nullptr)
      throw PreconditionError("simulate: no certificate supplied (pass overrideCertificate to proceed)");
    if (!opts.certificate->accepted)
      throw PreconditionError("simulate: certificate rejected the data");
    if (nu < opts.certificate->nuMin - 1e-12)
      throw PreconditionError("simulate: nu is below the certified nu_min");
  }

  const auto& layout = sys.layout;
  ExtendedBlocks blocks = build_step_blocks(sys, dt);
  auto componentSlots = extended_components(blocks);

  struct FactoredComponent {
    ComponentSystem comp;
    FastApply inv;    // step-matrix inverse, applied once per step
    FastApply m0dt;   // M0/dt recursion restricted to the component
  };
  std::vector<FactoredComponent> comps;
  for (const auto& slots : componentSlots) {
    ComponentSystem comp = make_component(slots, blocks.dims);
    if (comp.dim == 0) continue;
    Mat m = assemble_component_matrix(blocks, comp);
    Mat inv;
    try {
      DenseLU lu = DenseLU::factor(m);
      inv = lu.solveMany(Mat::Identity(comp.dim, comp.dim));
    } catch (const SingularError& err) {
      throw SingularError(std::string("simulate: step matrix is singular (") + err.what() +
                          "); the certificate gate was " +
                          (opts.overrideCertificate ? "overridden" : "active"));
    }
    Mat rec = Mat::Zero(comp.dim, comp.dim);
    for (size_t i = 0; i < comp.slots.size(); ++i) {
      Index r = comp.slots[i];
      if (r >= kSlotCount) continue;
      for (size_t j = 0; j < comp.slots.size(); ++j) {
        Index c = comp.slots[j];
        if (c >= kSlotCount) continue;
        const Mat& blk = blocks.m0dt[size_t(r)][size_t(c)];
        if (blk.size() > 0) rec.block(comp.offsets[i], comp.offsets[j], blk.rows(), blk.cols()) = blk;
      }
    }
    comps.push_back({std::move(comp), FastApply::make(inv), FastApply::make(rec)});
  }

  const Index wDim = sys.triple.bdGradSym->dim();
  TimeSeries out;
  out.dt = dt;
  out.nu = nu;
  out.onset = sources.onset;
  out.states.assign(size_t(nSteps) + 1, layout.zeroState());
  out.wStates.assign(size_t(nSteps) + 1, Vec::Zero(wDim));

  const Mat pv = sys.traceV.mat();
  Vec f = layout.zeroState();
  for (Index n = 1; n <= nSteps; ++n) {
    f.setZero();
    for (const auto& [slot, samples] : sources.slotSamples)
      f.segment(layout.offset(slot), layout.dimOf(slot)) = samples.col(n);
    const Vec& prev = out.states[size_t(n - 1)];
    Vec& cur = out.states[size_t(n)];
    for (const auto& fc : comps) {
      Vec rhs = Vec::Zero(fc.comp.dim);
      Vec prevComp = Vec::Zero(fc.comp.dim);
      for (size_t i = 0; i < fc.comp.slots.size(); ++i) {
        Index slot = fc.comp.slots[i];
        if (slot == kWSlot) {
          rhs.segment(fc.comp.offsets[i], wDim) = out.wStates[size_t(n - 1)];
          continue;
        }
        prevComp.segment(fc.comp.offsets[i], layout.dimOf(int(slot))) =
            prev.segment(layout.offset(int(slot)), layout.dimOf(int(slot)));
        if (slot == SlotTauT || slot == SlotTauH || slot == SlotTauQ) continue;  // algebraic rows
        rhs.segment(fc.comp.offsets[i], layout.dimOf(int(slot))) =
            f.segment(layout.offset(int(slot)), layout.dimOf(int(slot)));
      }
      fc.m0dt.accumulate(rhs, prevComp);
      Vec x = Vec::Zero(fc.comp.dim);
      fc.inv.accumulate(x, rhs);
      if (!x.allFinite()) throw Error("simulate: non-finite state at step " + std::to_string(n));
      for (size_t i = 0; i < fc.comp.slots.size(); ++i) {
        Index slot = fc.comp.slots[i];
        if (slot == kWSlot)
          out.wStates[size_t(n)] = x.segment(fc.comp.offsets[i], wDim);
        else
          cur.segment(layout.offset(int(slot)), layout.dimOf(int(slot))) =
              x.segment(fc.comp.offsets[i], layout.dimOf(int(slot)));
      }
    }
    if (!blocks.hasW && wDim > 0)
      out.wStates[size_t(n)] =
          out.wStates[size_t(n - 1)] + dt * (pv * cur.segment(layout.offset(SlotV), layout.dimOf(SlotV)));
  }
  return out;
}

namespace {

// One forward/backward DFT pass over the rows of a (channels x npad) buffer.
void fft_rows(Mat& buf, bool inverse) {
  const Index npad = buf.cols();
  if (npad == 0 || buf.rows() == 0) return;
  Vec scratchIn(npad), scratchOut(npad);
  fftw_plan plan = fftw_plan_dft_1d(int(npad), reinterpret_cast<fftw_complex*>(scratchIn.data()),
                                    reinterpret_cast<fftw_complex*>(scratchOut.data()),
                                    inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  for (Index r = 0; r < buf.rows(); ++r) {
    scratchIn = buf.row(r).transpose();
    fftw_execute(plan);
    buf.row(r) = scratchOut.transpose();
  }
  fftw_destroy_plan(plan);
  if (inverse) buf /= double(npad);
}

}  // namespace

PencilFreqResult freq_solve_pencil(const Mat& e0, const Mat& e1, const Mat& samples, double dt, double nu,
                                   Index padFactor, int threads, bool useHessenberg) {
  if (e0.rows() != e0.cols() || e1.rows() != e1.cols() || e0.rows() != e1.rows())
    throw ShapeError("freq_solve_pencil: square pencil required");
  if (samples.rows() != e0.rows()) throw DimensionError("freq_solve_pencil: sample row mismatch");
  const Index dim = e0.rows();
  const Index nt = samples.cols();
  const Index npad = next_pow2(std::max<Index>(4, padFactor) * nt);
  if (threads <= 0) threads = omp_get_max_threads();

  Mat buf = Mat::Zero(dim, npad);
  for (Index j = 0; j < nt; ++j) buf.col(j) = samples.col(j) * std::exp(-nu * double(j) * dt);
  fft_rows(buf, false);

  const bool realData = e0.imag().cwiseAbs().maxCoeff() == 0.0 && e1.imag().cwiseAbs().maxCoeff() == 0.0 &&
                        samples.imag().cwiseAbs().maxCoeff() == 0.0;
  const Index kMax = realData ? npad / 2 : npad - 1;

  auto xiOf = [&](Index k) {
    double kk = (k <= npad / 2) ? double(k) : double(k) - double(npad);
    return 2.0 * M_PI * kk / (double(npad) * dt);
  };

  // bins whose transformed data is numerically negligible contribute
  // nothing beyond round-off; skip them (their solution stays zero)
  std::vector<Index> kept;
  {
    double maxNorm = 0.0;
    for (Index k = 0; k <= kMax; ++k) maxNorm = std::max(maxNorm, buf.col(k).norm());
    for (Index k = 0; k <= kMax; ++k)
      if (buf.col(k).norm() > 1e-13 * maxNorm) kept.push_back(k);
  }
  if (useHessenberg) {
    DenseLU e0lu = DenseLU::factor(e0);
    Mat g = e0lu.solveMany(e1);
    HessenbergReduction hess = HessenbergReduction::reduce(g);
    const Index chunk = 768;
    for (Index c0 = 0; c0 < Index(kept.size()); c0 += chunk) {
      const Index cn = std::min(Index(kept.size()) - c0, chunk);
      Mat gathered(dim, cn);
      for (Index i = 0; i < cn; ++i) gathered.col(i) = buf.col(kept[size_t(c0 + i)]);
      Mat rhs = hess.applyQH(e0lu.solveMany(gathered));
      Mat sol(dim, cn);
      parallel_for(cn, threads, [&](Index i) {
        sol.col(i) = hess.shiftedSolve(Complex(nu, xiOf(kept[size_t(c0 + i)])), rhs.col(i));
      });
      Mat back = hess.applyQ(sol);
      for (Index i = 0; i < cn; ++i) buf.col(kept[size_t(c0 + i)]) = back.col(i);
    }
    for (Index k = 0; k <= kMax; ++k)
      if (!std::binary_search(kept.begin(), kept.end(), k)) buf.col(k).setZero();
  } else {
    parallel_for(kMax + 1, threads, [&](Index k) {
      Mat m = e1;
      m += Complex(nu, xiOf(k)) * e0;
      buf.col(k) = m.partialPivLu().solve(buf.col(k).eval());
    });
  }
  if (realData)
    for (Index k = npad / 2 + 1; k < npad; ++k) buf.col(k) = buf.col(npad - k).conjugate();

  fft_rows(buf, true);
  // wrap-around detector on the weighted solution: energy in the padding tail
  double tail = 0.0, total = 0.0;
  const Index tailStart = std::max(nt, npad - npad / 8);
  for (Index j = 0; j < npad; ++j) {
    double n2 = buf.col(j).squaredNorm();
    total += n2;
    if (j >= tailStart) tail += n2;
  }
  PencilFreqResult out;
  // genuine wraparound leaves order-one trailing energy; spectral truncation
  // of rough sources stays orders of magnitude below this threshold
  out.wraparoundWarning = total > 0.0 && tail > 1e-4 * total;
  out.solution.resize(dim, nt);
  for (Index j = 0; j < nt; ++j) out.solution.col(j) = buf.col(j) * std::exp(nu * double(j) * dt);
  return out;
}

TimeSeries freq_solve(const EvoSystem& sys, const SourceTerm& sources, double nu, Index nSteps,
                      const FreqOptions& opts) {
  const double dt = sources.dt;
  if (!(dt > 0.0)) throw PreconditionError("freq_solve: sources carry no grid");
  if (sources.nSteps < nSteps) throw PreconditionError("freq_solve: sources cover fewer steps than requested");
  if (!opts.overrideCertificate) {
    if (opts.certificate == nullptr)
      throw PreconditionError("freq_solve: no certificate supplied (pass overrideCertificate to proceed)");
    if (!opts.certificate->accepted) throw PreconditionError("freq_solve: certificate rejected the data");
    if (nu < opts.certificate->nuMin - 1e-12)
      throw PreconditionError("freq_solve: nu is below the certified nu_min");
  }
  if (!(nu > sys.triple.alphaNorm()))
    throw PreconditionError("freq_solve: require nu > ||alphaB|| for the inverted boundary block");
  int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();

  const auto& layout = sys.layout;
  const Index nt = nSteps + 1;
  const Index npad = next_pow2(std::max<Index>(4, opts.padFactor) * nt);
  ExtendedBlocks blocks = build_step_blocks(sys, dt);  // reused for the coupling graph only
  auto componentSlots = extended_components(blocks);

  bool realData = sources.isReal() && is_real_matrix(sys.triple.Q.mat()) &&
                  is_real_matrix(sys.triple.beta.mat()) && is_real_matrix(sys.triple.alphaB.mat()) &&
                  is_real_matrix(sys.triple.S.mat()) && is_real_matrix(sys.material.sigma.mat()) &&
                  is_real_matrix(sys.material.kappa0Inv.mat());
  for (Index i = 0; realData && i < kSlotCount; ++i)
    for (Index j = 0; realData && j < kSlotCount; ++j) {
      if (sys.M0.present(i, j)) realData = realData && is_real_matrix(sys.M0.at(i, j)->mat());
      if (sys.A.present(i, j)) realData = realData && is_real_matrix(sys.A.at(i, j)->mat());
    }
  const Index kMax = realData ? npad / 2 : npad - 1;
  auto xiOf = [&](Index k) {
    double kk = (k <= npad / 2) ? double(k) : double(k) - double(npad);
    return 2.0 * M_PI * kk / (double(npad) * dt);
  };

  TimeSeries out;
  out.dt = dt;
  out.nu = nu;
  out.onset = sources.onset;
  out.states.assign(size_t(nSteps) + 1, layout.zeroState());

  const int interior[6] = {SlotV, SlotT, SlotE, SlotH, SlotTheta, SlotQ};
  const auto& t = sys.triple;
  const Mat pv = sys.traceV.mat();
  const Mat pe = sys.traceE.mat();
  const Mat pth = sys.traceTheta.mat();

  const bool wantHessenberg = opts.method != FreqMethod::Direct;

  for (const auto& slots : componentSlots) {
    // split the component into interior unknowns, boundary slots, integrator
    std::vector<Index> interiorSlots, tauSlots;
    bool hasW = false;
    for (Index s : slots) {
      if (s == kWSlot)
        hasW = true;
      else if (s == SlotTauT || s == SlotTauH || s == SlotTauQ)
        tauSlots.push_back(s);
      else
        interiorSlots.push_back(s);
    }
    if (interiorSlots.empty()) continue;

    // reduced unknown: interior slots then the integrator
    std::vector<Index> red = interiorSlots;
    if (hasW) red.push_back(kWSlot);
    ComponentSystem comp = make_component(red, blocks.dims);
    const Index wOff = hasW ? comp.offsetOf(kWSlot) : -1;
    const Index wDim = hasW ? blocks.dims[size_t(kWSlot)] : 0;

    Mat e0 = Mat::Zero(comp.dim, comp.dim);
    Mat e1 = Mat::Zero(comp.dim, comp.dim);
    for (Index s : interiorSlots) {
      const Index ro = comp.offsetOf(s);
      for (Index c : interiorSlots) {
        const Index co = comp.offsetOf(c);
        if (sys.M0.present(int(s), int(c)))
          e0.block(ro, co, layout.dimOf(int(s)), layout.dimOf(int(c))) = sys.M0.at(int(s), int(c))->mat();
        if (sys.A.present(int(s), int(c)))
          e1.block(ro, co, layout.dimOf(int(s)), layout.dimOf(int(c))) += sys.A.at(int(s), int(c))->mat();
      }
      if (s == SlotE && sys.material.sigma.maxAbs() > 0.0)
        e1.block(ro, comp.offsetOf(SlotE), layout.dimOf(SlotE), layout.dimOf(SlotE)) += sys.material.sigma.mat();
      if (s == SlotQ && sys.material.kappa0Inv.maxAbs() > 0.0)
        e1.block(ro, comp.offsetOf(SlotQ), layout.dimOf(SlotQ), layout.dimOf(SlotQ)) +=
            sys.material.kappa0Inv.mat();
    }
    if (hasW) {
      e0.block(wOff, wOff, wDim, wDim) = Mat::Identity(wDim, wDim);
      e1.block(wOff, comp.offsetOf(SlotV), wDim, layout.dimOf(SlotV)) = -pv;
    }
    // exact elimination of the boundary rows into the interior ones
    auto addElim = [&](Index rowSlot, const Mat& lift, Index colSlot, const Mat& coeff) {
      e1.block(comp.offsetOf(rowSlot), comp.offsetOf(colSlot), lift.rows(), coeff.cols()) += lift * coeff;
    };
    for (Index s : tauSlots) {
      if (s == SlotTauT) {
        Mat lift = -sys.A.at(SlotV, SlotTauT)->mat();  // +adjoint of the velocity trace
        addElim(SlotV, lift, SlotV, pv);
        Mat qs = t.Q.mat() * t.S.mat();
        if (qs.size() && qs.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotE)) addElim(SlotV, lift, SlotE, Mat(-(qs * pe)));
        Mat qb = t.Q.mat() * t.beta.mat();
        if (qb.size() && qb.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotTheta))
          addElim(SlotV, lift, SlotTheta, Mat(qb * pth));
        if (hasW) e1.block(comp.offsetOf(SlotV), wOff, lift.rows(), wDim) += lift * t.alphaB.mat();
      } else if (s == SlotTauH) {
        Mat lift = -sys.A.at(SlotE, SlotTauH)->mat();
        addElim(SlotE, lift, SlotE, pe);
        Mat sq = t.S.mat() * t.Q.mat().adjoint();
        if (sq.size() && sq.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotV)) addElim(SlotE, lift, SlotV, Mat(-(sq * pv)));
        if (t.beta.maxAbs() > 0.0 && comp.contains(SlotTheta))
          addElim(SlotE, lift, SlotTheta, Mat(t.beta.mat() * pth));
      } else {
        Mat lift = -sys.A.at(SlotTheta, SlotTauQ)->mat();
        addElim(SlotTheta, lift, SlotTheta, pth);
        Mat bq = t.beta.mat().adjoint() * t.Q.mat().adjoint();
        if (bq.size() && bq.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotV)) addElim(SlotTheta, lift, SlotV, Mat(-(bq * pv)));
        if (t.beta.maxAbs() > 0.0 && comp.contains(SlotE))
          addElim(SlotTheta, lift, SlotE, Mat(-(t.beta.mat().adjoint() * pe)));
      }
    }

    // weighted source transform restricted to the component
    Mat buf = Mat::Zero(comp.dim, npad);
    bool anySource = false;
    for (Index s : interiorSlots) {
      auto it = sources.slotSamples.find(int(s));
      if (it == sources.slotSamples.end()) continue;
      anySource = true;
      for (Index j = 0; j < nt; ++j)
        buf.block(comp.offsetOf(s), j, layout.dimOf(int(s)), 1) =
            it->second.col(j) * std::exp(-nu * double(j) * dt);
    }
    Mat tauBuf = Mat::Zero(std::accumulate(tauSlots.begin(), tauSlots.end(), Index(0),
                                           [&](Index a, Index s) { return a + layout.dimOf(int(s)); }),
                           npad);
    if (!anySource) continue;  // zero forcing keeps this component identically zero
    fft_rows(buf, false);

    bool hessenberg = wantHessenberg;
    DenseLU e0lu;
    HessenbergReduction hess;
    if (hessenberg) {
      try {
        e0lu = DenseLU::factor(e0);
        hess = HessenbergReduction::reduce(e0lu.solveMany(e1));
      } catch (const SingularError&) {
        if (opts.method == FreqMethod::Hessenberg)
          throw SingularError("freq_solve: the mass block of a component is singular; use the direct method");
        hessenberg = false;  // degenerate mass block: per-frequency direct solves
      }
    }

    // negligible source bins keep an exactly zero solution column
    std::vector<Index> kept;
    {
      double maxNorm = 0.0;
      for (Index k = 0; k <= kMax; ++k) maxNorm = std::max(maxNorm, buf.col(k).norm());
      for (Index k = 0; k <= kMax; ++k)
        if (buf.col(k).norm() > 1e-13 * maxNorm) kept.push_back(k);
    }
    const Index chunk = 768;
    for (Index c0 = 0; c0 < Index(kept.size()); c0 += chunk) {
      const Index cn = std::min(Index(kept.size()) - c0, chunk);
      Mat gathered(comp.dim, cn);
      for (Index i = 0; i < cn; ++i) gathered.col(i) = buf.col(kept[size_t(c0 + i)]);
      Mat back(comp.dim, cn);
      if (hessenberg) {
        Mat rhs = hess.applyQH(e0lu.solveMany(gathered));
        Mat sol(comp.dim, cn);
        parallel_for(cn, threads, [&](Index i) {
          sol.col(i) = hess.shiftedSolve(Complex(nu, xiOf(kept[size_t(c0 + i)])), rhs.col(i));
        });
        back = hess.applyQ(sol);
      } else {
        parallel_for(cn, threads, [&](Index i) {
          Mat m = e1 + Complex(nu, xiOf(kept[size_t(c0 + i)])) * e0;
          back.col(i) = m.partialPivLu().solve(gathered.col(i).eval());
        });
      }
      for (Index i = 0; i < cn; ++i) buf.col(kept[size_t(c0 + i)]) = back.col(i);
    }
    for (Index k = 0; k <= kMax; ++k)
      if (!std::binary_search(kept.begin(), kept.end(), k)) buf.col(k).setZero();

    // boundary data recovered from the inverted block, batched over the
    // populated bins (zero solution bins keep zero boundary data)
    {
      Mat fieldCols[kSlotCount + 1];
      auto gather = [&](Index slot) -> const Mat& {
        Mat& m = fieldCols[size_t(slot)];
        if (m.size() == 0) {
          const Index off = slot == kWSlot ? wOff : comp.offsetOf(slot);
          const Index dim = slot == kWSlot ? wDim : layout.dimOf(int(slot));
          m.resize(dim, Index(kept.size()));
          for (Index i = 0; i < Index(kept.size()); ++i) m.col(i) = buf.block(off, kept[size_t(i)], dim, 1);
        }
        return m;
      };
      Index tOff = 0;
      for (Index s : tauSlots) {
        const Index tdim = layout.dimOf(int(s));
        Mat acc = Mat::Zero(tdim, Index(kept.size()));
        if (s == SlotTauT) {
          acc += blas_mul(pv, gather(SlotV));
          if (hasW) acc += blas_mul(t.alphaB.mat(), gather(kWSlot));
          Mat qs = t.Q.mat() * t.S.mat();
          if (qs.size() && qs.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotE))
            acc -= blas_mul(qs, blas_mul(pe, gather(SlotE)));
          Mat qb = t.Q.mat() * t.beta.mat();
          if (qb.size() && qb.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotTheta))
            acc += blas_mul(qb, blas_mul(pth, gather(SlotTheta)));
        } else if (s == SlotTauH) {
          acc += blas_mul(pe, gather(SlotE));
          Mat sq = t.S.mat() * t.Q.mat().adjoint();
          if (sq.size() && sq.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotV))
            acc -= blas_mul(sq, blas_mul(pv, gather(SlotV)));
          if (t.beta.maxAbs() > 0.0 && comp.contains(SlotTheta))
            acc += blas_mul(t.beta.mat(), blas_mul(pth, gather(SlotTheta)));
        } else {
          acc += blas_mul(pth, gather(SlotTheta));
          Mat bq = t.beta.mat().adjoint() * t.Q.mat().adjoint();
          if (bq.size() && bq.cwiseAbs().maxCoeff() > 0.0 && comp.contains(SlotV))
            acc -= blas_mul(bq, blas_mul(pv, gather(SlotV)));
          if (t.beta.maxAbs() > 0.0 && comp.contains(SlotE))
            acc -= blas_mul(t.beta.mat().adjoint(), blas_mul(pe, gather(SlotE)));
        }
        for (Index i = 0; i < Index(kept.size()); ++i) tauBuf.block(tOff, kept[size_t(i)], tdim, 1) = -acc.col(i);
        tOff += tdim;
      }
    }

    if (realData) {
      for (Index k = npad / 2 + 1; k < npad; ++k) {
        buf.col(k) = buf.col(npad - k).conjugate();
        if (tauBuf.rows() > 0) tauBuf.col(k) = tauBuf.col(npad - k).conjugate();
      }
    }
    fft_rows(buf, true);
    if (tauBuf.rows() > 0) fft_rows(tauBuf, true);

    double tail = 0.0, total = 0.0;
    const Index tailStart = std::max(nt, npad - npad / 8);
    for (Index j = 0; j < npad; ++j) {
      double n2 = buf.col(j).squaredNorm();
      total += n2;
      if (j >= tailStart) tail += n2;
    }
    if (total > 0.0 && tail > 1e-4 * total) out.wraparoundWarning = true;

    for (Index j = 0; j < nt; ++j) {
      const double unweight = std::exp(nu * double(j) * dt);
      for (Index s : interiorSlots)
        out.states[size_t(j)].segment(layout.offset(int(s)), layout.dimOf(int(s))) =
            unweight * buf.block(comp.offsetOf(s), j, layout.dimOf(int(s)), 1);
      Index tOff = 0;
      for (Index s : tauSlots) {
        out.states[size_t(j)].segment(layout.offset(int(s)), layout.dimOf(int(s))) =
            unweight * tauBuf.block(tOff, j, layout.dimOf(int(s)), 1);
        tOff += layout.dimOf(int(s));
      }
    }
  }
  return out;
}

double check_causality(const TimeSeries& series, const SystemLayout& layout, Index onsetIndex) {
  double worst = 0.0;
  for (Index j = 0; j < onsetIndex && j < Index(series.states.size()); ++j)
    worst = std::max(worst, layout.stateNorm(series.states[size_t(j)]));
  return worst;
}

double check_norm_bound(const TimeSeries& series, const SourceTerm& sources, const SystemLayout& layout,
                        double c) {
  if (!(c > 0.0)) throw PreconditionError("check_norm_bound: require c > 0");
  double u = series.weightedStateNorm(layout);
  double f = sources.weightedNorm(layout, series.nu);
  if (u == 0.0) return std::numeric_limits<double>::infinity();
  return f / (c * u) - 1.0;
}

ConstraintResidualSeries constraint_residual(const TimeSeries& series, const EvoSystem& sys) {
  const auto& layout = sys.layout;
  const auto& suite = *sys.suite;
  const auto& c = *sys.complex;
  LinOp divBD = bd_map(suite.sdiv, suite.sgrad, c).op;    // BD(Div) -> BD(Grad)
  LinOp curlBD = bd_map(suite.curl, suite.curl, c).op;    // BD(curl) -> BD(curl)
  LinOp divScalarBD = bd_map(suite.div, suite.grad, c).op;  // BD(div) -> BD(grad)
  ConstraintResidualSeries out;
  for (const Vec& state : series.states) {
    Vec tt = state.segment(layout.offset(SlotT), layout.dimOf(SlotT));
    Vec th = state.segment(layout.offset(SlotH), layout.dimOf(SlotH));
    Vec tq = state.segment(layout.offset(SlotQ), layout.dimOf(SlotQ));
    Vec tauT = state.segment(layout.offset(SlotTauT), layout.dimOf(SlotTauT));
    Vec tauH = state.segment(layout.offset(SlotTauH), layout.dimOf(SlotTauH));
    Vec tauQ = state.segment(layout.offset(SlotTauQ), layout.dimOf(SlotTauQ));
    out.stress.push_back((tauT - divBD.mat() * (suite.sdiv.traceFromL2.mat() * tt)).norm());
    out.magnetic.push_back((tauH - curlBD.mat() * (suite.curl.traceFromL2.mat() * th)).norm());
    out.heat.push_back((tauQ + divScalarBD.mat() * (suite.div.traceFromL2.mat() * tq)).norm());
  }
  return out;
}

double energy_functional(const EvoSystem& sys, const Vec& state, const Vec& w) {
  const auto& layout = sys.layout;
  Vec m0u = sys.M0.apply(state);
  double acc = 0.0;
  Index at = 0;
  for (const auto& sp : layout.spaces) {
    acc += std::real(sp->inner(state.segment(at, sp->dim()), m0u.segment(at, sp->dim())));
    at += sp->dim();
  }
  if (w.size() > 0 && sys.triple.alphaB.maxAbs() > 0.0)
    acc += std::real(w.dot(real_part(sys.triple.alphaB).mat() * w));
  return acc;
}

}  // namespace tpem
