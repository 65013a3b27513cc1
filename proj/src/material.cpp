#include "tpem/material.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace tpem {

const char* slot_name(int slot) {
  static const char* names[kSlotCount] = {"v", "T", "tauT", "E", "H", "tauH", "theta", "q", "tauQ"};
  return names[slot];
}

FieldSpaces synthetic_field_spaces(Index dimS, Index dimV, Index dimSym, Index dimS3) {
  return {HSpace::euclidean(dimS, "S:syn"), HSpace::euclidean(dimV, "V:syn"),
          HSpace::euclidean(dimSym, "SYM:syn"), HSpace::euclidean(dimS3, "S3:syn")};
}

FieldSpaces field_spaces_of(const SpatialComplex& c) { return {c.S, c.V, c.SYM, c.S3}; }

Index SystemLayout::dim() const {
  Index d = 0;
  for (const auto& s : spaces) d += s->dim();
  return d;
}

Index SystemLayout::offset(int slot) const {
  Index at = 0;
  for (int i = 0; i < slot; ++i) at += spaces[size_t(i)]->dim();
  return at;
}

double SystemLayout::stateNorm(const Vec& full) const {
  double s2 = 0.0;
  Index at = 0;
  for (const auto& sp : spaces) {
    double n = sp->norm(full.segment(at, sp->dim()));
    s2 += n * n;
    at += sp->dim();
  }
  return std::sqrt(s2);
}

SystemLayout make_layout(const FieldSpaces& f, const BoundaryTriple& t) {
  SystemLayout l;
  l.spaces = {f.S3, f.SYM, t.bdGradSym, f.V, f.V, t.bdCurl, f.S, f.V, t.bdGradScalar};
  return l;
}

namespace {

void require_selfadjoint(const LinOp& a, const std::string& name) {
  double scale = std::max(1.0, frobenius_norm(a));
  if (frobenius_norm(a - adjoint(a)) > 1e-12 * scale)
    throw PreconditionError("make_material: " + name + " must be selfadjoint");
}

}  // namespace

MaterialData make_material(FieldSpaces f, LinOp rhoStar, LinOp cel, LinOp e, LinOp lambda, LinOp p,
                           LinOp eps, LinOp mu, LinOp sigma, LinOp theta0, LinOp gamma0, LinOp kappa0Inv,
                           LinOp kappa1) {
  require_selfadjoint(rhoStar, "rho*");
  require_selfadjoint(cel, "C");
  require_selfadjoint(eps, "eps");
  require_selfadjoint(mu, "mu");
  require_selfadjoint(gamma0, "gamma0");
  if (positivity_constant(rhoStar) <= 0.0) throw PreconditionError("make_material: rho* must be positive definite");
  if (positivity_constant(cel) <= 0.0) throw PreconditionError("make_material: C must be positive definite");
  MaterialData d;
  d.spaces_ = std::move(f);
  d.celInv = inverse(cel);
  LinOp theta0Inv = inverse(theta0);
  d.rhoStar = std::move(rhoStar);
  d.cel = std::move(cel);
  d.e = std::move(e);
  d.lambda = std::move(lambda);
  d.p = std::move(p);
  d.eps = std::move(eps);
  d.mu = std::move(mu);
  d.sigma = std::move(sigma);
  d.theta0 = std::move(theta0);
  d.theta0Inv = std::move(theta0Inv);
  d.gamma0 = std::move(gamma0);
  d.kappa0Inv = std::move(kappa0Inv);
  d.kappa1 = std::move(kappa1);
  return d;
}

MaterialData decoupled_unit_material(const FieldSpaces& f) {
  return make_material(f, LinOp::identity(f.S3), LinOp::identity(f.SYM), LinOp::zero(f.V, f.SYM),
                       LinOp::zero(f.S, f.SYM), LinOp::zero(f.S, f.V), LinOp::identity(f.V),
                       LinOp::identity(f.V), LinOp::zero(f.V, f.V), LinOp::identity(f.S),
                       LinOp::identity(f.S), LinOp::identity(f.V), LinOp::identity(f.V));
}

MaterialData scalar_sample_material() {
  FieldSpaces f = synthetic_field_spaces(1, 1, 1, 1);
  auto c = [&](const HSpacePtr& src, const HSpacePtr& dst, double v) {
    return LinOp(src, dst, v * Mat::Ones(1, 1));
  };
  return make_material(f, c(f.S3, f.S3, 1.0), c(f.SYM, f.SYM, 2.0), c(f.V, f.SYM, 1.0), c(f.S, f.SYM, 1.0),
                       c(f.S, f.V, 0.5), c(f.V, f.V, 1.0), c(f.V, f.V, 3.0), c(f.V, f.V, 0.0),
                       c(f.S, f.S, 1.0), c(f.S, f.S, 2.0), c(f.V, f.V, 1.0), c(f.V, f.V, 1.0));
}

MaterialData random_admissible_material(const FieldSpaces& f, uint64_t seed, RandomMaterialOptions opts) {
  Rng rng(seed);
  const bool cx = opts.complexEntries;
  LinOp rho = random_spd(f.S3, rng, 0.5, cx);
  LinOp cel = random_spd(f.SYM, rng, 0.8, cx);
  LinOp eps = random_spd(f.V, rng, 0.4, cx);
  LinOp mu = random_spd(f.V, rng, 0.8, cx);
  LinOp gamma0 = random_spd(f.S, rng, 0.6, cx);
  LinOp kappa1 = random_spd(f.V, rng, 0.5, cx);
  LinOp kappa0Inv = random_spd(f.V, rng, 0.5, cx);
  LinOp theta0 = random_spd(f.S, rng, 0.5, cx);
  LinOp sigma = opts.withSigma ? random_spd(f.V, rng, 0.1, cx) + random_skew(f.V, rng, cx).scaled(0.3)
                               : LinOp::zero(f.V, f.V);
  LinOp e0 = random_op(f.V, f.SYM, rng, cx);
  LinOp l0 = random_op(f.S, f.SYM, rng, cx);
  LinOp p0 = random_op(f.S, f.V, rng, cx);

  double s = opts.couplingScale / std::sqrt(double(std::max<Index>(1, f.SYM->dim())));
  for (int attempt = 0; attempt <= opts.maxShrinks; ++attempt, s *= 0.5) {
    MaterialData d = make_material(f, rho, cel, e0.scaled(s), l0.scaled(s), p0.scaled(s), eps, mu, sigma,
                                   theta0, gamma0, kappa0Inv, kappa1);
    try {
      SchurOperators so = schur_m44_m55(d);
      // m44 must stay nonnegative-definite, otherwise no nu satisfies the
      // nu*m44 + sigma hypothesis
      if (positivity_constant(so.muMinus) > 1e-8 && positivity_constant(so.m55) > 1e-8 &&
          positivity_constant(so.m44) > 1e-8)
        return d;
    } catch (const SingularError&) {
    }
  }
  throw Error("random_admissible_material: could not shrink couplings into the admissible range");
}

BlockOp assemble_m0(const MaterialData& d, const SystemLayout& layout) {
  BlockOp m0(layout.spaceList(), layout.spaceList());
  // Hermitian parts on the diagonal and mirrored adjoints off it keep the
  // assembled operator selfadjoint bit for bit (real_part and adjoint are
  // exact involutions on these spaces).
  m0.set(SlotV, SlotV, real_part(d.rhoStar));
  m0.set(SlotT, SlotT, real_part(d.celInv));
  LinOp tH = d.celInv * d.e;
  LinOp tTheta = d.celInv * (d.lambda * d.theta0);
  LinOp eTheta = d.p * d.theta0 + adjoint(d.e) * tTheta;
  m0.set(SlotT, SlotH, tH);
  m0.set(SlotT, SlotTheta, tTheta);
  m0.set(SlotE, SlotE, real_part(d.eps + adjoint(d.e) * (d.celInv * d.e)));
  m0.set(SlotE, SlotTheta, eTheta);
  m0.set(SlotH, SlotH, real_part(d.mu));
  m0.set(SlotTheta, SlotTheta, real_part(d.gamma0 + d.theta0 * (adjoint(d.lambda) * tTheta)));
  m0.set(SlotQ, SlotQ, real_part(d.kappa1));
  m0.set(SlotH, SlotT, adjoint(tH));
  m0.set(SlotTheta, SlotT, adjoint(tTheta));
  m0.set(SlotTheta, SlotE, adjoint(eTheta));
  return m0;
}

BlockOp assemble_m1(const MaterialData& d, const BoundaryTriple& t, const FrequencyPoint& z,
                    const SystemLayout& layout) {
  BlockOp m1(layout.spaceList(), layout.spaceList());
  if (d.sigma.maxAbs() > 0.0) m1.set(SlotE, SlotE, d.sigma);
  if (d.kappa0Inv.maxAbs() > 0.0) m1.set(SlotQ, SlotQ, d.kappa0Inv);
  BlockOp k = k_matrix_formulas(t, z);
  const int tau[3] = {SlotTauT, SlotTauH, SlotTauQ};
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      LinOp b = k.block(i, j);
      if (i == j || b.maxAbs() > 0.0) m1.set(tau[i], tau[j], std::move(b));
    }
  return m1;
}

bool m1_pattern_matches(const BlockOp& m1) {
  auto isTau = [](Index i) { return i == SlotTauT || i == SlotTauH || i == SlotTauQ; };
  for (Index i = 0; i < m1.blockRows(); ++i)
    for (Index j = 0; j < m1.blockCols(); ++j) {
      if (!m1.present(i, j) || m1.at(i, j)->maxAbs() == 0.0) continue;
      const bool allowed = (i == SlotE && j == SlotE) || (i == SlotQ && j == SlotQ) || (isTau(i) && isTau(j));
      if (!allowed) return false;
    }
  for (Index s : {Index(SlotTauT), Index(SlotTauH), Index(SlotTauQ)})
    if (!m1.present(s, s)) return false;
  return true;
}

FluxOutput reconstruct_fluxes(const MaterialData& d, const FluxInput& in) {
  FluxOutput out;
  out.magneticFlux = d.mu.apply(in.magnetic);
  Vec theta = d.theta0.apply(in.thetaRel);
  const bool needGradForD = d.e.maxAbs() > 0.0;
  const bool needGradForEta = d.lambda.maxAbs() > 0.0;
  if (in.gradU || !needGradForD) {
    Vec dd = d.eps.apply(in.electric) + d.p.apply(theta);
    if (in.gradU) dd += adjoint(d.e).apply(*in.gradU);
    out.displacementFlux = std::move(dd);
  }
  if (in.gradU || !needGradForEta) {
    Vec eta = adjoint(d.p).apply(in.electric) + (d.theta0Inv * d.gamma0).apply(in.thetaRel);
    if (in.gradU) eta += adjoint(d.lambda).apply(*in.gradU);
    out.entropy = std::move(eta);
  }
  out.partial = !out.displacementFlux.has_value() || !out.entropy.has_value();
  return out;
}

SchurOperators schur_m44_m55(const MaterialData& d) {
  LinOp eCe = adjoint(d.e) * (d.celInv * d.e);
  LinOp muMinus = d.mu - eCe;
  LinOp x = adjoint(d.e) * (d.celInv * (d.lambda * d.theta0));  // e* C^{-1} lambda theta0 : S -> V
  LinOp muMinusInv;
  try {
    muMinusInv = inverse(muMinus);
  } catch (const SingularError&) {
    throw SingularError("schur_m44_m55: mu - e* C^{-1} e is singular");
  }
  LinOp m55 = d.gamma0 - adjoint(x) * (muMinusInv * x);
  LinOp y = d.p * d.theta0 + x;  // S -> V
  LinOp m55Inv;
  try {
    m55Inv = inverse(m55);
  } catch (const SingularError&) {
    throw SingularError("schur_m44_m55: m0_55 is singular");
  }
  LinOp m44 = d.eps + eCe - y * (m55Inv * adjoint(y));
  return {std::move(muMinus), std::move(m55), std::move(m44)};
}

LinOp eddy_current_epsilon(const MaterialData& d) {
  LinOp eCe = adjoint(d.e) * (d.celInv * d.e);
  LinOp x = adjoint(d.e) * (d.celInv * (d.lambda * d.theta0));
  LinOp muMinusInv = inverse(d.mu - eCe);
  LinOp m55 = d.gamma0 - adjoint(x) * (muMinusInv * x);
  LinOp y = d.p * d.theta0 + x;
  LinOp eps = y * (inverse(m55) * adjoint(y)) - eCe;
  return real_part(eps);
}

EddyGamma eddy_gamma0_prime(const MaterialData& d) {
  LinOp eCe = adjoint(d.e) * (d.celInv * d.e);
  LinOp x = adjoint(d.e) * (d.celInv * (d.lambda * d.theta0));
  LinOp y = d.p * d.theta0 + x;
  LinOp muMinus = d.mu - eCe;
  LinOp epsPlus = d.eps + eCe;
  LinOp muMinusInv, epsPlusInv;
  try {
    muMinusInv = inverse(muMinus);
  } catch (const SingularError&) {
    throw SingularError("eddy_gamma0_prime: mu - e* C^{-1} e is singular");
  }
  try {
    epsPlusInv = inverse(epsPlus);
  } catch (const SingularError&) {
    throw SingularError("eddy_gamma0_prime: eps + e* C^{-1} e is singular");
  }
  EddyGamma out{d.gamma0 - adjoint(x) * (muMinusInv * x) - adjoint(y) * (epsPlusInv * y), true, 0.0};
  Eigen::JacobiSVD<Mat> svd(epsPlus.mat());
  out.epsPlusMinSingular = svd.singularValues().size() ? svd.singularValues().tail(1)(0) : 0.0;
  return out;
}

ChainResult congruence_chain(const MaterialData& d, const BoundaryTriple& t, double nu,
                             const FrequencyPoint& z, ChainOptions opts) {
  if (!(nu > 0.0)) throw PreconditionError("congruence_chain: require nu > 0");
  SystemLayout layout = make_layout(d.spaces(), t);
  BlockOp m0 = assemble_m0(d, layout);
  BlockOp m1 = assemble_m1(d, t, z, layout);
  BlockOp w = m0.scaled(nu) + m1.hermitianPart();

  ChainResult r;
  const bool doInertia = opts.checkInertia && w.totalRows() <= opts.inertiaMaxDim;
  r.log.inertiaChecked = doInertia;
  if (doInertia) r.log.inertiaInitial = inertia(w);

  auto logPerm = [&](const std::vector<Index>& perm, const std::string& name) {
    w = permute_congruence(w, perm);
    r.log.steps.push_back({PermutationStep{perm}, doInertia ? inertia(w) : Inertia{}});
    r.stepNames.push_back(name);
  };
  auto logGauss = [&](Index pivot, const std::string& name, const std::string& hypothesis) {
    try {
      auto g = gauss_step(w, pivot);
      w = std::move(g.reduced);
      r.log.steps.push_back({std::move(g.step), doInertia ? inertia(w) : Inertia{}});
      r.stepNames.push_back(name);
    } catch (const SingularError&) {
      throw SingularError("congruence_chain: pivot '" + name + "' failed; violated hypothesis: " + hypothesis);
    }
  };

  // (v,T,tauT,E,H,tauH,theta,q,tauQ) -> (v,E,T,H,theta,tauT,tauH,tauQ,q)
  logPerm({SlotV, SlotE, SlotT, SlotH, SlotTheta, SlotTauT, SlotTauH, SlotTauQ, SlotQ},
          "collect the coupled core and the boundary block");
  logPerm({0, 2, 1, 3, 4, 5, 6, 7, 8}, "move the stress block ahead of the electric one");
  logGauss(1, "eliminate the stress block (pivot C^{-1})", "C >> 0");
  logPerm({0, 1, 3, 2, 4, 5, 6, 7, 8}, "swap the electric and magnetic blocks");
  logGauss(2, "eliminate the magnetic block (pivot mu - e* C^{-1} e)", "mu - e* C^{-1} e >> 0");
  logGauss(4, "eliminate the thermal block (pivot m0_55)", "m0_55 >> 0");

  const Complex invNu(1.0 / nu, 0.0);
  r.muMinus = w.block(2, 2).scaled(invNu);
  r.m44 = (w.block(3, 3) - real_part(d.sigma)).scaled(invNu);
  r.m55 = w.block(4, 4).scaled(invNu);
  r.finalOp = std::move(w);
  return r;
}

double direct_positivity(const MaterialData& d, const BoundaryTriple& t, const FrequencyPoint& z,
                         const SystemLayout& layout) {
  BlockOp m0 = assemble_m0(d, layout);
  BlockOp m1 = assemble_m1(d, t, z, layout);
  BlockOp w = m0.scaled(z.nu()) + m1.hermitianPart();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& comp : coupled_components(w)) {
    BlockOp sub = subblock(w, comp);
    best = std::min(best, positivity_constant(sub.flatten()));
  }
  return best;
}

namespace {

struct ConditionSet {
  std::vector<ConditionMargin> margins;
  bool allPass() const {
    for (const auto& m : margins)
      if (!m.pass) return false;
    return true;
  }
  std::string worstName() const {
    double worst = std::numeric_limits<double>::infinity();
    std::string name = "none";
    for (const auto& m : margins)
      if (!m.pass && m.margin < worst) {
        worst = m.margin;
        name = m.name;
      }
    return name;
  }
};

}  // namespace

Certificate certify(const MaterialData& d, const BoundaryTriple& t, const CertifyParams& params) {
  Certificate cert;
  cert.params = params;
  cert.alphaNorm = t.alphaNorm();

  // nu-independent hypotheses
  std::vector<ConditionMargin> staticMargins;
  auto addSelfAdj = [&](const LinOp& a, const std::string& name) {
    double resid = frobenius_norm(a - adjoint(a)) / std::max(1.0, frobenius_norm(a));
    staticMargins.push_back({name + " selfadjoint", 1e-12 - resid, resid <= 1e-12});
  };
  addSelfAdj(d.rhoStar, "rho*");
  addSelfAdj(d.eps, "eps");
  addSelfAdj(d.mu, "mu");
  addSelfAdj(d.cel, "C");
  addSelfAdj(d.gamma0, "gamma0");
  auto addNonneg = [&](const LinOp& a, const std::string& name) {
    double c = positivity_constant(a);
    staticMargins.push_back({name + " >= 0", c, c >= -params.tol});
  };
  addNonneg(d.eps, "eps");
  addNonneg(d.mu, "mu");
  addNonneg(d.gamma0, "gamma0");
  auto addPositive = [&](double c, const std::string& name) {
    staticMargins.push_back({name + " >> 0", c, c > params.tol});
  };
  addPositive(positivity_constant(d.rhoStar), "rho*");
  addPositive(positivity_constant(d.cel), "C");

  bool schurAvailable = true;
  LinOp m44;
  try {
    SchurOperators so = schur_m44_m55(d);
    addPositive(positivity_constant(so.muMinus), "mu - e*C^{-1}e");
    addPositive(positivity_constant(so.m55), "m0_55");
    m44 = so.m44;
  } catch (const SingularError& err) {
    schurAvailable = false;
    staticMargins.push_back({std::string("schur factors: ") + err.what(), -1.0, false});
  }

  auto conditionsAt = [&](double nu) {
    ConditionSet set;
    set.margins = staticMargins;
    if (schurAvailable) {
      double c44 = positivity_constant(m44.scaled(nu) + d.sigma);
      set.margins.push_back({"nu*m0_44 + sigma >> 0", c44, c44 > params.tol});
    }
    double ck = positivity_constant(d.kappa1.scaled(nu) + d.kappa0Inv);
    set.margins.push_back({"nu*kappa1 + kappa0^{-1} >> 0", ck, ck > params.tol});
    double ca = nu - cert.alphaNorm;
    set.margins.push_back({"nu > ||alphaB||", ca, ca > params.tol});
    return set;
  };

  double nuAccept = -1.0, nuReject = -1.0;
  ConditionSet last;
  for (int k = 0; k <= params.maxDoublings; ++k) {
    double nu = params.nuStart * std::pow(2.0, k);
    last = conditionsAt(nu);
    if (last.allPass()) {
      nuAccept = nu;
      nuReject = (k == 0) ? -1.0 : nu / 2.0;
      break;
    }
  }
  if (nuAccept < 0.0) {
    cert.accepted = false;
    cert.conditions = last.margins;
    cert.failureReason = "no admissible nu within the search range; worst violated condition: " + last.worstName();
    return cert;
  }
  if (params.refineBisection && nuReject > 0.0) {
    // refine to three significant digits on a geometric scale
    double lo = nuReject, hi = nuAccept;
    while ((hi - lo) > 5e-4 * hi) {
      double mid = std::sqrt(lo * hi);
      if (conditionsAt(mid).allPass())
        hi = mid;
      else
        lo = mid;
    }
    nuAccept = hi;
  }

  cert.nuMin = nuAccept;
  cert.conditions = conditionsAt(nuAccept).margins;
  cert.accepted = true;

  const double imagScale = 1.0 + cert.alphaNorm;
  SystemLayout layout = make_layout(d.spaces(), t);
  double c = std::numeric_limits<double>::infinity();
  for (double f : z_sample_imag_factors()) {
    Complex z(cert.nuMin, f * imagScale);
    cert.zSamples.push_back(z);
    c = std::min(c, direct_positivity(d, t, FrequencyPoint(z), layout));
  }
  cert.c = c;
  cert.directRouteConsistent = cert.c > 0.0;

  try {
    ChainResult chain = congruence_chain(d, t, cert.nuMin, FrequencyPoint(Complex(cert.nuMin, 0.0)), params.chain);
    cert.chain = chain.log;
    cert.chainStepNames = chain.stepNames;
    cert.chainChecked = true;
    if (schurAvailable) {
      SchurOperators so = schur_m44_m55(d);
      cert.chainDiagResidual =
          std::max({frobenius_norm(chain.muMinus - so.muMinus), frobenius_norm(chain.m44 - so.m44),
                    frobenius_norm(chain.m55 - so.m55)});
    }
  } catch (const Error& err) {
    cert.chainChecked = false;
    cert.failureReason = std::string("chain replay failed: ") + err.what();
  }
  return cert;
}

std::string certificate_to_json(const Certificate& cert) {
  nlohmann::ordered_json j;
  j["accepted"] = cert.accepted;
  j["nu_min"] = cert.nuMin;
  j["c"] = cert.c;
  j["alpha_norm"] = cert.alphaNorm;
  j["conditions"] = nlohmann::ordered_json::array();
  for (const auto& m : cert.conditions)
    j["conditions"].push_back({{"name", m.name}, {"margin", m.margin}, {"pass", m.pass}});
  j["z_samples"] = nlohmann::ordered_json::array();
  for (Complex z : cert.zSamples) j["z_samples"].push_back({z.real(), z.imag()});
  nlohmann::ordered_json chain;
  chain["inertia_checked"] = cert.chain.inertiaChecked;
  chain["inertia_initial"] = {cert.chain.inertiaInitial.nPlus, cert.chain.inertiaInitial.nZero,
                              cert.chain.inertiaInitial.nMinus};
  chain["steps"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < cert.chain.steps.size(); ++i) {
    const auto& s = cert.chain.steps[i];
    nlohmann::ordered_json js;
    js["kind"] = std::holds_alternative<PermutationStep>(s.action) ? "permutation" : "gauss";
    if (i < cert.chainStepNames.size()) js["name"] = cert.chainStepNames[i];
    if (const auto* perm = std::get_if<PermutationStep>(&s.action)) {
      js["perm"] = perm->perm;
    } else {
      js["pivot"] = std::get<GaussStep>(s.action).pivot;
    }
    js["inertia"] = {s.inertiaAfter.nPlus, s.inertiaAfter.nZero, s.inertiaAfter.nMinus};
    chain["steps"].push_back(std::move(js));
  }
  chain["constant_inertia"] = cert.chain.inertiaConstant();
  chain["checked"] = cert.chainChecked;
  chain["diag_residual"] = cert.chainDiagResidual;
  j["chain"] = std::move(chain);
  j["direct_route_consistent"] = cert.directRouteConsistent;
  j["failure_reason"] = cert.failureReason;
  j["params"] = {{"nu_start", cert.params.nuStart},
                 {"max_doublings", cert.params.maxDoublings},
                 {"tolerance", cert.params.tol},
                 {"bisection", cert.params.refineBisection}};
  return j.dump(2);
}

}  // namespace tpem
