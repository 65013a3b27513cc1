#include "tpem/verify.hpp"

#include "tpem/evosolve.hpp"

#include <cstdio>
#include <sstream>

namespace tpem {

namespace {

void item(VerifyReport& r, const std::string& name, double value, double tol) {
  r.items.push_back({name, value, tol, value <= tol});
}

VerifyReport verify_mesh(uint64_t seed) {
  VerifyReport r{"mesh", {}};
  Rng rng(seed);
  for (int m : {2, 3}) {
    auto c = build_complex({m, m, m}, {1.0, 1.0, 1.0});
    const std::string g = std::to_string(m) + "^3 ";
    item(r, g + "curl(grad) composite", (c.curl * c.grad).maxAbs(), 0.0);
    item(r, g + "div(curl) composite", (c.div * c.curl).maxAbs(), 0.0);
    double worst = 0.0;
    const OpName ops[5] = {OpName::Grad, OpName::Div, OpName::Curl, OpName::SGrad, OpName::SDiv};
    const OpName dual[5] = {OpName::Div, OpName::Grad, OpName::Curl, OpName::SDiv, OpName::SGrad};
    for (int o = 0; o < 5; ++o) {
      for (int t = 0; t < 25; ++t) {
        Vec u = randn_vec(c.domainOf(ops[o])->dim(), rng);
        Vec w = randn_vec(c.domainOf(dual[o])->dim(), rng);
        u /= c.domainOf(ops[o])->norm(u);
        w /= c.domainOf(dual[o])->norm(w);
        worst = std::max(worst, std::abs(ibp_boundary_pairing(c, ops[o], c.projectHomogeneous(ops[o], u), w)));
        worst = std::max(worst, std::abs(ibp_boundary_pairing(c, ops[o], u, c.projectHomogeneous(dual[o], w))));
      }
    }
    item(r, g + "homogeneous-pair duality", worst, 1e-13);
    item(r, g + "interior-node count vs homogeneous dim",
         double(std::abs(c.homogDim(OpName::Grad) - c.interiorNodeCount())), 0.0);
  }
  return r;
}

VerifyReport verify_bd(uint64_t seed) {
  VerifyReport r{"bd", {}};
  Rng rng(seed);
  auto c = build_complex({3, 3, 3}, {1.0, 1.0, 1.0});
  BdSuite suite = build_bd_suite(c);
  for (const BDSpace* bd : {&suite.grad, &suite.div, &suite.curl, &suite.sgrad, &suite.sdiv}) {
    const std::string g = "BD(" + to_string(bd->op) + ") ";
    item(r, g + "iota* iota - 1", frobenius_norm(bd->project * bd->inject - LinOp::identity(bd->space)),
         1e-12);
    // projector idempotence and selfadjointness in the graph geometry
    LinOp proj = bd->inject * bd->project;
    item(r, g + "projector idempotence", frobenius_norm(proj * proj - proj), 1e-12);
    item(r, g + "projector selfadjointness", frobenius_norm(proj - adjoint(proj)), 1e-12);
    double pyth = 0.0;
    for (int t = 0; t < 10; ++t) {
      Vec u = randn_vec(bd->parentL2->dim(), rng);
      Vec ub = bd_project(*bd, u);
      double lhs = std::pow(bd->parentGraph->norm(u), 2);
      double rhs = std::pow(bd->parentGraph->norm(u - ub), 2) + std::pow(bd->parentGraph->norm(ub), 2);
      pyth = std::max(pyth, std::abs(lhs - rhs) / std::max(1.0, lhs));
    }
    item(r, g + "graph-norm pythagoras", pyth, 1e-12);
  }
  double worstIbp = 0.0;
  for (int t = 0; t < 50; ++t) {
    Vec U = randn_vec(c.V->dim(), rng);
    Vec u = randn_vec(c.S->dim(), rng);
    worstIbp = std::max(worstIbp, bd_ibp_residual(c, suite.div, suite.grad, U / c.V->norm(U), u / c.S->norm(u)));
    Vec W = randn_vec(c.SYM->dim(), rng);
    Vec w = randn_vec(c.S3->dim(), rng);
    worstIbp =
        std::max(worstIbp, bd_ibp_residual(c, suite.sdiv, suite.sgrad, W / c.SYM->norm(W), w / c.S3->norm(w)));
    Vec a = randn_vec(c.V->dim(), rng);
    Vec b = randn_vec(c.V->dim(), rng);
    worstIbp = std::max(worstIbp, bd_ibp_residual(c, suite.curl, suite.curl, a / c.V->norm(a), b / c.V->norm(b)));
  }
  item(r, "two-projection integration by parts (all pairs)", worstIbp, 1e-12);
  LinOp curlBD = bd_map(suite.curl, suite.curl, c).op;
  LinOp s = skew_part(curlBD);
  item(r, "symmetrized curl_BD skewness", frobenius_norm(s + adjoint(s)), 0.0);
  return r;
}

VerifyReport verify_impedance(uint64_t seed) {
  VerifyReport r{"impedance", {}};
  double worstInv = 0.0, worstRe = 0.0;
  for (uint64_t k = 0; k < 25; ++k) {
    BoundaryTriple t = synthetic_triple(3, 4, 5, seed + k);
    FrequencyPoint z(Complex(2.0 * t.alphaNorm() + 1.0, 1.0));
    worstInv = std::max(worstInv, k_times_b_residual(t, z));
    // real part of B(z) is block diagonal: remeasure through the flattened form
    BlockOp b = assemble_b(t, z);
    LinOp re = real_part(b.flatten());
    Mat m = re.mat();
    const Index d1 = t.bdGradScalar->dim(), d2 = t.bdCurl->dim(), d3 = t.bdGradSym->dim();
    Mat expect = Mat::Zero(d1 + d2 + d3, d1 + d2 + d3);
    expect.topLeftCorner(d1 + d2, d1 + d2) = Mat::Identity(d1 + d2, d1 + d2);
    expect.bottomRightCorner(d3, d3) =
        real_part(LinOp::identity(t.bdGradSym) + t.alphaB.scaled(1.0 / z.z)).mat();
    worstRe = std::max(worstRe, (m - expect).cwiseAbs().maxCoeff());
  }
  item(r, "K-formula inverse residual (25 seeds)", worstInv, 1e-9);
  item(r, "real-part block-diagonal structure of B(z)", worstRe, 1e-12);
  {
    BoundaryTriple t = synthetic_triple(3, 4, 5, seed + 1000);
    auto bounds = b_positivity_bounds(t, 2.0 * t.alphaNorm());
    item(r, "positivity bound 1 - ||alpha||/nu at nu = 2||alpha||", std::abs(bounds.reB - 0.5), 1e-12);
    auto b1 = b_positivity_bounds(t, 3.0 * t.alphaNorm());
    item(r, "monotonicity of the bound in nu", bounds.reB < b1.reB ? 0.0 : 1.0, 0.0);
  }
  return r;
}

VerifyReport verify_material(uint64_t seed) {
  VerifyReport r{"material", {}};
  {
    FieldSpaces f = synthetic_field_spaces(2, 3, 4, 3);
    BoundaryTriple t = synthetic_triple(2, 3, 4, seed);
    MaterialData d = random_admissible_material(f, seed);
    item(r, "M0 selfadjoint defect", assemble_m0(d, make_layout(f, t)).selfadjointDefect(), 1e-13);
    double nu = 2.0 * t.alphaNorm() + 1.0;
    ChainResult chain = congruence_chain(d, t, nu, FrequencyPoint(Complex(nu, 0.0)));
    SchurOperators so = schur_m44_m55(d);
    double resid = std::max({frobenius_norm(chain.muMinus - so.muMinus), frobenius_norm(chain.m44 - so.m44),
                             frobenius_norm(chain.m55 - so.m55)});
    item(r, "congruence chain vs schur formulas", resid, 1e-12);
    item(r, "chain inertia constant", chain.log.inertiaConstant() ? 0.0 : 1.0, 0.0);
  }
  {
    MaterialData d = scalar_sample_material();
    SchurOperators so = schur_m44_m55(d);
    item(r, "scalar sample mu - e*C^{-1}e = 2.5", std::abs(so.muMinus.mat()(0, 0).real() - 2.5), 1e-10);
    item(r, "scalar sample m0_55 = 1.9", std::abs(so.m55.mat()(0, 0).real() - 1.9), 1e-10);
    item(r, "scalar sample m0_44", std::abs(so.m44.mat()(0, 0).real() - (1.5 - 1.0 / 1.9)), 1e-10);
    LinOp eddy = eddy_current_epsilon(d);
    MaterialData de = make_material(d.spaces(), d.rhoStar, d.cel, d.e, d.lambda, d.p, eddy, d.mu, d.sigma,
                                    d.theta0, d.gamma0, d.kappa0Inv, d.kappa1);
    item(r, "eddy-current m0_44", frobenius_norm(schur_m44_m55(de).m44), 1e-12);
  }
  {
    FieldSpaces f = synthetic_field_spaces(2, 3, 4, 3);
    auto x1 = HSpace::euclidean(2, "vx1");
    auto x2 = HSpace::euclidean(2, "vx2");
    auto x3 = HSpace::euclidean(2, "vx3");
    Certificate cert = certify(decoupled_unit_material(f), trivial_triple(x1, x2, x3), {});
    item(r, "decoupled certificate c = min(nu,1)", std::abs(cert.c - 0.5), 1e-10);
    item(r, "decoupled certificate accepted", cert.accepted ? 0.0 : 1.0, 0.0);
  }
  return r;
}

VerifyReport verify_evosolve(uint64_t seed) {
  VerifyReport r{"evosolve", {}};
  auto complex = std::make_shared<SpatialComplex>(build_complex({2, 2, 2}, {1.0, 1.0, 1.0}));
  auto suite = std::make_shared<BdSuite>(build_bd_suite(*complex));
  FieldSpaces f = field_spaces_of(*complex);
  MaterialData mat = decoupled_unit_material(f);
  BoundaryTriple triple = trivial_triple(suite->grad.space, suite->curl.space, suite->sgrad.space);
  EvoSystem sys = make_system(complex, suite, mat, triple);
  item(r, "2^3 skew defect of A", sys.A.skewDefect(), 0.0);
  item(r, "2^3 selfadjoint defect of M0", sys.M0.selfadjointDefect(), 0.0);

  Certificate cert = certify(mat, triple, {});
  const double dt = 1.0 / 64.0;
  const Index nSteps = 48;
  SimulateOptions sopts;
  sopts.certificate = &cert;
  SourceTerm pulse =
      gaussian_pulse_source(sys.layout, SlotV, 12, 0.08, 1.0, "random", seed, dt, nSteps);
  TimeSeries ts = simulate(sys, pulse, dt, cert.nuMin, nSteps, sopts);
  item(r, "causality: max state norm before onset", check_causality(ts, sys.layout, pulse.onset), 1e-13);

  SourceTerm none = zero_sources(dt, nSteps);
  TimeSeries zs = simulate(sys, none, dt, cert.nuMin, nSteps, sopts);
  double zn = 0.0;
  for (const auto& s : zs.states) zn = std::max(zn, s.cwiseAbs().maxCoeff());
  item(r, "zero sources give the zero trajectory", zn, 0.0);

  FreqOptions fopts;
  fopts.certificate = &cert;
  fopts.threads = 1;
  TimeSeries f1 = freq_solve(sys, pulse, 6.0, nSteps, fopts);
  fopts.threads = 2;
  TimeSeries f2 = freq_solve(sys, pulse, 6.0, nSteps, fopts);
  double det = 0.0;
  for (size_t j = 0; j < f1.states.size(); ++j)
    det = std::max(det, (f1.states[j] - f2.states[j]).cwiseAbs().maxCoeff());
  item(r, "frequency sweep deterministic across worker counts", det, 0.0);

  TimeSeries tsNu = simulate(sys, pulse, dt, 6.0, nSteps, sopts);
  double diff = 0.0, scale = 0.0;
  for (size_t j = 0; j < f1.states.size(); ++j) {
    diff += std::pow(sys.layout.stateNorm(tsNu.states[j] - f1.states[j]), 2) * dt;
    scale += std::pow(sys.layout.stateNorm(tsNu.states[j]), 2) * dt;
  }
  item(r, "causal/frequency solver agreement (relative L2)", std::sqrt(diff / std::max(scale, 1e-30)), 0.2);
  return r;
}

}  // namespace

std::vector<VerifyReport> run_verify(const std::string& suite, uint64_t seed) {
  std::vector<VerifyReport> out;
  if (suite == "mesh" || suite == "all") out.push_back(verify_mesh(seed));
  if (suite == "bd" || suite == "all") out.push_back(verify_bd(seed));
  if (suite == "impedance" || suite == "all") out.push_back(verify_impedance(seed));
  if (suite == "material" || suite == "all") out.push_back(verify_material(seed));
  if (suite == "evosolve" || suite == "all") out.push_back(verify_evosolve(seed));
  if (out.empty()) throw ConfigError("unknown verify suite '" + suite + "'");
  return out;
}

std::string verify_report_to_text(const std::vector<VerifyReport>& reports) {
  std::ostringstream out;
  for (const auto& r : reports) {
    out << "suite " << r.suite << (r.pass() ? " PASS" : " FAIL") << "\n";
    for (const auto& i : r.items) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3e", i.value);
      out << "  [" << (i.pass ? "pass" : "FAIL") << "] " << i.name << ": " << buf << " (tol " << i.tol
          << ")\n";
    }
  }
  return out.str();
}

}  // namespace tpem
