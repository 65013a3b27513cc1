#include "tpem/config.hpp"

#include "tpem/io.hpp"

#include <json.hpp>

#include <sstream>

namespace tpem {

using nlohmann::json;

int slot_index_of(const std::string& name) {
  for (int s = 0; s < kSlotCount; ++s)
    if (name == slot_name(s)) return s;
  throw ConfigError("unknown slot '" + name + "'");
}

namespace {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + key + "': " + e.what());
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    auto cells = get_or<std::vector<int>>(g, "cells", {});
    if (cells.size() != 3) throw ConfigError("grid.cells must hold three entries");
    cfg.cells = Cells{cells[0], cells[1], cells[2]};
    auto len = get_or<std::vector<double>>(g, "lengths", {1.0, 1.0, 1.0});
    if (len.size() != 3) throw ConfigError("grid.lengths must hold three entries");
    cfg.lengths = Lengths{len[0], len[1], len[2]};
  }
  if (j.contains("spaces")) {
    const auto& s = j.at("spaces");
    cfg.dimS = get_or<Index>(s, "scalar", cfg.dimS);
    cfg.dimV = get_or<Index>(s, "vector", cfg.dimV);
    cfg.dimSym = get_or<Index>(s, "symmetric", cfg.dimSym);
    cfg.dimS3 = get_or<Index>(s, "displacement", cfg.dimS3);
  }
  if (j.contains("material")) {
    const auto& m = j.at("material");
    cfg.materialPreset = get_or<std::string>(m, "preset", "custom");
    for (const auto& [key, value] : m.items()) {
      if (key == "preset") continue;
      if (value.is_number()) {
        cfg.coeff[key] = value.get<double>();
      } else if (value.is_array()) {
        cfg.coeffArrays[key] = value.get<std::vector<double>>();
      } else {
        throw ConfigError("material." + key + " must be a number or an array");
      }
    }
  }
  if (j.contains("boundary")) {
    const auto& b = j.at("boundary");
    cfg.boundaryMode = get_or<std::string>(b, "mode", cfg.boundaryMode);
    cfg.boundarySeed = get_or<uint64_t>(b, "seed", cfg.boundarySeed);
    cfg.scales.q = get_or<double>(b, "scaleQ", cfg.scales.q);
    cfg.scales.alpha = get_or<double>(b, "scaleAlpha", cfg.scales.alpha);
    cfg.scales.beta = get_or<double>(b, "scaleBeta", cfg.scales.beta);
    auto dims = get_or<std::vector<Index>>(b, "dims", {});
    if (!dims.empty()) {
      if (dims.size() != 3) throw ConfigError("boundary.dims must hold three entries");
      cfg.syntheticDims = {dims[0], dims[1], dims[2]};
    }
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    cfg.dt = get_or<double>(s, "dt", cfg.dt);
    cfg.nSteps = get_or<Index>(s, "nSteps", cfg.nSteps);
    cfg.pad = get_or<Index>(s, "pad", cfg.pad);
    cfg.solver = get_or<std::string>(s, "mode", cfg.solver);
    if (s.contains("nu")) {
      if (s.at("nu").is_string()) {
        if (s.at("nu").get<std::string>() != "auto")
          throw ConfigError("solver.nu must be a number or \"auto\"");
        cfg.nuAuto = true;
      } else {
        cfg.nuAuto = false;
        cfg.nu = s.at("nu").get<double>();
      }
    }
    if (!(cfg.dt > 0.0)) throw ConfigError("solver.dt must be positive");
    if (cfg.nSteps < 1) throw ConfigError("solver.nSteps must be at least 1");
  }
  if (j.contains("certify")) {
    const auto& c = j.at("certify");
    cfg.certifyParams.nuStart = get_or<double>(c, "nuStart", cfg.certifyParams.nuStart);
    cfg.certifyParams.maxDoublings = get_or<int>(c, "maxDoublings", cfg.certifyParams.maxDoublings);
    cfg.certifyParams.tol = get_or<double>(c, "tolerance", cfg.certifyParams.tol);
    cfg.certifyParams.refineBisection = get_or<bool>(c, "bisection", cfg.certifyParams.refineBisection);
  }
  if (j.contains("sources")) {
    const auto& s = j.at("sources");
    cfg.sourceKind = get_or<std::string>(s, "kind", cfg.sourceKind);
    if (s.contains("slot")) cfg.sourceSlot = slot_index_of(s.at("slot").get<std::string>());
    cfg.sourceOnset = get_or<Index>(s, "onset", cfg.sourceOnset);
    cfg.sourceWidth = get_or<double>(s, "width", cfg.sourceWidth);
    cfg.sourceAmplitude = get_or<double>(s, "amplitude", cfg.sourceAmplitude);
    cfg.sourceProfile = get_or<std::string>(s, "profile", cfg.sourceProfile);
    cfg.sourceSeed = get_or<uint64_t>(s, "seed", cfg.sourceSeed);
    cfg.sourceFile = get_or<std::string>(s, "path", cfg.sourceFile);
    if (cfg.sourceOnset < 0) throw ConfigError("sources.onset must be nonnegative");
  }
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    cfg.outDir = get_or<std::string>(o, "directory", cfg.outDir);
    cfg.formats = get_or<std::vector<std::string>>(o, "formats", cfg.formats);
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) { return parse_config_text(read_text_file(path)); }

namespace {

// Scalar coefficients broadcast to constant fields; arrays give one value
// per node, replicated across the component blocks of the space.
LinOp coefficient_op(const RunConfig& cfg, const std::string& name, const HSpacePtr& space, Index nodeCount,
                     double fallback) {
  auto ita = cfg.coeffArrays.find(name);
  if (ita != cfg.coeffArrays.end()) {
    if (nodeCount <= 0) throw ConfigError("material." + name + ": per-node arrays need a grid");
    const auto& a = ita->second;
    if (Index(a.size()) != nodeCount)
      throw ConfigError("material." + name + " array must hold one value per node (" +
                        std::to_string(nodeCount) + ")");
    Vec diag(space->dim());
    for (Index i = 0; i < space->dim(); ++i) diag[i] = Complex(a[size_t(i % nodeCount)], 0.0);
    return LinOp(space, space, Mat(diag.asDiagonal()));
  }
  auto its = cfg.coeff.find(name);
  double v = its != cfg.coeff.end() ? its->second : fallback;
  return LinOp::scalar(space, v);
}

// Structural couplings on the mesh: e copies the vector components into the
// diagonal symmetric slots, lambda is a hydrostatic stress, p spreads the
// scalar over the vector components.
LinOp coupling_e(const RunConfig& cfg, const FieldSpaces& f, Index nodeCount) {
  double v = cfg.coeff.count("e") ? cfg.coeff.at("e") : 0.0;
  Mat m = Mat::Zero(f.SYM->dim(), f.V->dim());
  for (Index i = 0; i < 3 * nodeCount; ++i) m(i, i) = v;
  return LinOp(f.V, f.SYM, std::move(m));
}

LinOp coupling_lambda(const RunConfig& cfg, const FieldSpaces& f, Index nodeCount) {
  double v = cfg.coeff.count("lambda") ? cfg.coeff.at("lambda") : 0.0;
  Mat m = Mat::Zero(f.SYM->dim(), f.S->dim());
  for (int comp = 0; comp < 3; ++comp)
    for (Index i = 0; i < nodeCount; ++i) m(comp * nodeCount + i, i) = v;
  return LinOp(f.S, f.SYM, std::move(m));
}

LinOp coupling_p(const RunConfig& cfg, const FieldSpaces& f, Index nodeCount) {
  double v = cfg.coeff.count("p") ? cfg.coeff.at("p") : 0.0;
  Mat m = Mat::Zero(f.V->dim(), f.S->dim());
  for (int comp = 0; comp < 3; ++comp)
    for (Index i = 0; i < nodeCount; ++i) m(comp * nodeCount + i, i) = v;
  return LinOp(f.S, f.V, std::move(m));
}

MaterialData build_material(const RunConfig& cfg, const FieldSpaces& f, Index nodeCount) {
  if (cfg.materialPreset == "decoupled-unit") return decoupled_unit_material(f);
  if (cfg.materialPreset == "scalar-sample") return scalar_sample_material();
  if (cfg.materialPreset != "custom")
    throw ConfigError("unknown material preset '" + cfg.materialPreset + "'");
  if (nodeCount <= 0) {
    for (const char* name : {"e", "lambda", "p"})
      if (cfg.coeff.count(name) && cfg.coeff.at(name) != 0.0)
        throw ConfigError("material couplings need a grid; use a preset for abstract runs");
    LinOp rho = coefficient_op(cfg, "rho", f.S3, 0, 1.0);
    return make_material(f, rho, coefficient_op(cfg, "C", f.SYM, 0, 1.0), LinOp::zero(f.V, f.SYM),
                         LinOp::zero(f.S, f.SYM), LinOp::zero(f.S, f.V),
                         coefficient_op(cfg, "eps", f.V, 0, 1.0), coefficient_op(cfg, "mu", f.V, 0, 1.0),
                         coefficient_op(cfg, "sigma", f.V, 0, 0.0), coefficient_op(cfg, "theta0", f.S, 0, 1.0),
                         coefficient_op(cfg, "gamma0", f.S, 0, 1.0),
                         coefficient_op(cfg, "kappa0inv", f.V, 0, 1.0),
                         coefficient_op(cfg, "kappa1", f.V, 0, 1.0));
  }
  LinOp rho = coefficient_op(cfg, "rho", f.S3, nodeCount, 1.0);
  LinOp cel = coefficient_op(cfg, "C", f.SYM, nodeCount, 1.0);
  LinOp eps = coefficient_op(cfg, "eps", f.V, nodeCount, 1.0);
  LinOp mu = coefficient_op(cfg, "mu", f.V, nodeCount, 1.0);
  LinOp sigma = coefficient_op(cfg, "sigma", f.V, nodeCount, 0.0);
  LinOp theta0 = coefficient_op(cfg, "theta0", f.S, nodeCount, 1.0);
  LinOp gamma0 = coefficient_op(cfg, "gamma0", f.S, nodeCount, 1.0);
  LinOp kappa0Inv = coefficient_op(cfg, "kappa0inv", f.V, nodeCount, 1.0);
  LinOp kappa1 = coefficient_op(cfg, "kappa1", f.V, nodeCount, 1.0);
  return make_material(f, rho, cel, coupling_e(cfg, f, nodeCount), coupling_lambda(cfg, f, nodeCount),
                       coupling_p(cfg, f, nodeCount), eps, mu, sigma, theta0, gamma0, kappa0Inv, kappa1);
}

}  // namespace

BuiltProblem build_problem(const RunConfig& cfg) {
  BuiltProblem p;
  if (cfg.cells) {
    p.complex = std::make_shared<SpatialComplex>(build_complex(*cfg.cells, cfg.lengths));
    p.suite = std::make_shared<BdSuite>(build_bd_suite(*p.complex));
    p.fields = field_spaces_of(*p.complex);
    const Index nodes = p.complex->nodeCount();
    p.material = build_material(cfg, p.fields, nodes);
    if (cfg.boundaryMode == "trivial")
      p.triple = trivial_triple(p.suite->grad.space, p.suite->curl.space, p.suite->sgrad.space);
    else if (cfg.boundaryMode == "synthetic")
      p.triple = synthetic_triple_on(p.suite->grad.space, p.suite->curl.space, p.suite->sgrad.space,
                                     cfg.boundarySeed, cfg.scales, false);
    else if (cfg.boundaryMode == "mesh-derived")
      p.triple = mesh_triple(*p.complex, *p.suite, cfg.boundarySeed, cfg.scales);
    else
      throw ConfigError("unknown boundary mode '" + cfg.boundaryMode + "'");
    return p;
  }
  // abstract run on synthetic spaces
  if (cfg.materialPreset == "scalar-sample") {
    p.material = scalar_sample_material();
    p.fields = p.material->spaces();
  } else {
    p.fields = synthetic_field_spaces(cfg.dimS, cfg.dimV, cfg.dimSym, cfg.dimS3);
    p.material = build_material(cfg, p.fields, 0);
  }
  const bool scalarSample = cfg.materialPreset == "scalar-sample";
  const Index d1 = scalarSample ? 1 : cfg.syntheticDims[0];
  const Index d2 = scalarSample ? 1 : cfg.syntheticDims[1];
  const Index d3 = scalarSample ? 1 : cfg.syntheticDims[2];
  if (cfg.boundaryMode == "trivial" || (scalarSample && cfg.boundaryMode != "synthetic"))
    p.triple = trivial_triple(HSpace::euclidean(d1, "BD(grad)"), HSpace::euclidean(d2, "BD(curl)"),
                              HSpace::euclidean(d3, "BD(Grad)"));
  else if (cfg.boundaryMode == "synthetic")
    p.triple = synthetic_triple(d1, d2, d3, cfg.boundarySeed, cfg.scales, false);
  else
    throw ConfigError("boundary mode '" + cfg.boundaryMode + "' needs a grid");
  return p;
}

SourceTerm build_sources(const RunConfig& cfg, const SystemLayout& layout) {
  if (cfg.sourceKind == "zero") return zero_sources(cfg.dt, cfg.nSteps);
  if (cfg.sourceKind == "gaussian-pulse")
    return gaussian_pulse_source(layout, cfg.sourceSlot, cfg.sourceOnset, cfg.sourceWidth,
                                 cfg.sourceAmplitude, cfg.sourceProfile, cfg.sourceSeed, cfg.dt, cfg.nSteps);
  if (cfg.sourceKind == "file") {
    // one whitespace-separated value per line: step slotName coordIndex re [im]
    SourceTerm s = zero_sources(cfg.dt, cfg.nSteps);
    std::istringstream in(read_text_file(cfg.sourceFile));
    std::string slotName;
    Index step, coord;
    double re, im;
    Index minStep = cfg.nSteps + 1;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      im = 0.0;
      if (!(row >> step >> slotName >> coord >> re)) throw ConfigError("sources.file: malformed line: " + line);
      row >> im;
      int slot = slot_index_of(slotName);
      if (step < 0 || step > cfg.nSteps) throw ConfigError("sources.file: step out of range");
      if (coord < 0 || coord >= layout.dimOf(slot)) throw ConfigError("sources.file: coordinate out of range");
      auto [it, inserted] = s.slotSamples.try_emplace(slot, Mat::Zero(layout.dimOf(slot), cfg.nSteps + 1));
      it->second(coord, step) = Complex(re, im);
      minStep = std::min(minStep, step);
    }
    s.onset = std::min(minStep, cfg.nSteps);
    return s;
  }
  throw ConfigError("unknown source kind '" + cfg.sourceKind + "'");
}

}  // namespace tpem
