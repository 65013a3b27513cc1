#pragma once
// Run configuration: one JSON document describing the grid (or abstract
// dimensions), material coefficients (scalars broadcast to constant fields,
// or per-node arrays), the boundary triple, solver and source settings.

#include "tpem/evosolve.hpp"

#include <optional>
#include <string>

namespace tpem {

struct RunConfig {
  // spatial grid; absent means an abstract (synthetic-spaces) run
  std::optional<Cells> cells;
  Lengths lengths{1.0, 1.0, 1.0};
  // abstract field dimensions for grid-free runs
  Index dimS = 2, dimV = 3, dimSym = 4, dimS3 = 3;

  std::string materialPreset = "decoupled-unit";  // decoupled-unit | scalar-sample | custom
  std::map<std::string, double> coeff;            // scalar coefficients
  std::map<std::string, std::vector<double>> coeffArrays;  // per-node arrays

  std::string boundaryMode = "synthetic";  // trivial | synthetic | mesh-derived
  uint64_t boundarySeed = 1;
  TripleScales scales{0.5, 0.5, 0.5};
  std::array<Index, 3> syntheticDims{3, 4, 5};  // BD(grad), BD(curl), BD(Grad) for abstract runs

  double dt = 0.01;
  Index nSteps = 100;
  bool nuAuto = true;
  double nu = 1.0;
  Index pad = 4;
  std::string solver = "time";  // time | freq

  CertifyParams certifyParams;

  std::string sourceKind = "zero";  // zero | gaussian-pulse | file
  int sourceSlot = SlotV;
  Index sourceOnset = 0;
  double sourceWidth = 0.05;
  double sourceAmplitude = 1.0;
  std::string sourceProfile = "uniform";
  uint64_t sourceSeed = 1;
  std::string sourceFile;

  std::string outDir = "out";
  std::vector<std::string> formats{"csv", "raw"};
};

RunConfig parse_config_text(const std::string& jsonText);
RunConfig parse_config_file(const std::string& path);

// Everything a run needs, built from the configuration. Mesh members stay
// empty for abstract runs.
struct BuiltProblem {
  std::shared_ptr<const SpatialComplex> complex;
  std::shared_ptr<const BdSuite> suite;
  FieldSpaces fields;
  std::optional<MaterialData> material;
  std::optional<BoundaryTriple> triple;
  bool hasMesh() const { return complex != nullptr; }
};

BuiltProblem build_problem(const RunConfig& cfg);

SourceTerm build_sources(const RunConfig& cfg, const SystemLayout& layout);

int slot_index_of(const std::string& name);  // throws ConfigError on unknown names

}  // namespace tpem
