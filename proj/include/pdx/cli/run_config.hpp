#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pdx/grid.hpp"
#include "pdx/packets.hpp"
#include "pdx/pdx.hpp"
#include "pdx/projectors.hpp"
#include "pdx/quadrature.hpp"

namespace pdx::cli {

enum class Experiment {
  resolution_identity,
  pdx_position,
  pdx_same_side,
  pdx_generalized,
  pdx_momentum,
  zeno_convergence,
  crossing_distribution,
  oracle_suite,
};

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> names = {
      {Experiment::resolution_identity, "resolution-identity"},
      {Experiment::pdx_position, "pdx-position"},
      {Experiment::pdx_same_side, "pdx-same-side"},
      {Experiment::pdx_generalized, "pdx-generalized"},
      {Experiment::pdx_momentum, "pdx-momentum"},
      {Experiment::zeno_convergence, "zeno-convergence"},
      {Experiment::crossing_distribution, "crossing-distribution"},
      {Experiment::oracle_suite, "oracle-suite"},
  };
  return names;
}

inline std::string to_string(Experiment e) {
  for (const auto& [k, v] : experiment_names()) {
    if (k == e) return v;
  }
  return "unknown";
}

enum class PotentialKind { free, harmonic, custom };
enum class InitialState { packet, eigenstate };
/// What the crossing experiment expects of the sum-rule deviation.
enum class DeviationExpectation { none, conserved, interference };
enum class OutputFormat { json, csv };

struct GridBlock {
  std::size_t n_points = 512;
  double x_min = -20.0;
  double x_max = 20.0;
  Boundary boundary = Boundary::hard_wall;
};

struct ModelBlock {
  GridBlock grid;
  PhysicalParams params;
  PotentialKind potential = PotentialKind::free;
  std::vector<double> samples;
};

struct RegionBlock {
  Basis basis = Basis::position;
  double boundary = 0.0;
  Side side_of_c = Side::above;
  Membership boundary_node = Membership::C;

  [[nodiscard]] RegionSpec spec() const {
    if (basis == Basis::momentum) return RegionSpec::momentum();
    return RegionSpec::position(boundary, side_of_c, boundary_node);
  }
};

struct Tolerances {
  double identity = 1e-11;
  double completeness = 1e-10;
  double residual = 5e-2;
  double refinement_ratio = 0.6;
  double route_factor = 2.0;
  double zeno_ratio = 0.7;
  double additivity = 1e-10;
  double deviation = 1e-3;
  double euclidean = 1e-6;
  double normalization = 1e-6;
  double flux_identity = 1e-8;
  double free_fidelity = 1e-3;
  double mehler_fidelity = 1e-4;
};

struct CrossingBlock {
  InitialState state = InitialState::packet;
  int eigenstate_index = 0;
  int windows = 8;
  DeviationExpectation expect = DeviationExpectation::none;
};

struct MomentumBlock {
  /// Packet centers, widths, grid bounds and times in units of sqrt(hbar m w) and 1/w.
  bool natural_units = true;
  std::vector<double> sweep_masses;
  std::vector<double> sweep_omegas;
};

struct OracleBlock {
  unsigned sweep_seed = 20240611;
  int sweep_count = 10;
};

struct NumericBlock {
  double t_start = 0.0;
  double t_end = 1.0;
  QuadratureSpec quadrature;
  std::vector<int> slices{1, 8, 32};
  std::optional<Packet> source;
  std::optional<Packet> target;
  bool refine = true;
  std::vector<int> zeno_slices{8, 32, 128};
  CrossingBlock crossing;
  MomentumBlock momentum;
  OracleBlock oracle;
  Tolerances tolerances;
};

struct OutputBlock {
  std::string directory = "pdx-out";
  std::string name;
  std::vector<OutputFormat> formats{OutputFormat::json, OutputFormat::csv};
};

struct RunConfig {
  Experiment experiment = Experiment::resolution_identity;
  std::string label;
  ModelBlock model;
  std::optional<RegionBlock> region;
  NumericBlock numeric;
  OutputBlock output;
  /// Source text and --set overrides, echoed into reports.
  std::string source_text;
  std::vector<std::string> overrides;

  [[nodiscard]] std::string display_name() const {
    if (!label.empty()) return label;
    if (!output.name.empty()) return output.name;
    return to_string(experiment);
  }

  [[nodiscard]] Model build_model() const {
    const GridModel grid(model.grid.n_points, model.grid.x_min, model.grid.x_max, model.grid.boundary);
    PotentialSpec pot;
    switch (model.potential) {
      case PotentialKind::free: pot = PotentialSpec::free(); break;
      case PotentialKind::harmonic: pot = PotentialSpec::harmonic(model.params.omega); break;
      case PotentialKind::custom: pot = PotentialSpec::custom(model.samples); break;
    }
    return Model{grid, model.params, pot};
  }

  [[nodiscard]] PdxTimes times() const { return {numeric.t_start, numeric.t_end}; }
};

}  // namespace pdx::cli
