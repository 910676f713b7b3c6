#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pdx/cli/run_config.hpp"
#include "pdx/errors.hpp"

namespace pdx::cli {

/// Every problem found in a config file, collected before any computation starts.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  [[nodiscard]] const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& p : items) out += "\n  - " + p;
    return out;
  }
  std::vector<std::string> problems_;
};

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string nearest(const std::string& word, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace detail {

/// Tree of accepted keys. Leaves hold plain values; blocks list the keys they accept.
struct KeyTree {
  std::map<std::string, KeyTree> children;
  bool block = false;

  KeyTree() = default;
  KeyTree(std::initializer_list<std::pair<const std::string, KeyTree>> kids) : children(kids), block(true) {}

  static KeyTree empty_block() {
    KeyTree k;
    k.block = true;
    return k;
  }

  [[nodiscard]] bool leaf() const { return !block; }
  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : children) out.push_back(k);
    return out;
  }
};

inline const KeyTree& accepted_keys() {
  static const KeyTree packet{{"center", {}}, {"width", {}}, {"momentum", {}}};
  static const KeyTree tree{
      {"experiment", {}},
      {"label", {}},
      {"model",
       {{"grid", {{"n_points", {}}, {"x_min", {}}, {"x_max", {}}, {"boundary", {}}}},
        {"params", {{"mass", {}}, {"hbar", {}}, {"omega", {}}}},
        {"potential", {{"kind", {}}, {"samples", {}}}}}},
      {"region",
       {{"position", {{"boundary", {}}, {"side_of_c", {}}, {"boundary_node", {}}}},
        {"momentum", KeyTree::empty_block()}}},
      {"numeric",
       {{"times", {{"t_start", {}}, {"t_end", {}}}},
        {"quadrature", {{"rule", {}}, {"nodes", {}}}},
        {"slicing", {{"slices", {}}}},
        {"smearing", {{"source", packet}, {"target", packet}}},
        {"refinement", {{"enabled", {}}}},
        {"zeno", {{"slices", {}}}},
        {"crossing", {{"state", {}}, {"eigenstate_index", {}}, {"windows", {}}, {"expect", {}}}},
        {"momentum", {{"natural_units", {}}, {"masses", {}}, {"omegas", {}}}},
        {"oracle", {{"sweep_seed", {}}, {"sweep_count", {}}}},
        {"tolerances",
         {{"identity", {}},
          {"completeness", {}},
          {"residual", {}},
          {"refinement_ratio", {}},
          {"route_factor", {}},
          {"zeno_ratio", {}},
          {"additivity", {}},
          {"deviation", {}},
          {"euclidean", {}},
          {"normalization", {}},
          {"flux_identity", {}},
          {"free_fidelity", {}},
          {"mehler_fidelity", {}}}}}},
      {"output", {{"directory", {}}, {"name", {}}, {"formats", {}}}},
  };
  return tree;
}

inline void check_keys(const YAML::Node& node, const KeyTree& spec, const std::string& path,
                       std::vector<std::string>& errors) {
  if (!node.IsMap()) {
    if (!node.IsNull()) errors.push_back((path.empty() ? "<root>" : path) + ": expected a block of keys");
    return;
  }
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string full = path.empty() ? key : path + "." + key;
    const auto it = spec.children.find(key);
    if (it == spec.children.end()) {
      const std::string near = nearest(key, spec.names());
      const std::string where = path.empty() ? near : path + "." + near;
      errors.push_back("unknown key '" + full + "'; nearest valid key is '" + where + "'");
      continue;
    }
    if (!it->second.leaf()) check_keys(kv.second, it->second, full, errors);
  }
}

/// Reads typed values out of the document, recording failures instead of throwing.
class Reader {
 public:
  Reader(YAML::Node root, std::vector<std::string>& errors) : root_(std::move(root)), errors_(errors) {}

  [[nodiscard]] std::optional<YAML::Node> at(const std::string& path) const {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
    return descend(root_, parts, 0);
  }

  [[nodiscard]] bool has(const std::string& path) const {
    const auto n = at(path);
    return n && !n->IsNull();
  }

  /// A block that is present, even when written as an empty map or `~`.
  [[nodiscard]] bool has_block(const std::string& path) const { return at(path).has_value(); }

  template <class T>
  void read(const std::string& path, T& out) const {
    const auto n = at(path);
    if (!n || n->IsNull()) return;
    try {
      out = n->as<T>();
    } catch (const YAML::Exception&) {
      errors_.push_back(path + ": cannot read '" + describe(*n) + "' as " + type_name<T>());
    }
  }

  template <class E>
  void read_enum(const std::string& path, E& out, const std::vector<std::pair<E, std::string>>& names) const {
    std::string text;
    const std::size_t before = errors_.size();
    read(path, text);
    if (text.empty() || errors_.size() != before) return;
    for (const auto& [value, name] : names) {
      if (name == text) {
        out = value;
        return;
      }
    }
    std::vector<std::string> options;
    for (const auto& [_, name] : names) options.push_back(name);
    errors_.push_back(path + ": unknown value '" + text + "'; nearest valid value is '" + nearest(text, options) + "'");
  }

  void error(std::string message) const { errors_.push_back(std::move(message)); }

 private:
  static std::optional<YAML::Node> descend(const YAML::Node& node, const std::vector<std::string>& parts,
                                           std::size_t i) {
    if (i == parts.size()) return node;
    if (!node.IsMap()) return std::nullopt;
    const YAML::Node child = node[parts[i]];
    if (!child.IsDefined()) return std::nullopt;
    return descend(child, parts, i + 1);
  }

  static std::string describe(const YAML::Node& n) {
    if (n.IsScalar()) return n.Scalar();
    if (n.IsSequence()) return "<list>";
    return "<block>";
  }

  template <class T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "text";
    else return "a list";
  }

  YAML::Node root_;
  std::vector<std::string>& errors_;
};

inline void read_packet(const Reader& r, const std::string& path, std::optional<Packet>& out) {
  if (!r.has_block(path)) return;
  Packet p;
  r.read(path + ".center", p.center);
  r.read(path + ".width", p.width);
  r.read(path + ".momentum", p.momentum);
  if (!r.has(path + ".center")) r.error(path + ".center: required");
  if (!(p.width > 0.0)) r.error(path + ".width: must be > 0");
  out = p;
}

inline bool set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const YAML::Node& value) {
  if (i + 1 == parts.size()) {
    node[parts[i]] = value;
    return true;
  }
  const YAML::Node existing = static_cast<const YAML::Node&>(node)[parts[i]];
  if (existing.IsDefined() && !existing.IsNull() && !existing.IsMap()) return false;
  if (!existing.IsDefined() || existing.IsNull()) node[parts[i]] = YAML::Node(YAML::NodeType::Map);
  return set_path(node[parts[i]], parts, i + 1, value);
}

/// Applies `a.b.c=value`; the value is parsed as YAML so lists and numbers keep their type.
inline void apply_override(YAML::Node& root, const std::string& assignment, std::vector<std::string>& errors) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back("--set '" + assignment + "': expected key=value");
    return;
  }
  const std::string key = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    errors.push_back("--set '" + assignment + "': " + e.msg);
    return;
  }
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);

  if (std::any_of(parts.begin(), parts.end(), [](const std::string& s) { return s.empty(); })) {
    errors.push_back("--set '" + assignment + "': empty key segment");
    return;
  }
  if (!set_path(root, parts, 0, value)) {
    errors.push_back("--set '" + assignment + "': a prefix of '" + key + "' is a value, not a block");
  }
}

inline std::string requirement_text(Experiment e) {
  switch (e) {
    case Experiment::resolution_identity: return "model and region (position or momentum)";
    case Experiment::pdx_position:
    case Experiment::pdx_same_side:
      return "model, region.position, numeric.smearing.source and numeric.smearing.target";
    case Experiment::pdx_generalized:
      return "model, region and numeric.smearing.source (plus numeric.smearing.target for a position region)";
    case Experiment::pdx_momentum:
      return "model, region.momentum, numeric.smearing.source and numeric.smearing.target";
    case Experiment::zeno_convergence: return "model and region.position";
    case Experiment::crossing_distribution:
      return "model, region.position and numeric.smearing.source (unless numeric.crossing.state is eigenstate)";
    case Experiment::oracle_suite: return "no blocks";
  }
  return "";
}

}  // namespace detail

/// Parses and validates a YAML config. Overrides are `dotted.key=value` strings
/// applied before validation. Throws ConfigError listing every problem found.
inline RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {}) {
  std::vector<std::string> errors;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({"malformed YAML: " + e.msg + " (line " + std::to_string(e.mark.line + 1) + ")"});
  }
  if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides) detail::apply_override(root, o, errors);
  detail::check_keys(root, detail::accepted_keys(), "", errors);
  if (!root.IsMap()) throw ConfigError(errors);

  const detail::Reader r(root, errors);
  RunConfig cfg;
  cfg.source_text = text;
  cfg.overrides = overrides;

  if (!r.has("experiment")) {
    errors.push_back("experiment: required");
  } else {
    r.read_enum("experiment", cfg.experiment, experiment_names());
  }
  r.read("label", cfg.label);

  // model
  auto& g = cfg.model.grid;
  r.read("model.grid.n_points", g.n_points);
  r.read("model.grid.x_min", g.x_min);
  r.read("model.grid.x_max", g.x_max);
  r.read_enum<Boundary>("model.grid.boundary", g.boundary,
                        {{Boundary::hard_wall, "hard-wall"}, {Boundary::periodic, "periodic"}});
  if (g.n_points < 8) errors.push_back("model.grid.n_points: must be >= 8");
  if (!(g.x_max > g.x_min)) errors.push_back("model.grid: x_max must exceed x_min");

  auto& p = cfg.model.params;
  r.read("model.params.mass", p.mass);
  r.read("model.params.hbar", p.hbar);
  r.read("model.params.omega", p.omega);
  if (!(p.mass > 0.0) || !std::isfinite(p.mass)) {
    errors.push_back("model.params.mass: must be > 0 (got " + std::to_string(p.mass) + ")");
  }
  if (!(p.hbar > 0.0) || !std::isfinite(p.hbar)) {
    errors.push_back("model.params.hbar: must be > 0 (got " + std::to_string(p.hbar) + ")");
  }
  if (!(p.omega >= 0.0) || !std::isfinite(p.omega)) {
    errors.push_back("model.params.omega: must be >= 0 (got " + std::to_string(p.omega) + ")");
  }

  r.read_enum<PotentialKind>("model.potential.kind", cfg.model.potential,
                             {{PotentialKind::free, "free"},
                              {PotentialKind::harmonic, "harmonic"},
                              {PotentialKind::custom, "custom"}});
  r.read("model.potential.samples", cfg.model.samples);
  if (cfg.model.potential == PotentialKind::harmonic && !(p.omega > 0.0) && p.omega >= 0.0) {
    errors.push_back("model.potential.kind: harmonic needs model.params.omega > 0");
  }
  if (cfg.model.potential == PotentialKind::custom && cfg.model.samples.size() != g.n_points) {
    errors.push_back("model.potential.samples: expected " + std::to_string(g.n_points) + " values, got " +
                     std::to_string(cfg.model.samples.size()));
  }

  // region
  const bool has_position = r.has_block("region.position");
  const bool has_momentum = r.has_block("region.momentum");
  if (has_position && has_momentum) {
    errors.push_back("region: give exactly one of region.position or region.momentum, not both");
  } else if (has_position) {
    RegionBlock rb;
    r.read("region.position.boundary", rb.boundary);
    r.read_enum<Side>("region.position.side_of_c", rb.side_of_c, {{Side::above, "above"}, {Side::below, "below"}});
    r.read_enum<Membership>("region.position.boundary_node", rb.boundary_node,
                            {{Membership::C, "C"}, {Membership::C_bar, "C_bar"}});
    if (!r.has("region.position.boundary")) errors.push_back("region.position.boundary: required");
    if (!(rb.boundary >= g.x_min && rb.boundary <= g.x_max)) {
      errors.push_back("region.position.boundary: must lie inside [model.grid.x_min, model.grid.x_max]");
    }
    cfg.region = rb;
  } else if (has_momentum) {
    RegionBlock rb;
    rb.basis = Basis::momentum;
    cfg.region = rb;
  }

  // numeric
  auto& n = cfg.numeric;
  r.read("numeric.times.t_start", n.t_start);
  r.read("numeric.times.t_end", n.t_end);
  if (!(n.t_end >= n.t_start)) errors.push_back("numeric.times: t_end must be >= t_start");
  r.read_enum<QuadratureRule>("numeric.quadrature.rule", n.quadrature.rule,
                              {{QuadratureRule::simpson, "simpson"}, {QuadratureRule::trapezoid, "trapezoid"}});
  r.read("numeric.quadrature.nodes", n.quadrature.n_nodes);
  if (n.quadrature.n_nodes < 3) errors.push_back("numeric.quadrature.nodes: must be >= 3");
  if (n.quadrature.rule == QuadratureRule::simpson && n.quadrature.n_nodes % 2 == 0) {
    errors.push_back("numeric.quadrature.nodes: composite Simpson needs an odd count");
  }
  r.read("numeric.slicing.slices", n.slices);
  if (n.slices.empty() || std::any_of(n.slices.begin(), n.slices.end(), [](int s) { return s < 1; })) {
    errors.push_back("numeric.slicing.slices: needs one or more positive counts");
  }
  detail::read_packet(r, "numeric.smearing.source", n.source);
  detail::read_packet(r, "numeric.smearing.target", n.target);
  r.read("numeric.refinement.enabled", n.refine);
  r.read("numeric.zeno.slices", n.zeno_slices);
  for (std::size_t i = 0; i < n.zeno_slices.size(); ++i) {
    if (n.zeno_slices[i] < 1 || (i > 0 && n.zeno_slices[i] <= n.zeno_slices[i - 1])) {
      errors.push_back("numeric.zeno.slices: must be positive and strictly increasing");
      break;
    }
  }
  r.read_enum<InitialState>("numeric.crossing.state", n.crossing.state,
                            {{InitialState::packet, "packet"}, {InitialState::eigenstate, "eigenstate"}});
  r.read("numeric.crossing.eigenstate_index", n.crossing.eigenstate_index);
  r.read("numeric.crossing.windows", n.crossing.windows);
  r.read_enum<DeviationExpectation>("numeric.crossing.expect", n.crossing.expect,
                                    {{DeviationExpectation::none, "none"},
                                     {DeviationExpectation::conserved, "conserved"},
                                     {DeviationExpectation::interference, "interference"}});
  if (n.crossing.windows < 1) errors.push_back("numeric.crossing.windows: must be >= 1");
  if (n.crossing.eigenstate_index < 0) errors.push_back("numeric.crossing.eigenstate_index: must be >= 0");
  r.read("numeric.momentum.natural_units", n.momentum.natural_units);
  r.read("numeric.momentum.masses", n.momentum.sweep_masses);
  r.read("numeric.momentum.omegas", n.momentum.sweep_omegas);
  for (double m : n.momentum.sweep_masses) {
    if (!(m > 0.0)) errors.push_back("numeric.momentum.masses: every mass must be > 0");
  }
  for (double w : n.momentum.sweep_omegas) {
    if (!(w > 0.0)) errors.push_back("numeric.momentum.omegas: every omega must be > 0");
  }
  r.read("numeric.oracle.sweep_seed", n.oracle.sweep_seed);
  r.read("numeric.oracle.sweep_count", n.oracle.sweep_count);
  if (n.oracle.sweep_count < 1) errors.push_back("numeric.oracle.sweep_count: must be >= 1");

  auto& t = n.tolerances;
  const std::vector<std::pair<std::string, double*>> tolerance_fields{
      {"identity", &t.identity},           {"completeness", &t.completeness},
      {"residual", &t.residual},           {"refinement_ratio", &t.refinement_ratio},
      {"route_factor", &t.route_factor},   {"zeno_ratio", &t.zeno_ratio},
      {"additivity", &t.additivity},       {"deviation", &t.deviation},
      {"euclidean", &t.euclidean},         {"normalization", &t.normalization},
      {"flux_identity", &t.flux_identity}, {"free_fidelity", &t.free_fidelity},
      {"mehler_fidelity", &t.mehler_fidelity}};
  for (const auto& [name, field] : tolerance_fields) {
    const std::string path = "numeric.tolerances." + name;
    r.read(path, *field);
    if (!(*field > 0.0)) errors.push_back(path + ": must be > 0");
  }

  // output
  r.read("output.directory", cfg.output.directory);
  r.read("output.name", cfg.output.name);
  if (r.has("output.formats")) {
    std::vector<std::string> formats;
    r.read("output.formats", formats);
    cfg.output.formats.clear();
    for (const auto& f : formats) {
      if (f == "json") cfg.output.formats.push_back(OutputFormat::json);
      else if (f == "csv") cfg.output.formats.push_back(OutputFormat::csv);
      else errors.push_back("output.formats: unknown format '" + f + "'; nearest valid value is '" +
                            nearest(f, {"json", "csv"}) + "'");
    }
  }

  // experiment requirements
  const Experiment e = cfg.experiment;
  const bool needs_model = e != Experiment::oracle_suite;
  bool missing = needs_model && !r.has_block("model");
  const bool position_only = e == Experiment::pdx_position || e == Experiment::pdx_same_side ||
                             e == Experiment::zeno_convergence || e == Experiment::crossing_distribution;
  if (needs_model && !cfg.region && !(has_position && has_momentum)) missing = true;
  if (position_only && cfg.region && cfg.region->basis != Basis::position) missing = true;
  if (e == Experiment::pdx_momentum && (!cfg.region || cfg.region->basis != Basis::momentum)) missing = true;
  const bool two_packets = e == Experiment::pdx_position || e == Experiment::pdx_same_side ||
                           e == Experiment::pdx_momentum ||
                           (e == Experiment::pdx_generalized && cfg.region && cfg.region->basis == Basis::position);
  if (two_packets && (!n.source || !n.target)) missing = true;
  if (e == Experiment::pdx_generalized && !n.source) missing = true;
  if (e == Experiment::crossing_distribution && n.crossing.state == InitialState::packet && !n.source) missing = true;
  if (missing) {
    errors.push_back("experiment " + to_string(e) + " requires " + detail::requirement_text(e));
  }
  if (e == Experiment::pdx_momentum && n.momentum.sweep_omegas.empty() && !(p.omega > 0.0) && p.omega >= 0.0) {
    errors.push_back("model.params.omega: pdx-momentum needs omega > 0");
  }
  if (e == Experiment::crossing_distribution && !(n.t_end > n.t_start)) {
    errors.push_back("numeric.times: crossing-distribution needs t_end > t_start");
  }

  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

}  // namespace pdx::cli
