#pragma once

// Scenario plumbing: JSON scenario files describe a family, a box, and the
// tracker configuration; runs produce branches.csv, events.json and a
// deterministic report.json (sorted keys, 17 significant digits, no
// timestamps), so that consecutive runs are byte-identical and diffable.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "morsetrack/continuation.hpp"
#include "morsetrack/critical_points.hpp"
#include "morsetrack/doubling.hpp"
#include "morsetrack/errors.hpp"
#include "morsetrack/field.hpp"
#include "morsetrack/strata.hpp"

namespace morsetrack {

// ---------------------------------------------------------------------------
// Serialization names
// ---------------------------------------------------------------------------

inline const char* point_kind_name(PointKind k) {
  return k == PointKind::InteriorOrbit ? "interior-orbit" : "boundary";
}

inline const char* stability_name(Stability s) {
  switch (s) {
    case Stability::BoundaryStable: return "boundary-stable";
    case Stability::BoundaryUnstable: return "boundary-unstable";
    default: return "n/a";
  }
}

inline EventKind event_kind_from_name(const std::string& name) {
  static constexpr EventKind kinds[] = {EventKind::InteriorBirth, EventKind::InteriorDeath,
                                        EventKind::BoundaryBirth, EventKind::BoundaryDeath,
                                        EventKind::Collision};
  for (EventKind k : kinds)
    if (name == event_kind_name(k)) return k;
  throw validation_error("unknown event kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// Deterministic JSON writing.  The vendored parser is used only for reading;
// output goes through this little value type so that key order (sorted),
// float formatting (%.17g) and layout are fixed once and for all.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

class JsonValue {
 public:
  using Array = std::vector<JsonValue>;
  using Object = std::map<std::string, JsonValue>;

  JsonValue() : v_(nullptr) {}
  JsonValue(std::nullptr_t) : v_(nullptr) {}
  JsonValue(bool b) : v_(b) {}
  JsonValue(int i) : v_(std::int64_t(i)) {}
  JsonValue(std::int64_t i) : v_(i) {}
  JsonValue(std::size_t i) : v_(std::int64_t(i)) {}
  JsonValue(double d) : v_(d) {}
  JsonValue(const char* s) : v_(std::string(s)) {}
  JsonValue(std::string s) : v_(std::move(s)) {}
  JsonValue(Array a) : v_(std::move(a)) {}
  JsonValue(Object o) : v_(std::move(o)) {}

  static JsonValue array() { return JsonValue(Array{}); }
  static JsonValue object() { return JsonValue(Object{}); }

  JsonValue& operator[](const std::string& key) {
    if (!std::holds_alternative<Object>(v_)) v_ = Object{};
    return std::get<Object>(v_)[key];
  }

  void push(JsonValue item) {
    if (!std::holds_alternative<Array>(v_)) v_ = Array{};
    std::get<Array>(v_).push_back(std::move(item));
  }

  std::string dump(int indent = 2) const {
    std::string out;
    write(out, indent, 0);
    out.push_back('\n');
    return out;
  }

 private:
  static void escape(std::string& out, const std::string& s) {
    out.push_back('"');
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
          } else {
            out.push_back(c);
          }
      }
    }
    out.push_back('"');
  }

  void write(std::string& out, int indent, int depth) const {
    const std::string pad(std::size_t(indent) * std::size_t(depth + 1), ' ');
    const std::string close_pad(std::size_t(indent) * std::size_t(depth), ' ');
    if (std::holds_alternative<std::nullptr_t>(v_)) {
      out += "null";
    } else if (std::holds_alternative<bool>(v_)) {
      out += std::get<bool>(v_) ? "true" : "false";
    } else if (std::holds_alternative<std::int64_t>(v_)) {
      out += std::to_string(std::get<std::int64_t>(v_));
    } else if (std::holds_alternative<double>(v_)) {
      out += detail::format_double(std::get<double>(v_));
    } else if (std::holds_alternative<std::string>(v_)) {
      escape(out, std::get<std::string>(v_));
    } else if (std::holds_alternative<Array>(v_)) {
      const auto& a = std::get<Array>(v_);
      if (a.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < a.size(); ++i) {
        out += pad;
        a[i].write(out, indent, depth + 1);
        out += (i + 1 < a.size()) ? ",\n" : "\n";
      }
      out += close_pad + "]";
    } else {
      const auto& o = std::get<Object>(v_);
      if (o.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (const auto& [key, val] : o) {
        out += pad;
        escape(out, key);
        out += ": ";
        val.write(out, indent, depth + 1);
        out += (++i < o.size()) ? ",\n" : "\n";
      }
      out += close_pad + "}";
    }
  }

  std::variant<std::nullptr_t, bool, std::int64_t, double, std::string, Array, Object> v_;
};

// ---------------------------------------------------------------------------
// Scenario description
// ---------------------------------------------------------------------------

enum class ScenarioMode { Track, Map, Double };

struct ExpectedEvent {
  EventKind kind = EventKind::InteriorBirth;
  double sigma = 0.0;
  double tol = 1e-6;
};

struct MapSpec {
  std::vector<std::string> params;  // exactly two free parameter names
  std::vector<double> min, max;     // parameter-plane corners
  int grid = 61;                    // nodes per axis
};

struct DoubleSpec {
  std::vector<std::vector<double>> flags;  // boundary critical points (full coords)
  BumpSpec bump;
  Box scan_box;
  double tangential_lo = -1.0, tangential_hi = 1.0;
  int grid_tangential = 200, grid_normal = 50;
};

struct Scenario {
  std::string name;
  std::string description;
  int n = 2;
  std::string field;
  std::map<std::string, std::string> params;  // parameter -> expression in sigma
  double sigma_start = 0.0, sigma_end = 1.0;
  Box box;
  TrackerConfig config;
  int order = 4;  // jet truncation for the normal-form echo
  std::vector<ExpectedEvent> expected;
  bool has_expected = false;
  ScenarioMode mode = ScenarioMode::Track;
  MapSpec map;
  DoubleSpec dbl;

  FamilySpec family() const {
    std::map<std::string, ExprPtr> paths;
    for (const auto& [name_, expr] : params) paths.emplace(name_, parse_expression(expr));
    return FamilySpec(parse_expression(field), n, std::move(paths));
  }
};

// ---------------------------------------------------------------------------
// Scenario parsing (strict: unknown keys are rejected to catch typos early)
// ---------------------------------------------------------------------------

namespace detail {

using njson = nlohmann::json;

inline void require_keys(const njson& j, std::initializer_list<const char*> allowed,
                         const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) ok = true;
    if (!ok)
      throw validation_error(std::string("scenario: unknown key '") + item.key() + "' in " +
                             where);
  }
}

inline double as_double(const njson& j, const char* what) {
  if (!j.is_number()) throw validation_error(std::string("scenario: ") + what + " must be a number");
  return j.get<double>();
}

inline int as_int(const njson& j, const char* what) {
  if (!j.is_number_integer())
    throw validation_error(std::string("scenario: ") + what + " must be an integer");
  return j.get<int>();
}

inline std::vector<double> as_vector(const njson& j, const char* what) {
  if (!j.is_array()) throw validation_error(std::string("scenario: ") + what + " must be an array");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(as_double(e, what));
  return out;
}

inline Box parse_box(const njson& j, int n, const char* what) {
  require_keys(j, {"min", "max"}, what);
  if (!j.contains("min") || !j.contains("max"))
    throw validation_error(std::string("scenario: ") + what + " needs 'min' and 'max'");
  Box box;
  box.min = as_vector(j.at("min"), what);
  box.max = as_vector(j.at("max"), what);
  if (int(box.min.size()) != n || int(box.max.size()) != n)
    throw validation_error(std::string("scenario: ") + what + " corners must have dimension n");
  for (int i = 0; i < n; ++i)
    if (!(box.max[std::size_t(i)] > box.min[std::size_t(i)]))
      throw validation_error(std::string("scenario: ") + what + " must have positive extent");
  return box;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text) {
  detail::njson j;
  try {
    j = detail::njson::parse(text);
  } catch (const std::exception& e) {
    throw validation_error(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw validation_error("scenario: top level must be an object");
  detail::require_keys(j,
                       {"name", "description", "n", "field", "params", "sigma", "box", "config",
                        "expected", "map", "double"},
                       "the scenario");

  Scenario sc;
  if (!j.contains("name") || !j.at("name").is_string())
    throw validation_error("scenario: 'name' (string) is required");
  sc.name = j.at("name").get<std::string>();
  if (j.contains("description")) sc.description = j.at("description").get<std::string>();
  if (!j.contains("n")) throw validation_error("scenario: 'n' (dimension) is required");
  sc.n = detail::as_int(j.at("n"), "n");
  if (!j.contains("field") || !j.at("field").is_string())
    throw validation_error("scenario: 'field' (expression string) is required");
  sc.field = j.at("field").get<std::string>();

  if (j.contains("params")) {
    if (!j.at("params").is_object())
      throw validation_error("scenario: 'params' must map names to expressions");
    for (const auto& item : j.at("params").items()) {
      if (!item.value().is_string())
        throw validation_error("scenario: parameter path '" + item.key() + "' must be a string");
      sc.params[item.key()] = item.value().get<std::string>();
    }
  }

  if (j.contains("sigma")) {
    auto s = detail::as_vector(j.at("sigma"), "sigma");
    if (s.size() != 2) throw validation_error("scenario: 'sigma' must be [start, end]");
    sc.sigma_start = s[0];
    sc.sigma_end = s[1];
  }
  sc.config.sigma_start = sc.sigma_start;
  sc.config.sigma_end = sc.sigma_end;

  if (j.contains("box")) sc.box = detail::parse_box(j.at("box"), sc.n, "box");

  if (j.contains("config")) {
    const auto& c = j.at("config");
    detail::require_keys(c,
                         {"sigma_samples", "seed_density", "order", "eig_tol", "grad_tol",
                          "snap_tol", "trans_tol", "bracket_tol", "match_radius", "third_tol"},
                         "config");
    if (c.contains("sigma_samples"))
      sc.config.sigma_samples = detail::as_int(c.at("sigma_samples"), "sigma_samples");
    if (c.contains("seed_density"))
      sc.config.seed_density = detail::as_int(c.at("seed_density"), "seed_density");
    if (c.contains("order")) sc.order = detail::as_int(c.at("order"), "order");
    if (c.contains("eig_tol")) {
      double v = detail::as_double(c.at("eig_tol"), "eig_tol");
      sc.config.solver.eig_tol = v;
      sc.config.strata.eig_tol = v;
    }
    if (c.contains("grad_tol"))
      sc.config.solver.grad_tol = detail::as_double(c.at("grad_tol"), "grad_tol");
    if (c.contains("snap_tol"))
      sc.config.solver.snap_tol = detail::as_double(c.at("snap_tol"), "snap_tol");
    if (c.contains("trans_tol"))
      sc.config.trans_tol = detail::as_double(c.at("trans_tol"), "trans_tol");
    if (c.contains("bracket_tol"))
      sc.config.bracket_tol = detail::as_double(c.at("bracket_tol"), "bracket_tol");
    if (c.contains("match_radius"))
      sc.config.match_radius = detail::as_double(c.at("match_radius"), "match_radius");
    if (c.contains("third_tol"))
      sc.config.strata.third_tol = detail::as_double(c.at("third_tol"), "third_tol");
  }
  if (sc.order < 3) throw validation_error("scenario: jet order must be at least 3");

  if (j.contains("expected")) {
    if (!j.at("expected").is_array())
      throw validation_error("scenario: 'expected' must be an array");
    sc.has_expected = true;
    for (const auto& e : j.at("expected")) {
      detail::require_keys(e, {"kind", "sigma", "tol"}, "an expected event");
      if (!e.contains("kind") || !e.contains("sigma"))
        throw validation_error("scenario: expected events need 'kind' and 'sigma'");
      ExpectedEvent ev;
      ev.kind = event_kind_from_name(e.at("kind").get<std::string>());
      ev.sigma = detail::as_double(e.at("sigma"), "expected sigma");
      if (e.contains("tol")) ev.tol = detail::as_double(e.at("tol"), "expected tol");
      sc.expected.push_back(ev);
    }
    std::sort(sc.expected.begin(), sc.expected.end(),
              [](const ExpectedEvent& a, const ExpectedEvent& b) { return a.sigma < b.sigma; });
  }

  if (j.contains("map") && j.contains("double"))
    throw validation_error("scenario: 'map' and 'double' are mutually exclusive");

  if (j.contains("map")) {
    sc.mode = ScenarioMode::Map;
    const auto& m = j.at("map");
    detail::require_keys(m, {"params", "min", "max", "grid"}, "map");
    if (!m.contains("params") || !m.at("params").is_array() || m.at("params").size() != 2)
      throw validation_error("scenario: map needs exactly two parameter names");
    for (const auto& p : m.at("params")) sc.map.params.push_back(p.get<std::string>());
    sc.map.min = detail::as_vector(m.at("min"), "map min");
    sc.map.max = detail::as_vector(m.at("max"), "map max");
    if (sc.map.min.size() != 2 || sc.map.max.size() != 2)
      throw validation_error("scenario: map corners must have two entries");
    if (m.contains("grid")) sc.map.grid = detail::as_int(m.at("grid"), "map grid");
    if (sc.map.grid < 2) throw validation_error("scenario: map grid must be at least 2");
    std::vector<std::string> used;
    collect_params(parse_expression(sc.field), used);
    for (const auto& u : used) {
      bool mapped = std::find(sc.map.params.begin(), sc.map.params.end(), u) != sc.map.params.end();
      if (!mapped && !sc.params.count(u))
        throw validation_error("scenario: map leaves parameter '" + u + "' unbound");
    }
  }

  if (j.contains("double")) {
    sc.mode = ScenarioMode::Double;
    const auto& d = j.at("double");
    detail::require_keys(d, {"flags", "epsilon", "flag_radius", "scan_box", "tangential", "grid"},
                         "double");
    if (!d.contains("flags") || !d.at("flags").is_array())
      throw validation_error("scenario: double needs a 'flags' array");
    for (const auto& f : d.at("flags"))
      sc.dbl.flags.push_back(detail::as_vector(f, "a flagged point"));
    if (d.contains("epsilon"))
      sc.dbl.bump.epsilon = detail::as_double(d.at("epsilon"), "epsilon");
    if (d.contains("flag_radius"))
      sc.dbl.bump.flag_radius = detail::as_double(d.at("flag_radius"), "flag_radius");
    if (!d.contains("scan_box")) throw validation_error("scenario: double needs 'scan_box'");
    sc.dbl.scan_box = detail::parse_box(d.at("scan_box"), sc.n, "scan_box");
    if (d.contains("tangential")) {
      auto t = detail::as_vector(d.at("tangential"), "tangential");
      if (t.size() != 2) throw validation_error("scenario: 'tangential' must be [lo, hi]");
      sc.dbl.tangential_lo = t[0];
      sc.dbl.tangential_hi = t[1];
    }
    if (d.contains("grid")) {
      auto g = detail::as_vector(d.at("grid"), "double grid");
      if (g.size() != 2) throw validation_error("scenario: double grid must be [tangential, normal]");
      sc.dbl.grid_tangential = int(g[0]);
      sc.dbl.grid_normal = int(g[1]);
    }
  } else if (!j.contains("box")) {
    throw validation_error("scenario: 'box' is required");
  }

  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot read scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

struct IntervalCensus {
  double lo = 0.0, hi = 0.0, at = 0.0;
  CensusSummary counts;
};

struct NormalFormEcho {
  bool ok = false;
  std::string error;
  std::vector<int> eps;
  int degenerate_sign = 0;
  bool quartic = false;
  double residual = 0.0;
};

struct ExpectedCheck {
  ExpectedEvent declared;
  bool matched = false;
  double observed_sigma = 0.0;  // meaningful when matched
};

struct DoubleReport {
  double odd1_sup = 0.0;        // sup |dP/dx| at x = 0
  double odd3_sup = 0.0;        // sup |d^3P/dx^3| at x = 0
  double deviation_sup = 0.0;   // sup |P - F| over the collar grid
  double deviation_bound = 0.0; // epsilon * sup |dF/dx|
  double crit_match = 0.0;      // Hausdorff distance between critical sets
  bool identity_exact = false;  // P == F bitwise beyond the half-collar
  bool pass = false;
};

struct RunReport {
  Scenario scenario;
  TrackResult result;                 // track mode
  std::vector<IntervalCensus> censuses;
  std::vector<NormalFormEcho> echoes;  // one per event
  DoubleReport dbl;                    // double mode
  bool pass = true;
  std::vector<ExpectedCheck> checks;
  double wall_seconds = 0.0;  // printed by the CLI, never serialized
};

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

namespace detail {

inline NormalFormEcho normal_form_echo(const FamilySpec& fam, const Event& e, int order) {
  NormalFormEcho out;
  try {
    ScalarField f = fam.at(e.sigma_star);
    const bool quartic = e.stratum.tag == StratumTag::F1_22;
    Jet j = f.jet_at(e.location, std::max(order, quartic ? 4 : 3));
    SymmetryMask mask;  // interior representative: no constraint
    if (e.stratum.tag != StratumTag::F1_1) mask = SymmetryMask::x_odd(f.dimension());
    NormalFormSignature sig =
        quartic ? reduce_normal_form_quartic(j, mask) : reduce_normal_form_cubic(j, mask);
    out.ok = true;
    out.eps = sig.eps;
    out.degenerate_sign = sig.degenerate_sign;
    out.quartic = sig.quartic;
    out.residual = sig.residual;
  } catch (const error& ex) {
    out.error = ex.what();
  }
  return out;
}

}  // namespace detail

inline RunReport run_track_scenario(const Scenario& sc) {
  if (sc.mode != ScenarioMode::Track)
    throw validation_error("scenario '" + sc.name + "' is not a tracking scenario");
  RunReport rep;
  rep.scenario = sc;
  auto t0 = std::chrono::steady_clock::now();

  FamilySpec fam = sc.family();
  rep.result = track_branches(fam, sc.box, sc.config);

  // censuses on each inter-event interval, probed at the midpoint
  std::vector<double> cuts{sc.sigma_start};
  for (const auto& e : rep.result.events) cuts.push_back(e.sigma_star);
  cuts.push_back(sc.sigma_end);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    IntervalCensus ic;
    ic.lo = cuts[i];
    ic.hi = cuts[i + 1];
    ic.at = 0.5 * (ic.lo + ic.hi);
    ic.counts = census(fam, ic.at, sc.box, sc.config.seed_density, sc.config.solver);
    rep.censuses.push_back(ic);
  }

  for (const auto& e : rep.result.events)
    rep.echoes.push_back(detail::normal_form_echo(fam, e, sc.order));

  if (sc.has_expected) {
    std::vector<bool> used(rep.result.events.size(), false);
    for (const auto& want : sc.expected) {
      ExpectedCheck chk;
      chk.declared = want;
      for (std::size_t i = 0; i < rep.result.events.size(); ++i) {
        const Event& e = rep.result.events[i];
        if (used[i] || e.kind != want.kind) continue;
        if (std::abs(e.sigma_star - want.sigma) > want.tol) continue;
        used[i] = true;
        chk.matched = true;
        chk.observed_sigma = e.sigma_star;
        break;
      }
      rep.checks.push_back(chk);
    }
    rep.pass = rep.result.events.size() == sc.expected.size();
    for (const auto& chk : rep.checks)
      if (!chk.matched) rep.pass = false;
  }

  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Parameter-plane map
// ---------------------------------------------------------------------------

struct MapCell {
  double a = 0.0, b = 0.0;  // the two parameter values
  CensusSummary counts;
  bool flagged = false;  // a near-degenerate point was seen: not classified
  std::string region;
};

struct MapResult {
  Scenario scenario;
  int grid = 0;
  std::vector<MapCell> cells;  // row-major, first parameter outer
  std::map<std::string, int> region_counts;
  double wall_seconds = 0.0;
};

inline std::string region_label(const CensusSummary& c, bool flagged) {
  if (flagged) return "degenerate";
  if (c == CensusSummary{1, 0, 0, 0}) return "interior-only";
  if (c == CensusSummary{1, 0, 2, 0}) return "interior-plus-unstable-pair";
  if (c == CensusSummary{1, 2, 0, 0}) return "interior-plus-stable-pair";
  if (c == CensusSummary{0, 1, 1, 0}) return "opposite-pair";
  return "other";
}

inline MapResult map_parameter_plane(const Scenario& sc, int grid_override = 0) {
  if (sc.mode != ScenarioMode::Map)
    throw validation_error("scenario '" + sc.name + "' has no parameter-plane map");
  MapResult out;
  out.scenario = sc;
  out.grid = grid_override > 0 ? grid_override : sc.map.grid;
  if (out.grid < 2) throw validation_error("map grid must be at least 2");
  auto t0 = std::chrono::steady_clock::now();

  ExprPtr field = parse_expression(sc.field);
  SolverConfig solver = sc.config.solver;

  // verify equivariance once at a sample cell, then skip the per-cell check
  {
    ParamMap pm{{sc.map.params[0], sc.map.min[0]}, {sc.map.params[1], sc.map.min[1]}};
    ScalarField probe(field, sc.n, pm);
    auto repq = check_equivariance(probe);
    if (!repq.pass)
      throw validation_error("map scenario field is not equivariant under x -> -x");
  }
  solver.verify_equivariance = false;

  for (int i = 0; i < out.grid; ++i) {
    double a = sc.map.min[0] + (sc.map.max[0] - sc.map.min[0]) * i / (out.grid - 1);
    for (int k = 0; k < out.grid; ++k) {
      double b = sc.map.min[1] + (sc.map.max[1] - sc.map.min[1]) * k / (out.grid - 1);
      ParamMap pm{{sc.map.params[0], a}, {sc.map.params[1], b}};
      ScalarField f(field, sc.n, pm);
      auto pts = find_all_critical_points(f, sc.box, sc.config.seed_density, solver);
      MapCell cell;
      cell.a = a;
      cell.b = b;
      cell.counts = census_of(pts);
      cell.flagged = cell.counts.degenerate > 0;
      cell.region = region_label(cell.counts, cell.flagged);
      ++out.region_counts[cell.region];
      out.cells.push_back(std::move(cell));
    }
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Doubling demo
// ---------------------------------------------------------------------------

inline RunReport run_double_scenario(const Scenario& sc) {
  if (sc.mode != ScenarioMode::Double)
    throw validation_error("scenario '" + sc.name + "' is not a doubling scenario");
  RunReport rep;
  rep.scenario = sc;
  auto t0 = std::chrono::steady_clock::now();

  ScalarField f = ScalarField::parse(sc.field, sc.n);
  if (sc.n != 2)
    throw validation_error("doubling scenarios are wired for n = 2 collar demos");
  DoubledField dbl = build_double(f, sc.dbl.flags, sc.dbl.bump, &sc.dbl.scan_box);
  DoubleReport& d = rep.dbl;
  const double eps = sc.dbl.bump.epsilon;
  const int gt = sc.dbl.grid_tangential, gn = sc.dbl.grid_normal;
  const double ylo = sc.dbl.tangential_lo, yhi = sc.dbl.tangential_hi;

  // odd-order x-derivatives on the boundary
  for (int i = 0; i < gt; ++i) {
    double y = ylo + (yhi - ylo) * i / (gt - 1);
    Jet j = dbl.jet_at(std::vector<double>{0.0, y}, 3);
    MultiIndex m1, m3;
    m1.n = m3.n = 2;
    m1.e[0] = 1;
    m3.e[0] = 3;
    d.odd1_sup = std::max(d.odd1_sup, std::abs(j.coeff(m1)));          // 1! * coeff
    d.odd3_sup = std::max(d.odd3_sup, std::abs(j.coeff(m3)) * 6.0);    // 3! * coeff
  }

  // C0 distance over the collar, against the epsilon * sup|dF/dx| bound
  double c1 = 0.0;
  for (int i = 0; i < gt; ++i)
    for (int k = 0; k < gn; ++k) {
      std::vector<double> p{eps * k / (gn - 1), ylo + (yhi - ylo) * i / (gt - 1)};
      Jet j = f.jet_at(p, 1);
      MultiIndex mx;
      mx.n = 2;
      mx.e[0] = 1;
      c1 = std::max(c1, std::abs(j.coeff(mx)));
      d.deviation_sup = std::max(d.deviation_sup, std::abs(dbl.value_at(p) - f.value_at(p)));
    }
  d.deviation_bound = eps * c1;

  // critical sets agree (both solved as plain fields on the scan box)
  SolverConfig plain;
  plain.equivariant = false;
  plain.verify_equivariance = false;
  auto crit_p = find_all_critical_points(dbl, sc.dbl.scan_box, sc.config.seed_density, plain);
  auto crit_f = find_all_critical_points(f, sc.dbl.scan_box, sc.config.seed_density, plain);
  auto hausdorff = [](const std::vector<CriticalPoint>& xs, const std::vector<CriticalPoint>& ys) {
    double worst = 0.0;
    for (const auto& x : xs) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : ys) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.location.size(); ++c)
          s += (x.location[c] - y.location[c]) * (x.location[c] - y.location[c]);
        best = std::min(best, std::sqrt(s));
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  d.crit_match = crit_p.empty() && crit_f.empty()
                     ? 0.0
                     : std::max(hausdorff(crit_p, crit_f), hausdorff(crit_f, crit_p));

  // identity beyond the half-collar: values agree bitwise
  d.identity_exact = true;
  for (int i = 0; i < gt; ++i)
    for (int k = 0; k < gn; ++k) {
      std::vector<double> p{eps / 2.0 + (sc.dbl.scan_box.max[0] - eps / 2.0) * k / (gn - 1),
                            ylo + (yhi - ylo) * i / (gt - 1)};
      if (dbl.value_at(p) != f.value_at(p)) d.identity_exact = false;
    }

  d.pass = d.odd1_sup < 1e-10 && d.odd3_sup < 1e-10 &&
           d.deviation_sup <= d.deviation_bound + 1e-12 && d.crit_match < 1e-8 &&
           d.identity_exact;
  rep.pass = d.pass;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline RunReport run_scenario(const Scenario& sc) {
  if (sc.mode == ScenarioMode::Double) return run_double_scenario(sc);
  if (sc.mode == ScenarioMode::Map)
    throw validation_error("scenario '" + sc.name +
                           "' is a parameter-plane map; use the map entry point");
  return run_track_scenario(sc);
}

// ---------------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------------

namespace detail {

inline JsonValue location_json(const std::vector<double>& loc) {
  JsonValue a = JsonValue::array();
  for (double c : loc) a.push(c);
  return a;
}

inline JsonValue census_json(const CensusSummary& c) {
  JsonValue o = JsonValue::object();
  o["interior"] = c.interior;
  o["boundary_stable"] = c.boundary_stable;
  o["boundary_unstable"] = c.boundary_unstable;
  o["degenerate"] = c.degenerate;
  return o;
}

inline JsonValue event_json(const Event& e, const NormalFormEcho* echo) {
  JsonValue o = JsonValue::object();
  o["id"] = e.id;
  o["kind"] = event_kind_name(e.kind);
  o["sigma_star"] = e.sigma_star;
  o["location"] = location_json(e.location);
  o["stratum"] = stratum_name(e.stratum.tag);
  if (e.stratum.reason != CodimReason::None)
    o["codim_reason"] = codim_reason_name(e.stratum.reason);
  o["transversality"] = e.transversality;
  o["transverse"] = e.transverse;
  JsonValue ids = JsonValue::array(), idx = JsonValue::array();
  for (int id : e.branch_ids) ids.push(id);
  for (int i : e.branch_indices) idx.push(i);
  o["branch_ids"] = std::move(ids);
  o["branch_indices"] = std::move(idx);
  o["stability_before"] = stability_name(e.stability_before);
  o["stability_after"] = stability_name(e.stability_after);
  o["census_before"] = census_json(e.census_before);
  o["census_after"] = census_json(e.census_after);
  o["note"] = e.note;
  if (echo) {
    if (echo->ok) {
      JsonValue nf = JsonValue::object();
      JsonValue eps = JsonValue::array();
      for (int s : echo->eps) eps.push(s);
      nf["eps"] = std::move(eps);
      nf["degenerate_sign"] = echo->degenerate_sign;
      nf["quartic"] = echo->quartic;
      nf["residual"] = echo->residual;
      o["normal_form"] = std::move(nf);
    } else {
      JsonValue nf = JsonValue::object();
      nf["error"] = echo->error;
      o["normal_form"] = std::move(nf);
    }
  }
  return o;
}

inline JsonValue events_json_value(const RunReport& rep) {
  JsonValue arr = JsonValue::array();
  for (std::size_t i = 0; i < rep.result.events.size(); ++i)
    arr.push(event_json(rep.result.events[i], i < rep.echoes.size() ? &rep.echoes[i] : nullptr));
  return arr;
}

}  // namespace detail

inline std::string branches_csv(const RunReport& rep) {
  std::string out = "sigma,branch_id,kind";
  out += ",x";
  for (int i = 1; i < rep.scenario.n; ++i) out += ",y" + std::to_string(i);
  out += ",index,stability,min_abs_eig\n";
  for (const auto& b : rep.result.branches)
    for (const auto& s : b.samples) {
      out += detail::format_double(s.sigma);
      out += "," + std::to_string(b.id);
      out += ",";
      out += point_kind_name(b.kind);
      for (double c : s.location) out += "," + detail::format_double(c);
      out += "," + std::to_string(s.index);
      out += ",";
      out += stability_name(s.stability);
      out += "," + detail::format_double(s.min_abs_eig);
      out += "\n";
    }
  return out;
}

inline std::string events_json_text(const RunReport& rep) {
  return detail::events_json_value(rep).dump();
}

inline std::string report_json_text(const RunReport& rep) {
  JsonValue o = JsonValue::object();
  const Scenario& sc = rep.scenario;
  o["name"] = sc.name;
  o["dimension"] = sc.n;
  o["field"] = sc.field;
  o["pass"] = rep.pass;

  JsonValue tol = JsonValue::object();
  tol["eig_tol"] = sc.config.solver.eig_tol;
  tol["grad_tol"] = sc.config.solver.grad_tol;
  tol["snap_tol"] = sc.config.solver.snap_tol;
  tol["third_tol"] = sc.config.strata.third_tol;
  tol["trans_tol"] = sc.config.trans_tol;
  tol["bracket_tol"] = sc.config.bracket_tol;
  tol["match_radius"] = sc.config.match_radius;
  tol["seed_density"] = sc.config.seed_density;
  tol["order"] = sc.order;
  o["tolerances"] = std::move(tol);

  if (sc.mode == ScenarioMode::Double) {
    o["mode"] = "double";
    JsonValue d = JsonValue::object();
    d["epsilon"] = sc.dbl.bump.epsilon;
    d["flag_radius"] = sc.dbl.bump.flag_radius;
    d["odd_derivative_sup_order1"] = rep.dbl.odd1_sup;
    d["odd_derivative_sup_order3"] = rep.dbl.odd3_sup;
    d["collar_deviation_sup"] = rep.dbl.deviation_sup;
    d["collar_deviation_bound"] = rep.dbl.deviation_bound;
    d["critical_set_distance"] = rep.dbl.crit_match;
    d["identity_beyond_half_collar"] = rep.dbl.identity_exact;
    o["double"] = std::move(d);
    return o.dump();
  }

  o["mode"] = "track";
  JsonValue params = JsonValue::object();
  for (const auto& [name, expr] : sc.params) params[name] = expr;
  o["params"] = std::move(params);
  JsonValue sigma = JsonValue::array();
  sigma.push(sc.sigma_start);
  sigma.push(sc.sigma_end);
  o["sigma"] = std::move(sigma);
  o["sigma_samples"] = sc.config.sigma_samples;

  JsonValue branches = JsonValue::array();
  for (const auto& b : rep.result.branches) {
    JsonValue bj = JsonValue::object();
    bj["id"] = b.id;
    bj["kind"] = point_kind_name(b.kind);
    bj["birth_event"] = b.birth_event;
    bj["death_event"] = b.death_event;
    bj["samples"] = b.samples.size();
    bj["first_sigma"] = b.samples.front().sigma;
    bj["last_sigma"] = b.samples.back().sigma;
    bj["first_location"] = detail::location_json(b.samples.front().location);
    bj["last_location"] = detail::location_json(b.samples.back().location);
    bj["last_index"] = b.samples.back().index;
    bj["last_stability"] = stability_name(b.samples.back().stability);
    branches.push(std::move(bj));
  }
  o["branches"] = std::move(branches);
  o["events"] = detail::events_json_value(rep);

  JsonValue cens = JsonValue::array();
  for (const auto& ic : rep.censuses) {
    JsonValue cj = JsonValue::object();
    cj["from"] = ic.lo;
    cj["to"] = ic.hi;
    cj["at"] = ic.at;
    cj["counts"] = detail::census_json(ic.counts);
    cens.push(std::move(cj));
  }
  o["censuses"] = std::move(cens);

  JsonValue rej = JsonValue::array();
  for (const auto& r : rep.result.rejected) {
    JsonValue rj = JsonValue::object();
    rj["sigma"] = r.sigma;
    rj["location"] = detail::location_json(r.location);
    rj["stratum"] = stratum_name(r.stratum.tag);
    if (r.stratum.reason != CodimReason::None)
      rj["codim_reason"] = codim_reason_name(r.stratum.reason);
    rj["diagnostic"] = r.diagnostic;
    rej.push(std::move(rj));
  }
  o["rejected"] = std::move(rej);

  if (sc.has_expected) {
    JsonValue ex = JsonValue::object();
    ex["declared"] = sc.expected.size();
    ex["observed"] = rep.result.events.size();
    JsonValue checks = JsonValue::array();
    for (const auto& chk : rep.checks) {
      JsonValue cj = JsonValue::object();
      cj["kind"] = event_kind_name(chk.declared.kind);
      cj["sigma"] = chk.declared.sigma;
      cj["tol"] = chk.declared.tol;
      cj["matched"] = chk.matched;
      if (chk.matched) cj["observed_sigma"] = chk.observed_sigma;
      checks.push(std::move(cj));
    }
    ex["checks"] = std::move(checks);
    o["expected"] = std::move(ex);
  } else {
    o["expected"] = nullptr;
  }
  return o.dump();
}

inline std::string map_csv(const MapResult& m) {
  std::string out = m.scenario.map.params[0] + "," + m.scenario.map.params[1] +
                    ",interior_count,boundary_stable,boundary_unstable,degenerate_flag,region\n";
  for (const auto& c : m.cells) {
    out += detail::format_double(c.a);
    out += "," + detail::format_double(c.b);
    out += "," + std::to_string(c.counts.interior);
    out += "," + std::to_string(c.counts.boundary_stable);
    out += "," + std::to_string(c.counts.boundary_unstable);
    out += "," + std::string(c.flagged ? "1" : "0");
    out += "," + c.region + "\n";
  }
  return out;
}

inline std::string map_report_json_text(const MapResult& m) {
  JsonValue o = JsonValue::object();
  o["name"] = m.scenario.name;
  o["mode"] = "map";
  o["dimension"] = m.scenario.n;
  o["field"] = m.scenario.field;
  o["grid"] = m.grid;
  o["cells"] = m.cells.size();
  JsonValue names = JsonValue::array();
  names.push(m.scenario.map.params[0]);
  names.push(m.scenario.map.params[1]);
  o["params"] = std::move(names);
  JsonValue lo = JsonValue::array(), hi = JsonValue::array();
  lo.push(m.scenario.map.min[0]);
  lo.push(m.scenario.map.min[1]);
  hi.push(m.scenario.map.max[0]);
  hi.push(m.scenario.map.max[1]);
  o["min"] = std::move(lo);
  o["max"] = std::move(hi);
  JsonValue regions = JsonValue::object();
  for (const auto& [label, count] : m.region_counts) regions[label] = count;
  o["regions"] = std::move(regions);
  o["seed_density"] = m.scenario.config.seed_density;
  o["pass"] = true;
  return o.dump();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace detail

/// Write the artifacts of a run into `dir` (created if missing):
/// branches.csv + events.json + report.json for tracking runs,
/// report.json alone for doubling runs.
inline void write_artifacts(const RunReport& rep, const std::string& dir) {
  std::filesystem::path d(dir);
  std::filesystem::create_directories(d);
  if (rep.scenario.mode == ScenarioMode::Track) {
    detail::write_file(d / "branches.csv", branches_csv(rep));
    detail::write_file(d / "events.json", events_json_text(rep));
  }
  detail::write_file(d / "report.json", report_json_text(rep));
}

/// Write map.csv + report.json for a parameter-plane map.
inline void write_artifacts(const MapResult& m, const std::string& dir) {
  std::filesystem::path d(dir);
  std::filesystem::create_directories(d);
  detail::write_file(d / "map.csv", map_csv(m));
  detail::write_file(d / "report.json", map_report_json_text(m));
}

/// Load, run, and write in one step; returns the report.
inline RunReport run_scenario_file(const std::string& path, const std::string& out_dir) {
  Scenario sc = load_scenario_file(path);
  RunReport rep = run_scenario(sc);
  write_artifacts(rep, out_dir);
  return rep;
}

}  // namespace morsetrack
