// morsetrack CLI: run scenarios, list builtins, map parameter planes.
//
// Exit codes: 0 success, 1 validation/usage error, 2 expected-event mismatch.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "morsetrack.hpp"

namespace {

using namespace morsetrack;

Scenario resolve_scenario(const std::string& arg) {
  if (std::filesystem::exists(arg)) return load_scenario_file(arg);
  if (const char* text = builtins::find(arg)) return parse_scenario(text);
  throw validation_error("no scenario file or builtin named '" + arg +
                         "' (see `morsetrack list`)");
}

void print_census(const IntervalCensus& ic) {
  std::printf("  census (%g, %g): interior %d, boundary-stable %d, boundary-unstable %d",
              ic.lo, ic.hi, ic.counts.interior, ic.counts.boundary_stable,
              ic.counts.boundary_unstable);
  if (ic.counts.degenerate) std::printf(", degenerate %d", ic.counts.degenerate);
  std::printf("\n");
}

int do_run(const Scenario& sc, const std::string& out_dir) {
  if (sc.mode == ScenarioMode::Map)
    throw validation_error("scenario '" + sc.name +
                           "' is a parameter-plane map; use `morsetrack map` instead");
  RunReport rep = run_scenario(sc);
  write_artifacts(rep, out_dir);

  if (sc.mode == ScenarioMode::Double) {
    std::printf("scenario %s (doubling demo)\n", sc.name.c_str());
    std::printf("  odd x-derivative sup at the wall: order 1 %.3e, order 3 %.3e\n",
                rep.dbl.odd1_sup, rep.dbl.odd3_sup);
    std::printf("  collar C0 deviation %.6g (bound %.6g)\n", rep.dbl.deviation_sup,
                rep.dbl.deviation_bound);
    std::printf("  critical-set distance %.3e, identity beyond the half-collar: %s\n",
                rep.dbl.crit_match, rep.dbl.identity_exact ? "exact" : "VIOLATED");
    std::printf("  wrote %s/report.json\n", out_dir.c_str());
    std::printf("  %s in %.2f s\n", rep.pass ? "passed" : "FAILED", rep.wall_seconds);
    return rep.pass ? 0 : 2;
  }

  std::printf("scenario %s (track, sigma in [%g, %g], %d samples)\n", sc.name.c_str(),
              sc.sigma_start, sc.sigma_end, sc.config.sigma_samples);
  std::printf("  branches: %zu, events: %zu, rejected: %zu\n", rep.result.branches.size(),
              rep.result.events.size(), rep.result.rejected.size());
  for (const auto& e : rep.result.events) {
    std::printf("  event %d: %s at sigma = %.12g, location (", e.id, event_kind_name(e.kind),
                e.sigma_star);
    for (std::size_t i = 0; i < e.location.size(); ++i)
      std::printf("%s%.6g", i ? ", " : "", e.location[i]);
    std::printf("), transversality %.6g%s\n", e.transversality,
                e.transverse ? "" : " (NOT transverse)");
    if (!e.note.empty()) std::printf("    note: %s\n", e.note.c_str());
  }
  for (const auto& ic : rep.censuses) print_census(ic);

  bool codim2 = false;
  for (const auto& r : rep.result.rejected) {
    std::printf("  rejected trigger at sigma = %.12g: %s\n", r.sigma, r.diagnostic.c_str());
    if (r.stratum.tag == StratumTag::CodimGe2) codim2 = true;
  }
  if (codim2) {
    std::printf("  hint: the path meets a codimension >= 2 stratum, which a generic path\n");
    std::printf("  avoids; perturb a parameter path slightly (for example add\n");
    std::printf("  1e-4*sin(7*sigma) to one parameter) and rerun.\n");
  }

  if (sc.has_expected) {
    int matched = 0;
    for (const auto& chk : rep.checks) {
      if (chk.matched) {
        ++matched;
      } else {
        std::printf("  MISSING expected %s near sigma = %g (tol %g)\n",
                    event_kind_name(chk.declared.kind), chk.declared.sigma, chk.declared.tol);
      }
    }
    std::printf("  expected events: %d/%zu matched, %zu observed\n", matched, rep.checks.size(),
                rep.result.events.size());
  }
  std::printf("  wrote %s/{branches.csv, events.json, report.json}\n", out_dir.c_str());
  std::printf("  %s in %.2f s\n", rep.pass ? "passed" : "FAILED", rep.wall_seconds);
  return rep.pass ? 0 : 2;
}

int do_map(const Scenario& sc, int grid, const std::string& out_dir) {
  MapResult m = map_parameter_plane(sc, grid);
  write_artifacts(m, out_dir);
  std::printf("scenario %s (map, %d x %d cells over [%g, %g] x [%g, %g])\n", sc.name.c_str(),
              m.grid, m.grid, sc.map.min[0], sc.map.max[0], sc.map.min[1], sc.map.max[1]);
  for (const auto& [label, count] : m.region_counts)
    std::printf("  %-30s %d\n", label.c_str(), count);
  std::printf("  wrote %s/{map.csv, report.json}\n", out_dir.c_str());
  std::printf("  completed in %.2f s\n", m.wall_seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morsetrack: critical points and bifurcations of equivariant families"};
  app.require_subcommand(1);

  std::string scenario_arg, out_dir = "out";
  int order = 0, seed_density = 0, grid = 0;
  double eig_tol = 0.0, sigma_step = 0.0;

  CLI::App* run = app.add_subcommand("run", "run a scenario (file path or builtin name)");
  run->add_option("scenario", scenario_arg, "scenario JSON file or builtin name")->required();
  run->add_option("--out", out_dir, "output directory (default: out)");
  run->add_option("--order", order, "jet truncation order for the normal-form echo (>= 3)");
  run->add_option("--eig-tol", eig_tol, "relative eigenvalue degeneracy threshold");
  run->add_option("--seed-density", seed_density, "global solve grid density per axis");
  run->add_option("--sigma-step", sigma_step, "parameter step (overrides sigma_samples)");

  CLI::App* list = app.add_subcommand("list", "list the builtin scenarios");

  CLI::App* map = app.add_subcommand("map", "sweep a two-parameter plane and write a census map");
  map->add_option("scenario", scenario_arg, "scenario JSON file or builtin name")->required();
  map->add_option("--grid", grid, "nodes per axis (default: scenario's grid)");
  map->add_option("--out", out_dir, "output directory (default: out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (list->parsed()) {
      for (const auto& name : morsetrack::builtins::names())
        std::printf("%.*s\n", int(name.size()), name.data());
      return 0;
    }
    morsetrack::Scenario sc = resolve_scenario(scenario_arg);
    if (order > 0) sc.order = order;
    if (order > 0 && order < 3)
      throw morsetrack::validation_error("jet order must be at least 3");
    if (eig_tol > 0.0) {
      sc.config.solver.eig_tol = eig_tol;
      sc.config.strata.eig_tol = eig_tol;
    }
    if (seed_density > 0) sc.config.seed_density = seed_density;
    if (sigma_step > 0.0) {
      double span = sc.sigma_end - sc.sigma_start;
      sc.config.sigma_samples = std::max(2, int(std::llround(span / sigma_step)));
    }
    if (run->parsed()) return do_run(sc, out_dir);
    return do_map(sc, grid, out_dir);
  } catch (const morsetrack::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
