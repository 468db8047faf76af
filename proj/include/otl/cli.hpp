#pragma once

// Command-line front end: run, asymptote, snapshot, validate-prior.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otl/config.hpp"
#include "otl/error.hpp"
#include "otl/experiment.hpp"
#include "otl/prior.hpp"

namespace otl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_atomically(path, text);
  }
}

inline std::string scenario_help() {
  std::string s = "builtin name or path to a key = value scenario file (builtins:";
  for (const auto& n : builtin_scenario_names()) s += " " + n;
  return s + ")";
}

}  // namespace detail

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"Online transfer learning simulator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string scenario;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_path;
  std::string trial_log;
  std::size_t n_max = 0;
  std::size_t snapshot_n = 0;
  double radius_s = 0.05;
  double radius_t = 0.05;
  std::size_t probe_resolution = 11;

  auto* run = app.add_subcommand("run", "Run both arms and write the regret curve CSV");
  run->add_option("--scenario", scenario, detail::scenario_help())->required();
  run->add_option("--reps", reps, "Number of trials");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--threads", threads, "Worker threads (default: OTL_THREADS or the processor count)");
  run->add_option("--out", out_path, "Output CSV path (default: standard output)");
  run->add_option("--trial-log", trial_log, "Write per-trial target-data checksums to this file");

  auto* asym = app.add_subcommand("asymptote", "Write closed-form asymptotes per n as CSV");
  asym->add_option("--scenario", scenario, detail::scenario_help())->required();
  asym->add_option("--n-max", n_max, "Largest n (default: the scenario's n)");
  asym->add_option("--out", out_path, "Output CSV path (default: standard output)");

  auto* snap = app.add_subcommand("snapshot", "Write source and target posterior grids after n target samples");
  snap->add_option("--scenario", scenario, detail::scenario_help())->required();
  snap->add_option("--n", snapshot_n, "Target samples to condition on")->required();
  snap->add_option("--seed", seed, "Master seed");
  snap->add_option("--out", out_path, "Output CSV path")->required();

  auto* valid = app.add_subcommand("validate-prior", "Check prior properness around the true parameters");
  valid->add_option("--scenario", scenario, detail::scenario_help())->required();
  valid->add_option("--radius-s", radius_s, "Neighborhood radius around theta_s")->check(CLI::PositiveNumber);
  valid->add_option("--radius-t", radius_t, "Neighborhood radius around theta_t")->check(CLI::PositiveNumber);
  valid->add_option("--resolution", probe_resolution, "Probe points per axis")->check(CLI::Range(3, 201));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    ScenarioConfig sc = load_scenario(scenario);
    if (reps) {
      if (*reps < 1) throw ConfigError("reps", "must be at least 1");
      sc.reps = *reps;
    }
    if (seed) sc.seed = *seed;

    if (run->parsed()) {
      ExperimentOptions opt;
      if (threads) opt.threads = std::max<std::size_t>(1, *threads);
      const ExperimentResult res = run_experiment(sc, opt);
      for (const auto& f : res.failures) {
        err << "warning: trial " << f.trial << " (seed " << f.seed << ") failed: " << f.message << "\n";
      }
      if (res.cmi_clamped) err << "warning: Monte-Carlo CMI fell below -3 stderr and was clamped to 0\n";
      detail::emit(format_curve_csv(res.curve), out_path, out);
      if (!trial_log.empty()) {
        std::string log = "trial,checksum\n";
        std::size_t k = 0;
        for (std::size_t r = 0; r < sc.reps; ++r) {
          bool failed = false;
          for (const auto& f : res.failures) failed = failed || f.trial == r;
          if (failed) continue;
          char buf[32];
          std::snprintf(buf, sizeof buf, "%016" PRIx64, res.target_checksums[k++]);
          log += std::to_string(r) + "," + buf + "\n";
        }
        detail::write_atomically(trial_log, log);
      }
    } else if (asym->parsed()) {
      const std::size_t top = n_max > 0 ? n_max : sc.horizon();
      detail::emit(format_asymptote_csv(asymptote_columns(sc, top)), out_path, out);
    } else if (snap->parsed()) {
      write_snapshot_csv(posterior_snapshot(sc, snapshot_n), out_path);
    } else if (valid->parsed()) {
      const PropernessReport rep =
          validate_properness(sc.prior, sc.theta_s, sc.theta_t, radius_s, radius_t, probe_resolution);
      out << "scenario: " << sc.name << "\n";
      out << "marginal: " << (rep.marginal_proper ? "proper" : "improper") << "\n";
      out << "conditional: " << (rep.conditional_proper ? "proper" : "improper") << "\n";
      if (rep.marginal_witness) out << "marginal zero at theta_s=" << to_string(rep.marginal_witness->view()) << "\n";
      if (rep.witness_s && rep.witness_t) {
        out << "conditional zero at theta_s=" << to_string(rep.witness_s->view())
            << " theta_t=" << to_string(rep.witness_t->view()) << "\n";
      }
      if (!rep.proper()) {
        err << "warning: prior of scenario " << sc.name
            << " vanishes near the true parameters; expect regret to grow linearly\n";
      }
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace otl
