#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chime/driver.hpp"

namespace chime {

namespace detail {

inline void write_report_files(const std::filesystem::path& out, const RunReport& rep) {
  std::filesystem::create_directories(out);
  write_file(out / "report.json", report_json(rep).dump(2) + "\n");
  write_file(out / "report.txt", report_text(rep));
}

inline void maybe_dump_frames(const RunConfig& cfg, const std::filesystem::path& out) {
  if (!cfg.dump_frames) return;
  const Patch pt = scenario_patch(cfg, cfg.n, kStaticTau0);
  const PatchFrames pf = build_patch_frames(pt, make_seed_fn(cfg.scenario, pt.grid));
  write_file(out / "frames.csv", frames_csv(pt, pf.frames[pt.centre()]));
}

inline int finish(const RunReport& rep, double seconds) {
  std::cout << report_text(rep);
  std::printf("wall-clock: %.3f s\n", seconds);
  return rep.overall() ? 0 : 1;
}

}  // namespace detail

// Entry point taking argv[1..]; returns the process exit code.
// 0: all enabled checks passed.  1: a check failed or a run aborted.
// 2: usage or configuration error.
inline int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"chiral membrane and string geometry toolkit"};
  app.name("chime");
  app.require_subcommand(1);

  std::string config_path, rundir, out_dir = "out", grids_arg;
  double tol_scale = 1.0;
  long cadence = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd, bool with_cadence) {
    cmd->add_option("config", config_path, "JSON scenario config")->required();
    cmd->add_option("--out", out_dir, "output directory (default: out)");
    cmd->add_option("--tol-scale", tol_scale,
                    "multiplies all documented tolerances (for coarse-grid exploration)");
    cmd->add_option_function<std::uint64_t>(
           "--seed",
           [&](const std::uint64_t& v) {
             seed = v;
             seed_set = true;
           },
           "override the config seed (random-embedding controls)");
    if (with_cadence)
      cmd->add_option("--cadence", cadence, "diagnostics every this many steps");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "evolve a scenario and write diagnostics");
  add_common(cmd_run, true);
  CLI::App* cmd_verify =
      app.add_subcommand("verify", "static geometry/algebra/stress checks, no evolution");
  add_common(cmd_verify, false);
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "convergence orders across grids via Richardson fits");
  add_common(cmd_sweep, false);
  cmd_sweep->add_option("--grids", grids_arg, "comma-separated grid sizes (e.g. 64,128,256)");
  CLI::App* cmd_report =
      app.add_subcommand("report", "re-render the report of a finished run directory");
  cmd_report->add_option("rundir", rundir, "directory holding report.json")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  try {
    if (cmd_report->parsed()) {
      std::ifstream in(std::filesystem::path(rundir) / "report.json");
      if (!in) throw ConfigError("no report.json in \"" + rundir + "\"");
      Json j;
      try {
        j = Json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report.json is not valid JSON: ") + e.what());
      }
      const RunReport rep = report_from_json(j);
      std::cout << report_text(rep);
      return rep.overall() ? 0 : 1;
    }

    RunConfig cfg = parse_config_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (cadence > 0) cfg.cadence = cadence;
    if (!(tol_scale > 0.0)) throw ConfigError("--tol-scale must be positive");
    finalize_config(cfg);
    const std::filesystem::path out(out_dir);

    if (cmd_verify->parsed()) {
      VerifyArtifacts art = verify_report(cfg, tol_scale);
      art.report.wall_seconds = elapsed();
      std::filesystem::create_directories(out);
      write_file(out / "deformation.csv",
                 csv_table({"eps", "metric", "metric_inv", "volume", "extrinsic"},
                           art.deformation_rows));
      detail::maybe_dump_frames(cfg, out);
      detail::write_report_files(out, art.report);
      return detail::finish(art.report, art.report.wall_seconds);
    }

    if (cmd_run->parsed()) {
      RunArtifacts art = run_report(cfg, tol_scale);
      art.report.wall_seconds = elapsed();
      std::filesystem::create_directories(out);
      write_file(out / "charges.csv", charges_csv(art.rows, cfg.scenario.bg.total_dim()));
      write_file(out / "diagnostics.csv", diagnostics_csv(art.rows));
      detail::maybe_dump_frames(cfg, out);
      detail::write_report_files(out, art.report);
      return detail::finish(art.report, art.report.wall_seconds);
    }

    // sweep
    std::vector<int> grids = cfg.grids;
    if (!grids_arg.empty()) {
      grids.clear();
      std::stringstream ss(grids_arg);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          grids.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw ConfigError("--grids expects comma-separated integers, got \"" + tok + "\"");
        }
      }
      for (size_t i = 0; i < grids.size(); ++i) {
        if (grids[i] < 8) throw ConfigError("--grids: sizes must be at least 8");
        if (i > 0 && grids[i] <= grids[i - 1])
          throw ConfigError("--grids must be strictly increasing");
      }
      if (grids.size() < 2) throw ConfigError("--grids needs at least two sizes");
    }
    SweepArtifacts art = sweep_report(cfg, tol_scale, grids);
    art.report.wall_seconds = elapsed();
    std::filesystem::create_directories(out);
    write_file(out / "sweep.csv", csv_table(art.header, art.table));
    detail::write_report_files(out, art.report);
    return detail::finish(art.report, art.report.wall_seconds);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace chime
