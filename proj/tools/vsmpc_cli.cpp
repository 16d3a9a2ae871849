// vsmpc: closed-loop battery dispatch experiments.
//
//   vsmpc run [file] [--seed N] [--out DIR] [--strategy S] [--capacity C]
//             [--perfect-forecast] [--solver-trace] [--threads N]
//   vsmpc compare file [same flags]
//
// Exit codes: 0 ok, 2 configuration error, 3 solver/controller failure, 4 I/O error.

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "vsmpc/experiment.hpp"

namespace fs = std::filesystem;
using namespace vsmpc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> strategy;
  std::optional<double> capacity;
  bool perfect = false;
  bool solver_trace = false;
  unsigned threads = 0;
};

ExperimentFile apply(ExperimentFile exp, const Overrides& o) {
  if (o.seed) {
    exp.scenario.seed = *o.seed;
    exp.seeds = {*o.seed};
  }
  if (o.strategy) {
    try {
      exp.scenario.strategy = strategy_from_string(*o.strategy);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--strategy", e.what());
    }
    exp.strategies = {exp.scenario.strategy};
  }
  if (o.capacity) {
    exp.scenario.capacity_mwh = *o.capacity;
    exp.capacities_mwh = {*o.capacity};
  }
  if (o.perfect) exp.scenario.wind.mode = bess::WindMode::perfect;
  if (o.out) exp.output_dir = *o.out;
  return parse_experiment(echo_experiment(exp));  // revalidate
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  return os;
}

void check_written(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) throw IoError(path.string() + ": write failed");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RevenueTable mean_table(const std::vector<SweepCell>& cells, const std::vector<SimLog>& logs) {
  std::map<std::pair<double, int>, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& a = acc[{cells[i].capacity_mwh, static_cast<int>(cells[i].strategy)}];
    a.first += logs[i].aggregates.total_revenue;
    a.second += 1;
  }
  std::vector<RevenueEntry> entries;
  for (const auto& [key, a] : acc) {
    entries.push_back({key.first, static_cast<Strategy>(key.second), a.first / a.second});
  }
  return revenue_table(entries);
}

void write_trajectories(const fs::path& dir, const std::vector<SweepCell>& cells,
                        const std::vector<SimLog>& logs, double capacity,
                        std::vector<std::string>& written) {
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].capacity_mwh == capacity && cells[i].seed == cells.front().seed) picks.push_back(i);
  }
  if (picks.empty()) return;
  const std::string name = "trajectory_" + fmt(capacity) + ".csv";
  const fs::path path = dir / name;
  std::ofstream os = open_out(path);
  os << "t,forecast,actual";
  for (std::size_t i : picks) os << ",u_" << to_string(cells[i].strategy) << ",soc_" << to_string(cells[i].strategy);
  os << '\n';
  const std::size_t n = logs[picks.front()].records.size();
  for (std::size_t k = 0; k < n; ++k) {
    const SimRecord& r0 = logs[picks.front()].records[k];
    os << fmt(r0.t) << ',' << fmt(r0.forecast) << ',' << fmt(r0.actual);
    for (std::size_t i : picks) {
      const SimRecord& r = logs[i].records[k];
      os << ',' << fmt(r.u) << ',' << fmt(r.soc);
    }
    os << '\n';
  }
  check_written(os, path);
  written.push_back(name);
}

int execute(const std::optional<fs::path>& file, const Overrides& o, bool compare) {
  ExperimentFile exp = file ? load_experiment(*file) : ExperimentFile{};
  exp = apply(std::move(exp), o);
  const fs::path base_dir = file ? fs::absolute(*file).parent_path() : fs::current_path();
  const fs::path out_dir = exp.output_dir;

  const std::vector<SweepCell> cells = sweep_cells(exp);
  std::vector<ScenarioConfig> cfgs;
  for (const SweepCell& c : cells) {
    cfgs.push_back(make_scenario(exp, c, base_dir));
    cfgs.back().record_solver_trace = o.solver_trace;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir.string() + ": " + ec.message());

  // Replay traces are pinned to an absolute path so the manifest stands alone.
  ExperimentFile pinned = exp;
  if (!pinned.scenario.wind.trace_file.empty() && fs::path(pinned.scenario.wind.trace_file).is_relative()) {
    pinned.scenario.wind.trace_file = (base_dir / pinned.scenario.wind.trace_file).lexically_normal().string();
  }

  std::vector<SimLog> logs(cfgs.size());
  int status = 0;
  std::string failure;
  try {
    logs = run_sweep(cfgs, o.threads);
  } catch (const SimulationError& e) {
    // Rerun serially so every completed cell and the failing partial log reach disk.
    status = kExitSolver;
    failure = e.what();
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
      try {
        logs[i] = run_scenario(cfgs[i]);
      } catch (const SimulationError& inner) {
        logs[i] = inner.partial();
        failure = "scenario " + simlog_name(cells[i]) + ": " + inner.what();
      }
    }
  }

  std::vector<std::string> written;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  std::map<std::uint64_t, bool> traced_seeds;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string name = simlog_name(cells[i]);
    {
      const fs::path path = out_dir / name;
      std::ofstream os = open_out(path);
      write_simlog(os, logs[i]);
      check_written(os, path);
    }
    const SimAggregates& a = logs[i].aggregates;
    outputs.push_back({{"file", name},
                       {"strategy", to_string(cells[i].strategy)},
                       {"capacity_mwh", cells[i].capacity_mwh},
                       {"seed", cells[i].seed},
                       {"total_revenue", a.total_revenue},
                       {"average_revenue", a.average_revenue},
                       {"solves", a.solves},
                       {"degraded_solves", a.degraded_solves},
                       {"soc_violations", a.soc_violations},
                       {"clamp_events", a.clamp_events},
                       {"max_predicted_violation", a.max_predicted_violation}});
    std::printf("%-9s %8g MWh  seed %-4llu revenue %12.4f  solves %4d  degraded %3d  soc_violations %3d\n",
                to_string(cells[i].strategy), cells[i].capacity_mwh,
                static_cast<unsigned long long>(cells[i].seed), a.total_revenue, a.solves,
                a.degraded_solves, a.soc_violations);

    if (exp.scenario.wind.mode != bess::WindMode::perfect && !traced_seeds[cells[i].seed]) {
      traced_seeds[cells[i].seed] = true;
      const std::string wname = "wind_s" + std::to_string(cells[i].seed) + ".csv";
      const fs::path path = out_dir / wname;
      std::ofstream os = open_out(path);
      bess::write_wind_trace(os, logs[i].wind);
      check_written(os, path);
      written.push_back(wname);
    }
    if (o.solver_trace) {
      const std::string tname = "solver_trace_" + name.substr(std::string("simlog_").size());
      const fs::path path = out_dir / tname;
      std::ofstream os = open_out(path);
      write_solver_trace(os, logs[i]);
      check_written(os, path);
      written.push_back(tname);
    }
  }

  if (status == 0) {
    std::optional<RevenueTable> table;
    try {
      table = mean_table(cells, logs);
    } catch (const NormalizationError& e) {
      if (compare) throw ConfigError("sweep", e.what());
    }
    if (table) {
      const fs::path path = out_dir / "revenue_table.csv";
      std::ofstream os = open_out(path);
      write_revenue_table(os, *table);
      check_written(os, path);
      written.push_back("revenue_table.csv");
      std::cout << "\nnormalized revenue (baseline uniform @ 200 MWh = " << table->baseline << ")\n";
      write_revenue_table(std::cout, *table);
    }
    // Multi-seed sweeps also get one table per seed next to the mean.
    std::map<std::uint64_t, std::vector<std::size_t>> by_seed;
    for (std::size_t i = 0; i < cells.size(); ++i) by_seed[cells[i].seed].push_back(i);
    if (table && by_seed.size() > 1) {
      for (const auto& [seed, idx] : by_seed) {
        std::vector<SweepCell> sc;
        std::vector<SimLog> sl;
        for (std::size_t i : idx) {
          sc.push_back(cells[i]);
          sl.push_back(logs[i]);
        }
        const std::string name = "revenue_table_s" + std::to_string(seed) + ".csv";
        const fs::path path = out_dir / name;
        std::ofstream os = open_out(path);
        write_revenue_table(os, mean_table(sc, sl));
        check_written(os, path);
        written.push_back(name);
      }
    }
    if (compare) write_trajectories(out_dir, cells, logs, 400.0, written);
  }

  nlohmann::ordered_json manifest;
  manifest["manifest_version"] = 1;
  manifest["tool"] = "vsmpc";
  manifest["command"] = compare ? "compare" : "run";
  manifest["build"] = {{"compiler", __VERSION__},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)}};
  manifest["experiment"] = nlohmann::ordered_json::parse(echo_experiment(pinned));
  manifest["simlogs"] = std::move(outputs);
  manifest["files"] = written;
  if (status != 0) manifest["failure"] = failure;
  const fs::path mpath = out_dir / "manifest.json";
  std::ofstream ms = open_out(mpath);
  ms << manifest.dump(2) << '\n';
  check_written(ms, mpath);

  if (status != 0) std::cerr << "vsmpc: " << failure << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-sampling MPC for wind-farm battery dispatch"};
  app.require_subcommand(1);

  Overrides o;
  std::string file;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "noise seed (replaces the sweep seeds)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--strategy", o.strategy, "vsmpc, uniform or heuristic");
    sub->add_option("--capacity", o.capacity, "battery capacity [MWh]");
    sub->add_flag("--perfect-forecast", o.perfect, "use the forecast as the actual wind");
    sub->add_flag("--solver-trace", o.solver_trace, "write per-iteration solver records");
    sub->add_option("--threads", o.threads, "worker threads (0 = hardware concurrency)");
  };

  CLI::App* run = app.add_subcommand("run", "run one scenario or sweep");
  run->add_option("file", file, "experiment JSON or run manifest");
  add_flags(run);
  CLI::App* cmp = app.add_subcommand("compare", "run a sweep and write normalized revenue tables");
  cmp->add_option("file", file, "experiment JSON or run manifest")->required();
  add_flags(cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::optional<fs::path> path = file.empty() ? std::nullopt : std::optional<fs::path>(file);
  try {
    return execute(path, o, cmp->parsed());
  } catch (const ConfigError& e) {
    std::cerr << "vsmpc: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "vsmpc: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "vsmpc: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "vsmpc: " << e.what() << '\n';
    return kExitSolver;
  }
}
