// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
//   vsmpc_acceptance --cli path/to/vsmpc --work scratch/dir

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "vsmpc/bess.hpp"
#include "vsmpc/experiment.hpp"
#include "vsmpc/numdiff.hpp"
#include "vsmpc/simulator.hpp"
#include "vsmpc/timewarp.hpp"

namespace fs = std::filesystem;
using namespace vsmpc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Worst constraint/solver figures over every closed-loop run.
struct Discipline {
  double max_predicted_violation = 0.0;
  int degraded = 0;
  int solves = 0;
  int perfect_soc_violations = 0;
  double worst_soc_excursion = 0.0;

  void add(const ScenarioConfig& cfg, const SimLog& log) {
    const SimAggregates& a = log.aggregates;
    max_predicted_violation = std::max(max_predicted_violation, a.max_predicted_violation);
    degraded += a.degraded_solves;
    solves += a.solves;
    if (cfg.wind.mode == bess::WindMode::perfect) {
      perfect_soc_violations += a.soc_violations;
      for (const SimRecord& r : log.records) {
        worst_soc_excursion = std::max({worst_soc_excursion, r.soc_next - cfg.bess.soc_max,
                                        cfg.bess.soc_min - r.soc_next});
      }
    }
  }
};

Discipline discipline;

// ---------------------------------------------------------------------------

void warp_properties() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  // Draw beta2 first, then beta1 inside the admissible interval for that beta2.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int bad = 0;
  double worst_diff = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double b2 = unit(rng) * (4.0 - 10 * kBetaFloor) / 100.0;
    const double lo = std::max(kBetaFloor, (1.0 - 100.0 * b2) / 10.0);
    const double hi = (4.0 - 100.0 * b2) / 10.0;
    const WarpParams p{lo + unit(rng) * (hi - lo), b2, 10, 1.0, 1.0, 4.0};
    const HorizonGrid g = warp_intervals(p);
    double sum = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      sum += g.deltas[j];
      if (g.deltas[j] < kBetaFloor) ++bad;
      if (j > 0) worst_diff = std::max(worst_diff, std::abs(g.deltas[j] - g.deltas[j - 1] - 2 * b2));
    }
    if (sum < 1.0 - 1e-12 || sum > 4.0 + 1e-12) ++bad;
  }
  const double secs = seconds_since(t0);
  report("AC1 warp properties", bad == 0 && worst_diff <= 1e-12 && secs < 1.0,
         format("1000 draws, %d violations, max |diff - 2 beta2| = %.2e, %.3f s", bad, worst_diff, secs));
}

void solver_oracles() {
  const auto t0 = Clock::now();
  const double inf = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  bool all_converged = true;
  auto run = [&](const NlpProblem& p, const Vec& z0, const Vec& z_star) {
    const SolveResult r = solve(p, z0);
    all_converged = all_converged && r.status == SolveStatus::converged;
    worst = std::max(worst, (r.z_opt - z_star).cwiseAbs().maxCoeff());
  };
  {
    NlpProblem p;
    p.dim = 1;
    p.lower = Vec::Constant(1, -inf);
    p.upper = Vec::Constant(1, inf);
    p.objective = [](const Vec& z) { return (z[0] - 1.0) * (z[0] - 1.0); };
    p.ineq = [](const Vec& z) { return Vec::Constant(1, z[0] - 0.5); };
    run(p, Vec::Zero(1), Vec::Constant(1, 0.5));
  }
  {
    NlpProblem p;
    p.dim = 2;
    p.lower = Vec::Constant(2, -inf);
    p.upper = Vec::Constant(2, inf);
    p.objective = [](const Vec& z) { return z.squaredNorm(); };
    p.eq = [](const Vec& z) { return Vec::Constant(1, z.sum() - 1.0); };
    run(p, Vec::Zero(2), Vec::Constant(2, 0.5));
  }
  {
    NlpProblem p;
    p.dim = 2;
    p.lower = Vec::Zero(2);
    p.upper = Vec::Ones(2);
    p.objective = [](const Vec& z) { return -z[0] - 1.03 * z[1]; };
    p.ineq = [](const Vec& z) { return Vec::Constant(1, z.sum() - 1.0); };
    run(p, Vec::Constant(2, 0.3), (Vec(2) << 0.0, 1.0).finished());
  }

  // Analytic objective gradient of the assembled battery problem against
  // central differences at random points inside the warp band.
  bess::BessParams bp;
  const OcpProblem prob(bess::build_bess_ocp(bp, {}, 120.0), Vec::Constant(1, 0.5), 4.0);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, bp.nameplate), unit(0.0, 1.0);
  double worst_rel = 0.0;
  for (int k = 0; k < 20; ++k) {
    Vec z(12);
    for (int j = 0; j < 10; ++j) z[j] = u(rng);
    z[11] = unit(rng) * 0.02;
    const double lo = std::max(kBetaFloor, (1.0 - 100.0 * z[11]) / 10.0);
    const double hi = (4.0 - 100.0 * z[11]) / 10.0;
    z[10] = lo + unit(rng) * (hi - lo);
    const Vec g = prob.evaluate(z, true).gradient;
    const Vec fd = finite_diff_gradient([&](const Vec& v) { return prob.evaluate(v, false).objective; }, z);
    worst_rel = std::max(worst_rel, (g - fd).norm() / std::max(1.0, fd.norm()));
  }
  const double secs = seconds_since(t0);
  report("AC2 solver oracles", all_converged && worst <= 1e-4 && worst_rel <= 1e-5 && secs < 5.0,
         format("max |z - z*| = %.2e, gradient rel. error = %.2e over 20 points, %.2f s", worst, worst_rel,
                secs));
}

void uniform_equivalence() {
  const auto t0 = Clock::now();
  ScenarioConfig uniform;
  uniform.strategy = Strategy::uniform;
  ScenarioConfig collapsed = uniform;
  collapsed.strategy = Strategy::vsmpc;
  collapsed.beta_box = BetaBox{0.1, 0.1, 0.0, 0.0};
  const auto logs = run_sweep({uniform, collapsed});
  discipline.add(uniform, logs[0]);
  discipline.add(collapsed, logs[1]);
  double worst = 0.0;
  for (std::size_t i = 0; i < logs[0].records.size(); ++i) {
    worst = std::max(worst, std::abs(logs[0].records[i].u - logs[1].records[i].u));
  }
  const double secs = seconds_since(t0);
  report("AC3 uniform equivalence", worst <= 1e-4 && secs < 120.0,
         format("max per-step |u_vs - u_uniform| = %.2e MW over %zu steps, %.1f s", worst,
                logs[0].records.size(), secs));
}

// Revenue per (capacity, strategy), averaged over seeds.
using RevenueGrid = std::map<double, std::map<Strategy, double>>;

RevenueGrid sweep(bess::WindMode mode, const std::vector<std::uint64_t>& seeds) {
  std::vector<ScenarioConfig> cfgs;
  for (std::uint64_t seed : seeds) {
    for (double cap : {200.0, 400.0, 800.0, 1200.0}) {
      for (Strategy s : {Strategy::heuristic, Strategy::uniform, Strategy::vsmpc}) {
        ScenarioConfig c;
        c.bess.capacity = cap;
        c.strategy = s;
        c.wind.mode = mode;
        c.wind.seed = seed;
        cfgs.push_back(c);
      }
    }
  }
  const auto logs = run_sweep(cfgs);
  RevenueGrid grid;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    discipline.add(cfgs[i], logs[i]);
    grid[cfgs[i].bess.capacity][cfgs[i].strategy] += logs[i].aggregates.total_revenue / seeds.size();
  }
  return grid;
}

void check_ordering(const char* id, const RevenueGrid& g, double secs, double budget) {
  bool ok = secs < budget;
  std::ostringstream detail;
  double prev_uniform = -std::numeric_limits<double>::infinity();
  for (const auto& [cap, row] : g) {
    const double vs = row.at(Strategy::vsmpc), un = row.at(Strategy::uniform), he = row.at(Strategy::heuristic);
    ok = ok && vs >= un - 0.005 * std::abs(un);
    if (cap >= 400.0) ok = ok && un > he;
    ok = ok && un >= prev_uniform;
    prev_uniform = un;
    detail << format("%g MWh: vs %.1f / uni %.1f / heu %.1f (%+.2f%%); ", cap, vs, un, he,
                     100.0 * (vs - un) / un);
  }
  detail << format("%.0f s", secs);
  report(id, ok, detail.str());
}

void perfect_sweep() {
  const auto t0 = Clock::now();
  const RevenueGrid g = sweep(bess::WindMode::perfect, {1});
  check_ordering("AC4 perfect-forecast ordering", g, seconds_since(t0), 900.0);
}

void noisy_sweep() {
  const auto t0 = Clock::now();
  const RevenueGrid g = sweep(bess::WindMode::noisy, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  check_ordering("AC5 noisy-forecast ordering (10-seed mean)", g, seconds_since(t0), 1800.0);
}

void constraint_discipline() {
  const Discipline& d = discipline;
  report("AC6 constraint discipline",
         d.max_predicted_violation <= 1e-6 && d.degraded == 0 && d.perfect_soc_violations == 0,
         format("%d solves, %d degraded, max predicted violation %.2e, perfect-forecast SOC "
                "excursions %d (worst %.2e)",
                d.solves, d.degraded, d.max_predicted_violation, d.perfect_soc_violations,
                d.worst_soc_excursion));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void manifest_determinism(const std::string& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  {
    std::ofstream os(work / "exp.json");
    os << R"({"scenario": {"wind": {"mode": "noisy"}},
              "sweep": {"capacities_mwh": [400], "strategies": ["heuristic", "vsmpc"], "seeds": [5]},
              "output_dir": ")" << (work / "first").string() << "\"}\n";
  }
  const std::string q = "\"";
  const int rc1 = std::system((q + cli + q + " run " + q + (work / "exp.json").string() + q + " > " + q +
                               (work / "first.txt").string() + q).c_str());
  const int rc2 = std::system((q + cli + q + " run " + q + (work / "first" / "manifest.json").string() + q +
                               " --out " + q + (work / "second").string() + q + " > " + q +
                               (work / "second.txt").string() + q).c_str());
  int compared = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(work / "first")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("simlog_", 0) != 0 && name.rfind("wind_", 0) != 0) continue;
    ++compared;
    const std::string a = slurp(entry.path());
    if (!a.empty() && a == slurp(work / "second" / name)) ++identical;
  }
  report("AC7 manifest determinism", rc1 == 0 && rc2 == 0 && compared == 3 && identical == compared,
         format("exit codes %d/%d, %d of %d output files byte-identical after rerun from manifest", rc1, rc2,
                identical, compared));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string cli, work = "acceptance_work";
  app.add_option("--cli", cli, "path to the vsmpc executable")->required();
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);

  try {
    warp_properties();
    solver_oracles();
    uniform_equivalence();
    perfect_sweep();
    noisy_sweep();
    constraint_discipline();
    manifest_determinism(cli, work);
  } catch (const std::exception& e) {
    std::printf("FAIL aborted: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
