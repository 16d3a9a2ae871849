#include "vsmpc/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace vsmpc {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

const char* type_name(const json& j) {
  if (j.is_number_unsigned()) return "unsigned integer";
  if (j.is_number_integer()) return "integer";
  return j.type_name();
}

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(path_, std::string("expected object, got ") + type_name(j_));
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) mismatch(key, "number", *v);
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) mismatch(key, "integer", *v);
      out = v->get<int>();
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) out = as_seed(*v, join(path_, key));
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) mismatch(key, "string", *v);
      out = v->get<std::string>();
    }
  }

  template <class F>
  void object(const std::string& key, F&& read) {
    if (const json* v = find(key)) {
      ObjectReader sub(*v, join(path_, key));
      read(sub);
      sub.finish();
    }
  }

  template <class F>
  void array(const std::string& key, F&& read_item) {
    if (const json* v = find(key)) {
      if (!v->is_array()) mismatch(key, "array", *v);
      for (std::size_t i = 0; i < v->size(); ++i) {
        read_item((*v)[i], join(path_, key) + "[" + std::to_string(i) + "]");
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }
  }

  static std::uint64_t as_seed(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError(path, std::string("expected unsigned integer, got ") + type_name(v));
    }
    return v.get<std::uint64_t>();
  }

 private:
  [[noreturn]] void mismatch(const std::string& key, const char* expected, const json& v) const {
    throw ConfigError(join(path_, key), std::string("expected ") + expected + ", got " + type_name(v));
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Parse>
auto enum_value(const std::string& text, const std::string& path, Parse parse) {
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

void read_scenario(ObjectReader& r, ScenarioSettings& s) {
  r.number("capacity_mwh", s.capacity_mwh);
  r.number("nameplate_mw", s.nameplate_mw);
  r.number("soc_min", s.soc_min);
  r.number("soc_max", s.soc_max);
  r.number("x0", s.x0);
  r.object("prices", [&](ObjectReader& p) {
    p.number("generation", s.prices.generation);
    p.number("reserve_scheduling", s.prices.reserve_scheduling);
    p.number("reserve_dispatch", s.prices.reserve_dispatch);
    p.number("ramping", s.prices.ramping);
  });
  r.integer("horizon_steps", s.horizon_steps);
  r.number("horizon_hours", s.horizon_hours);
  r.number("alpha_lo", s.alpha_lo);
  r.number("alpha_hi", s.alpha_hi);
  r.number("dt_mpc_hours", s.dt_mpc_hours);
  r.number("dt_sim_hours", s.dt_sim_hours);
  r.number("sim_hours", s.sim_hours);
  std::string strategy = to_string(s.strategy);
  r.string("strategy", strategy);
  s.strategy = enum_value(strategy, "scenario.strategy", strategy_from_string);
  r.seed("seed", s.seed);
  r.object("wind", [&](ObjectReader& w) {
    std::string mode = bess::to_string(s.wind.mode);
    w.string("mode", mode);
    s.wind.mode = enum_value(mode, "scenario.wind.mode", bess::wind_mode_from_string);
    w.number("noise_sigma_mw", s.wind.noise_sigma_mw);
    w.string("trace_file", s.wind.trace_file);
  });
  r.object("solver", [&](ObjectReader& o) {
    o.number("tol_feas", s.solver.tol_feas);
    o.number("tol_stat", s.solver.tol_stat);
    o.integer("max_outer", s.solver.max_outer);
    o.integer("max_inner", s.solver.max_inner);
  });
}

ScenarioConfig base_config(const ScenarioSettings& s) {
  ScenarioConfig cfg;
  cfg.bess.nameplate = s.nameplate_mw;
  cfg.bess.capacity = s.capacity_mwh;
  cfg.bess.soc_min = s.soc_min;
  cfg.bess.soc_max = s.soc_max;
  cfg.bess.x0 = s.x0;
  cfg.bess.prices = s.prices;
  cfg.bess.steps = s.horizon_steps;
  cfg.bess.horizon = s.horizon_hours;
  cfg.bess.alpha_lo = s.alpha_lo;
  cfg.bess.alpha_hi = s.alpha_hi;
  cfg.bess.dt_mpc = s.dt_mpc_hours;
  cfg.wind.mode = s.wind.mode;
  cfg.wind.noise_sigma = s.wind.noise_sigma_mw;
  cfg.wind.seed = s.seed;
  cfg.strategy = s.strategy;
  cfg.horizon_hours = s.sim_hours;
  cfg.dt_sim = s.dt_sim_hours;
  cfg.solver.tol_feas = s.solver.tol_feas;
  cfg.solver.tol_stat = s.solver.tol_stat;
  cfg.solver.max_outer = s.solver.max_outer;
  cfg.solver.max_inner = s.solver.max_inner;
  return cfg;
}

void validate(const ExperimentFile& exp) {
  const ScenarioSettings& s = exp.scenario;
  try {
    base_config(s).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", e.what());
  }
  if (s.solver.max_outer < 1 || s.solver.max_inner < 1) {
    throw ConfigError("scenario.solver", "iteration limits must be positive");
  }
  if (!(s.solver.tol_feas > 0.0) || !(s.solver.tol_stat > 0.0)) {
    throw ConfigError("scenario.solver", "tolerances must be positive");
  }
  if (s.wind.mode == bess::WindMode::replay && s.wind.trace_file.empty()) {
    throw ConfigError("scenario.wind.trace_file", "required in replay mode");
  }
  for (std::size_t i = 0; i < exp.capacities_mwh.size(); ++i) {
    if (!(exp.capacities_mwh[i] > 0.0)) {
      throw ConfigError("sweep.capacities_mwh[" + std::to_string(i) + "]", "must be positive");
    }
  }
}

}  // namespace

ExperimentFile parse_experiment(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  ExperimentFile exp;
  ObjectReader top(doc, "");
  top.object("scenario", [&](ObjectReader& r) { read_scenario(r, exp.scenario); });
  top.object("sweep", [&](ObjectReader& r) {
    r.array("capacities_mwh", [&](const json& v, const std::string& path) {
      if (!v.is_number()) throw ConfigError(path, std::string("expected number, got ") + type_name(v));
      exp.capacities_mwh.push_back(v.get<double>());
    });
    r.array("strategies", [&](const json& v, const std::string& path) {
      if (!v.is_string()) throw ConfigError(path, std::string("expected string, got ") + type_name(v));
      exp.strategies.push_back(enum_value(v.get<std::string>(), path, strategy_from_string));
    });
    r.array("seeds", [&](const json& v, const std::string& path) {
      exp.seeds.push_back(ObjectReader::as_seed(v, path));
    });
  });
  top.string("output_dir", exp.output_dir);
  top.finish();
  validate(exp);
  return exp;
}

std::string echo_experiment(const ExperimentFile& exp) {
  const ScenarioSettings& s = exp.scenario;
  ojson scenario;
  scenario["capacity_mwh"] = s.capacity_mwh;
  scenario["nameplate_mw"] = s.nameplate_mw;
  scenario["soc_min"] = s.soc_min;
  scenario["soc_max"] = s.soc_max;
  scenario["x0"] = s.x0;
  scenario["prices"] = {{"generation", s.prices.generation},
                        {"reserve_scheduling", s.prices.reserve_scheduling},
                        {"reserve_dispatch", s.prices.reserve_dispatch},
                        {"ramping", s.prices.ramping}};
  scenario["horizon_steps"] = s.horizon_steps;
  scenario["horizon_hours"] = s.horizon_hours;
  scenario["alpha_lo"] = s.alpha_lo;
  scenario["alpha_hi"] = s.alpha_hi;
  scenario["dt_mpc_hours"] = s.dt_mpc_hours;
  scenario["dt_sim_hours"] = s.dt_sim_hours;
  scenario["sim_hours"] = s.sim_hours;
  scenario["strategy"] = to_string(s.strategy);
  scenario["seed"] = s.seed;
  scenario["wind"] = {{"mode", bess::to_string(s.wind.mode)},
                      {"noise_sigma_mw", s.wind.noise_sigma_mw},
                      {"trace_file", s.wind.trace_file}};
  scenario["solver"] = {{"tol_feas", s.solver.tol_feas},
                        {"tol_stat", s.solver.tol_stat},
                        {"max_outer", s.solver.max_outer},
                        {"max_inner", s.solver.max_inner}};

  ojson strategies = ojson::array();
  for (Strategy st : exp.strategies) strategies.push_back(to_string(st));
  ojson doc;
  doc["scenario"] = std::move(scenario);
  doc["sweep"] = {{"capacities_mwh", exp.capacities_mwh},
                  {"strategies", std::move(strategies)},
                  {"seeds", exp.seeds}};
  doc["output_dir"] = exp.output_dir;
  return doc.dump(2) + "\n";
}

ExperimentFile load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": file not found or unreadable");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  // A run manifest carries the experiment it was produced from.
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": malformed JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("manifest_version")) {
    if (!doc.contains("experiment")) throw ConfigError("experiment", "manifest without experiment");
    return parse_experiment(doc["experiment"].dump());
  }
  return parse_experiment(text);
}

std::vector<SweepCell> sweep_cells(const ExperimentFile& exp) {
  const ScenarioSettings& s = exp.scenario;
  const std::vector<double> caps = exp.capacities_mwh.empty() ? std::vector<double>{s.capacity_mwh}
                                                              : exp.capacities_mwh;
  const std::vector<Strategy> strategies =
      exp.strategies.empty() ? std::vector<Strategy>{s.strategy} : exp.strategies;
  const std::vector<std::uint64_t> seeds =
      exp.seeds.empty() ? std::vector<std::uint64_t>{s.seed} : exp.seeds;
  std::vector<SweepCell> cells;
  for (std::uint64_t seed : seeds) {
    for (double cap : caps) {
      for (Strategy st : strategies) cells.push_back({cap, st, seed});
    }
  }
  return cells;
}

ScenarioConfig make_scenario(const ExperimentFile& exp, const SweepCell& cell,
                             const std::filesystem::path& base_dir) {
  ScenarioConfig cfg = base_config(exp.scenario);
  cfg.bess.capacity = cell.capacity_mwh;
  cfg.strategy = cell.strategy;
  cfg.wind.seed = cell.seed;
  if (cfg.wind.mode == bess::WindMode::replay) {
    std::filesystem::path trace = exp.scenario.wind.trace_file;
    if (trace.is_relative()) trace = base_dir / trace;
    std::ifstream in(trace);
    if (!in) throw IoError(trace.string() + ": wind trace not found or unreadable");
    try {
      cfg.wind.replay = bess::read_wind_trace(in);
    } catch (const std::exception& e) {
      throw ConfigError("scenario.wind.trace_file", trace.string() + ": " + e.what());
    }
  }
  return cfg;
}

std::string simlog_name(const SweepCell& cell) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "simlog_%s_%g_s%llu.csv", to_string(cell.strategy),
                cell.capacity_mwh, static_cast<unsigned long long>(cell.seed));
  return buf;
}

}  // namespace vsmpc
