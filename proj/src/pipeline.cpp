#include "qsynth/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "qsynth/codegen.hpp"
#include "qsynth/error.hpp"
#include "qsynth/model_io.hpp"

namespace qsynth {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

json config_json(const RunConfig& c, bool with_runtime) {
  json j{{"model", c.model},       {"bits", c.bits},
         {"inputs", c.inputs},     {"goal_vref", c.goal_vref},
         {"goal_eps", c.goal_eps}, {"variant", to_string(c.variant)},
         {"exact", c.exact},       {"budget_nodes", c.budget_nodes},
         {"seed", c.seed}};
  if (with_runtime) {
    j["jobs"] = c.jobs;
    j["out"] = c.out;
  }
  return j;
}

int parse_count(const std::string& text, const std::string& name) {
  std::size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == text.size() && n >= 1 && n <= 8, "bad input count in model name " + name);
  return n;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + p.string());
  return f;
}

const char* kKindNames[] = {"other", "admissibility", "successor bounds", "self loop", "equilibrium",
                            "region membership"};

}  // namespace

void RunConfig::validate() const {
  require(!model.empty(), "model must not be empty");
  require(bits >= 1 && bits <= 12, "bits must lie in [1, 12]");
  require(inputs >= 0 && inputs <= 8, "inputs must lie in [0, 8]");
  require(goal_eps > 0, "goal epsilon must be positive");
  require(budget_nodes > 0, "node budget must be positive");
  require(jobs >= 1, "jobs must be at least 1");
  require(!out.empty(), "output directory must not be empty");
}

std::string RunConfig::to_json() const { return config_json(*this, true).dump(2); }

std::string RunConfig::hash() const { return hex_hash(fnv1a(config_json(*this, false).dump())); }

std::vector<std::string> builtin_model_names() {
  return {"buck", "buck-robust", "multibuck:n", "multibuck-robust:n"};
}

ModelSpec resolve_model(const std::string& name, int inputs) {
  const BuckParams p;
  if (name == "buck") return {single_buck(p), PlantFamily::single_buck(p), "buck"};
  if (name == "buck-robust") return {single_buck_robust(p), PlantFamily::single_buck(p), "buck-robust"};
  for (const std::string base : {"multibuck", "multibuck-robust"}) {
    int n = 0;
    if (name == base) {
      require(inputs >= 1, name + " needs an input count (" + base + ":n or --inputs)");
      n = inputs;
    } else if (name.rfind(base + ":", 0) == 0) {
      n = parse_count(name.substr(base.size() + 1), name);
      require(inputs == 0 || inputs == n, "input count conflicts with model name " + name);
    } else {
      continue;
    }
    const bool robust = base == "multibuck-robust";
    return {robust ? multi_buck_robust(p, n) : multi_buck(p, n), PlantFamily::multi_buck(p, n),
            base + std::to_string(n)};
  }
  std::error_code ec;
  if (!fs::is_regular_file(name, ec)) {
    throw Error(ErrorCode::InvalidArgument, "unknown model '" + name + "' (not a built-in name or a file)");
  }
  Dtlhs h = load_model(name);
  PlantFamily plant = PlantFamily::fixed(h);
  return {std::move(h), std::move(plant), fs::path(name).stem().string()};
}

// ---------------------------------------------------------------------------

bool SynthRun::empty_goal() const {
  for (std::uint64_t c = 0; c < controller.num_cells(); ++c) {
    if (controller.goal(c)) return false;
  }
  return true;
}

std::string SynthRun::source_file_name() const {
  return tag + "_" + std::to_string(config.bits) + "bits_controller.c";
}

SynthRun run_synthesis(const RunConfig& cfg) {
  cfg.validate();
  const ModelSpec spec = resolve_model(cfg.model, cfg.inputs);
  const Dtlhs& h = spec.model;
  require(!h.goal_var.empty(), "model has no goal variable");
  const std::string mh = model_hash(h);
  const std::string ch = cfg.hash();
  std::ostringstream goal;
  goal << '|' << h.goal_var << " - " << cfg.goal_vref << "| <= " << cfg.goal_eps;

  AbstractionOptions opt;
  opt.exact = cfg.exact;
  opt.variant = cfg.variant;
  opt.jobs = cfg.jobs;
  opt.milp.node_budget = cfg.budget_nodes;

  spdlog::info("synthesizing {} at b = {} ({} variant{})", spec.tag, cfg.bits, to_string(cfg.variant),
               cfg.exact ? ", exact successors" : "");
  const std::clock_t start = std::clock();
  ControlAbstraction abs = AbstractionBuilder(h, QuantSchema::uniform(h, cfg.bits), opt)
                               .build(RegionSpec::default_for(h, cfg.goal_vref, cfg.goal_eps));
  Controller k = synthesize(abs);
  const double cpu = static_cast<double>(std::clock() - start) / CLOCKS_PER_SEC;

  const SourceInfo info{spec.tag, mh, goal.str(), cfg.bits, h.inputs.size(), ch};
  std::string src = emit_source(compile_controller(k), compile_region(k), k.schema(), info);
  const auto lines = static_cast<std::size_t>(std::count(src.begin(), src.end(), '\n'));
  spdlog::info("outcome {}: {} of {} cells controllable, max rank {}", to_string(k.outcome()),
               k.controllable_count(), k.num_cells(), k.max_rank());
  return SynthRun{cfg,          spec.tag,  mh,           ch,   goal.str(), std::move(abs), std::move(k),
                  std::move(src), lines,   cpu,          peak_memory_kb()};
}

void write_stats_report(std::ostream& out, const SynthRun& run) {
  const AbstractionStats& st = run.abstraction.stats();
  const Controller& k = run.controller;
  const bool multi = run.tag.rfind("multibuck", 0) == 0;
  out << "# model=" << run.tag << " model_hash=" << run.model_hash << " config_hash=" << run.config_hash << '\n'
      << "# CPU (s) and MEM (kB, peak resident) are measured on this machine, not comparable to published timings\n"
      << "# Arcs counts the maximum abstraction; μ is the synthesis outcome\n";
  if (multi) out << std::left << std::setw(4) << "n";
  out << std::left << std::setw(4) << "b" << std::setw(12) << "Arcs" << std::setw(10) << "MaxLoops"
      << std::setw(10) << "LoopFrac" << std::setw(10) << "CPU" << std::setw(10) << "MEM" << std::setw(10)
      << "|K|" << "μ\n";
  if (multi) out << std::setw(4) << run.abstraction.num_inputs();
  out << std::setw(4) << run.config.bits << std::setw(12) << st.arcs_max << std::setw(10) << st.max_loops
      << std::setw(10) << std::setprecision(4) << std::fixed << st.loop_frac << std::setw(10)
      << std::setprecision(2) << run.cpu_seconds << std::setw(10) << run.mem_kb << std::setw(10)
      << run.source_lines << to_string(k.outcome()) << '\n';
  out << std::defaultfloat << std::setprecision(6) << '\n'
      << "variant=" << to_string(run.abstraction.variant()) << '\n'
      << "exact=" << (run.abstraction.exact() ? 1 : 0) << '\n'
      << "arcs_min=" << st.arcs_min << '\n'
      << "kept_loops=" << st.kept_loops << '\n'
      << "cells=" << k.num_cells() << '\n'
      << "controllable_cells=" << k.controllable_count() << '\n'
      << "controllable_fraction=" << k.controllable_fraction() << '\n'
      << "max_rank=" << k.max_rank() << '\n'
      << "budget_events=" << st.budget_events << '\n'
      << "solver_errors=" << st.solver_errors << '\n';
  if (!k.diagnostic().empty()) out << "diagnostic=" << k.diagnostic() << '\n';
}

void write_milp_report(std::ostream& out, const SynthRun& run) {
  const auto& kinds = run.abstraction.stats().milp.kinds;
  out << "# model=" << run.tag << " model_hash=" << run.model_hash << " config_hash=" << run.config_hash << '\n'
      << "# times are wall-clock seconds on this machine, not comparable to published timings\n"
      << std::left << std::setw(6) << "kind" << std::setw(20) << "query" << std::setw(12) << "Num" << std::setw(14)
      << "Avg" << "Time\n";
  long total = 0;
  double seconds = 0.0;
  for (std::size_t i = 1; i < kinds.size(); ++i) {
    out << std::setw(6) << i << std::setw(20) << kKindNames[i] << std::setw(12) << kinds[i].count << std::setw(14)
        << std::scientific << std::setprecision(3) << kinds[i].average_seconds() << std::fixed
        << std::setprecision(3) << kinds[i].total_seconds << '\n';
    total += kinds[i].count;
    seconds += kinds[i].total_seconds;
  }
  out << std::setw(6) << "all" << std::setw(20) << "" << std::setw(12) << total << std::setw(14) << ""
      << std::fixed << std::setprecision(3) << seconds << '\n';
}

std::string provenance_line(const std::string& model_hash, const std::string& config_hash, int bits,
                            std::size_t inputs) {
  return "# model_hash=" + model_hash + " config_hash=" + config_hash + " bits=" + std::to_string(bits) +
         " inputs=" + std::to_string(inputs);
}

void write_artifacts(const SynthRun& run) {
  const fs::path dir(run.config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  const std::string prov =
      provenance_line(run.model_hash, run.config_hash, run.config.bits, run.abstraction.num_inputs());

  open_out(dir / "run_config.json") << run.config.to_json() << '\n';
  {
    auto f = open_out(dir / "abstraction_stats.txt");
    write_stats_report(f, run);
  }
  {
    auto f = open_out(dir / "milp_stats.txt");
    write_milp_report(f, run);
  }
  {
    auto f = open_out(dir / "abstraction.csv");
    f << prov << '\n';
    write_abstraction_csv(f, run.abstraction);
  }
  {
    auto f = open_out(dir / "controller.csv");
    f << prov << '\n';
    write_controller_csv(f, run.controller);
  }
  {
    auto f = open_out(dir / "region.csv");
    f << prov << '\n';
    write_region_csv(f, run.controller);
  }
  open_out(dir / run.source_file_name()) << run.source;
}

// ---------------------------------------------------------------------------

Policy ControllerFile::policy(const QuantSchema& s) const {
  Policy p{s, std::vector<std::int64_t>(s.cell_count(), kFault), std::vector<int>(s.cell_count(), -1)};
  for (const auto& e : entries) {
    bool fits = e.cell.size() == s.axes().size() && e.action < action_count(inputs);
    for (std::size_t i = 0; fits && i < e.cell.size(); ++i) fits = e.cell[i] >= 0 && e.cell[i] < s.axes()[i].count();
    if (!fits) {
      throw Error(ErrorCode::InvalidArgument,
                  "controller entry for cell " + cell_text(e.cell) + " does not fit the quantization");
    }
    const std::uint64_t c = s.index_of(e.cell);
    p.action[c] = e.action;
    p.rank[c] = e.rank;
  }
  return p;
}

ControllerFile read_controller_csv(std::istream& in) {
  auto bad = [](const std::string& what) -> Error { return Error(ErrorCode::Io, "controller file: " + what); };
  ControllerFile f;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw bad("missing provenance line");
  std::istringstream words(line.substr(2));
  std::string kv;
  while (words >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw bad("malformed provenance field " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    try {
      if (key == "model_hash") f.model_hash = val;
      if (key == "config_hash") f.config_hash = val;
      if (key == "bits") f.bits = std::stoi(val);
      if (key == "inputs") f.inputs = std::stoul(val);
    } catch (const std::exception&) {
      throw bad("malformed provenance field " + kv);
    }
  }
  if (f.model_hash.empty() || f.bits <= 0) throw bad("provenance line lacks model_hash or bits");
  if (!std::getline(in, line) || line != "cell,action,rank") throw bad("missing column header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw bad("malformed row '" + line + "'");
    ControllerEntry e;
    try {
      std::istringstream cell(line.substr(0, c1));
      std::string k;
      while (std::getline(cell, k, ';')) {
        std::size_t used = 0;
        e.cell.push_back(std::stoll(k, &used));
        if (used != k.size()) throw std::invalid_argument(k);
      }
      const std::string bits = line.substr(c1 + 1, c2 - c1 - 1);
      if (bits.size() != f.inputs || bits.find_first_not_of("01") != std::string::npos) {
        throw std::invalid_argument(bits);
      }
      for (char b : bits) e.action = (e.action << 1) | static_cast<std::uint32_t>(b - '0');
      std::size_t used = 0;
      const std::string rank = line.substr(c2 + 1);
      e.rank = std::stoi(rank, &used);
      if (used != rank.size()) throw std::invalid_argument(rank);
    } catch (const std::exception&) {
      throw bad("malformed row '" + line + "'");
    }
    if (e.cell.empty()) throw bad("malformed row '" + line + "'");
    f.entries.push_back(std::move(e));
  }
  return f;
}

ControllerFile read_controller_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read controller file " + path);
  return read_controller_csv(in);
}

void write_policy_region_csv(std::ostream& out, const Policy& p) {
  const QuantSchema& s = p.schema;
  out << "cell";
  for (const auto& ax : s.axes()) out << ',' << ax.var << "_lo," << ax.var << "_hi";
  out << ",controllable,goal\n";
  const auto precision = out.precision(17);
  for (std::uint64_t c = 0; c < s.cell_count(); ++c) {
    const Cell cell = s.cell_at(c);
    out << cell_text(cell);
    for (const auto& b : s.cell_box(cell).bounds) out << ',' << b.lo << ',' << b.hi;
    const bool in = p.in_region(c);
    const bool goal = in && !p.rank.empty() && p.rank[c] == 0;
    out << ',' << (in ? 1 : 0) << ',' << (goal ? 1 : 0) << '\n';
  }
  out.precision(precision);
}

// ---------------------------------------------------------------------------

SimulateResult run_simulation(const SimulateRequest& req) {
  req.config.validate();
  require(req.steps >= 0, "steps must be non-negative");
  require(req.trials >= 1, "trials must be at least 1");
  const ModelSpec spec = resolve_model(req.config.model, req.config.inputs);
  const ControllerFile file = read_controller_file(req.controller_path);
  const std::string mh = model_hash(spec.model);
  if (file.model_hash != mh) {
    throw Error(ErrorCode::HashMismatch, "controller was built for model hash " + file.model_hash +
                                             ", the selected model has " + mh);
  }
  if (file.inputs != spec.model.inputs.size()) {
    throw Error(ErrorCode::HashMismatch, "controller input count does not match the model");
  }
  const QuantSchema schema = QuantSchema::uniform(spec.model, file.bits);
  const Policy policy = file.policy(schema);

  SimConfig cfg;
  cfg.steps = req.steps;
  cfg.initial = req.initial;
  cfg.disturbance = req.disturbance;
  cfg.rho_load = spec.plant.params().rho_load;
  cfg.rho_supply = spec.plant.params().rho_supply;
  cfg.seed = req.config.seed;
  cfg.goal = RegionSpec::default_for(spec.model, req.config.goal_vref, req.config.goal_eps).goal;

  SimulateResult res;
  res.model_hash = mh;
  res.summary = monte_carlo(spec.plant, policy, cfg, req.trials, req.config.jobs, &res.traces);
  return res;
}

void write_simulation(const SimulateRequest& req, const SimulateResult& res) {
  const fs::path dir(req.config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  {
    auto f = open_out(dir / "trace.csv");
    f << "# model_hash=" << res.model_hash << " seed=" << req.config.seed
      << " disturbance=" << to_string(req.disturbance) << '\n';
    for (std::size_t t = 0; t < res.traces.size(); ++t) {
      std::ostringstream one;
      write_trace_csv(one, res.traces[t]);
      std::istringstream lines(one.str());
      std::string line;
      std::getline(lines, line);
      if (t == 0) f << "trial," << line << '\n';
      while (std::getline(lines, line)) f << t << ',' << line << '\n';
    }
  }
  auto f = open_out(dir / "summary.txt");
  f << "# closed-loop Monte-Carlo validation, a check beyond the abstraction guarantee\n"
    << "model_hash=" << res.model_hash << '\n'
    << "disturbance=" << to_string(req.disturbance) << '\n'
    << "steps=" << req.steps << '\n';
  write_summary(f, res.summary);
}

}  // namespace qsynth
