// qsynth: synthesize, simulate and inspect quantized controllers.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsynth/qsynth.h"

namespace {

enum Exit {
  kOk = 0,
  kError = 1,
  kUsage = 2,
  kEmptyGoal = 3,
  kViolation = 4,
  kHashMismatch = 5,
};

const char* kOutcomes[] = {"Sol", "NoSol", "Unk"};

struct Common {
  std::string model = "buck";
  int bits = 8;
  int inputs = 0;
  double goal_vref = 5.0;
  double goal_eps = 0.5;
  std::string variant = "min";
  bool exact = false;
  long budget_nodes = 1'000'000;
  int jobs = 1;
  unsigned long long seed = 1;
  std::string out = ".";

  qs_synth_options options() const {
    qs_synth_options o;
    qs_synth_options_default(&o);
    o.model = model.c_str();
    o.bits = bits;
    o.inputs = inputs;
    o.goal_vref = goal_vref;
    o.goal_eps = goal_eps;
    o.variant = variant == "max" ? QS_VARIANT_MAX : QS_VARIANT_MIN;
    o.exact = exact;
    o.budget_nodes = budget_nodes;
    o.jobs = jobs;
    o.seed = seed;
    o.out = out.c_str();
    return o;
  }
};

void add_common(CLI::App* cmd, Common& c, bool synthesis_flags) {
  cmd->add_option("--model", c.model, "buck, buck-robust, multibuck:n, multibuck-robust:n or a model file")
      ->capture_default_str();
  cmd->add_option("--inputs", c.inputs, "number of inputs for multibuck names without :n")
      ->check(CLI::Range(0, 8));
  cmd->add_option("--goal-vref", c.goal_vref, "goal centre for the goal variable")->capture_default_str();
  cmd->add_option("--goal-eps", c.goal_eps, "goal half width")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  if (synthesis_flags) {
    cmd->add_option("--bits", c.bits, "quantization bits per state variable")
        ->check(CLI::Range(1, 12))
        ->capture_default_str();
    cmd->add_option("--variant", c.variant, "abstraction variant")
        ->check(CLI::IsMember({"min", "max"}))
        ->capture_default_str();
    cmd->add_option("--budget-nodes", c.budget_nodes, "branch-and-bound node budget per query")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("--exact", c.exact, "per-candidate successor checks instead of bounding boxes");
  }
}

int report_error(qs_status s) {
  std::fprintf(stderr, "qsynth: %s: %s\n", qs_status_string(s), qs_last_error());
  if (s == QS_ERR_HASH_MISMATCH) return kHashMismatch;
  return s == QS_ERR_INVALID_ARGUMENT ? kUsage : kError;
}

int cmd_models() {
  char buf[512];
  const qs_status s = qs_models_list(buf, sizeof buf);
  if (s != QS_OK) return report_error(s);
  std::fputs(buf, stdout);
  return kOk;
}

int cmd_synth(const Common& c) {
  const qs_synth_options o = c.options();
  qs_synth_result r;
  const qs_status s = qs_synth(&o, &r);
  if (s != QS_OK) return report_error(s);
  std::printf("outcome=%s\ncontrollable=%llu/%llu\nmax_rank=%d\narcs=%ld\nmax_loops=%ld\n"
              "cpu_seconds=%.2f\nsource_lines=%lu\nmodel_hash=%s\nconfig_hash=%s\n",
              kOutcomes[r.outcome], r.controllable_cells, r.cells, r.max_rank, r.arcs, r.max_loops,
              r.cpu_seconds, r.source_lines, r.model_hash, r.config_hash);
  if (r.budget_events > 0) std::printf("budget_events=%ld\n", r.budget_events);
  if (r.outcome == QS_NOSOL && r.empty_goal) {
    std::fprintf(stderr, "qsynth: no goal cell is controllable at this quantization\n");
    return kEmptyGoal;
  }
  return kOk;
}

int cmd_simulate(const Common& c, const std::string& controller, const std::vector<double>& init, int steps,
                 int trials, const std::string& disturb) {
  const qs_synth_options o = c.options();
  qs_sim_options so;
  qs_sim_options_default(&so);
  so.controller = controller.c_str();
  if (!init.empty()) {
    so.initial = init.data();
    so.initial_len = static_cast<int>(init.size());
  }
  so.steps = steps;
  so.trials = trials;
  so.disturbance = disturb == "nominal"    ? QS_DISTURB_NOMINAL
                   : disturb == "per-step" ? QS_DISTURB_PER_STEP
                                           : QS_DISTURB_PER_TRIAL;
  qs_sim_result r;
  const qs_status s = qs_simulate(&o, &so, &r);
  if (s != QS_OK) return report_error(s);
  std::printf("trials=%d\nsafety_violations=%d\nfaults=%d\ngoal_reached=%d\n"
              "goal_reached_within_rank_bound=%d\ngoal_left_after_reach=%d\nmax_steps_to_goal=%d\n",
              r.trials, r.violations, r.faults, r.reached, r.reached_within_bound, r.left_goal,
              r.max_steps_to_goal);
  return r.violations > 0 ? kViolation : kOk;
}

int cmd_region(const Common& c, const std::string& controller) {
  const qs_synth_options o = c.options();
  const std::string path = c.out + "/region.csv";
  unsigned long long n = 0;
  const qs_status s = qs_region(&o, controller.c_str(), path.c_str(), &n);
  if (s != QS_OK) return report_error(s);
  std::printf("controllable=%llu\nregion=%s\n", n, path.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  const char* level = std::getenv("QSYNTH_LOG");
  if (qs_set_log_level(level ? level : "warn") != QS_OK) {
    std::fprintf(stderr, "qsynth: ignoring QSYNTH_LOG: %s\n", qs_last_error());
    qs_set_log_level("warn");
  }

  CLI::App app{"Quantized controller synthesis for discrete-time linear hybrid systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qs_version());

  app.add_subcommand("models", "list built-in models");

  Common synth;
  add_common(app.add_subcommand("synth", "build the abstraction, synthesize and emit the controller"), synth, true);

  Common sim;
  std::string controller;
  std::vector<double> init;
  int steps = 1000;
  int trials = 1;
  std::string disturb = "per-trial";
  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation of a controller file");
  add_common(simulate, sim, false);
  simulate->add_option("--controller", controller, "controller.csv written by synth")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--init", init, "initial state, comma separated (default: random in the region)")
      ->delimiter(',');
  simulate->add_option("--steps", steps, "steps per trial")->check(CLI::NonNegativeNumber)->capture_default_str();
  simulate->add_option("--trials", trials, "Monte-Carlo trials")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--disturb", disturb, "parameter draws")
      ->check(CLI::IsMember({"nominal", "per-trial", "per-step"}))
      ->capture_default_str();

  Common region;
  std::string region_controller;
  auto* region_cmd = app.add_subcommand("region", "region CSV of a controller file");
  add_common(region_cmd, region, false);
  region_cmd->add_option("--controller", region_controller, "controller.csv written by synth")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("models")) return cmd_models();
  if (app.got_subcommand("synth")) return cmd_synth(synth);
  if (app.got_subcommand("simulate")) return cmd_simulate(sim, controller, init, steps, trials, disturb);
  return cmd_region(region, region_controller);
}
