#include "qsynth/qsynth.h"

#include <spdlog/spdlog.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "qsynth/error.hpp"
#include "qsynth/model_io.hpp"
#include "qsynth/pipeline.hpp"

struct qs_model {
  qsynth::Dtlhs model;
};

namespace {

thread_local std::string last_error;

qs_status code_of(qsynth::ErrorCode c) {
  switch (c) {
    case qsynth::ErrorCode::InvalidArgument:
      return QS_ERR_INVALID_ARGUMENT;
    case qsynth::ErrorCode::Model:
      return QS_ERR_MODEL;
    case qsynth::ErrorCode::Infeasible:
      return QS_ERR_INFEASIBLE;
    case qsynth::ErrorCode::Solver:
      return QS_ERR_SOLVER;
    case qsynth::ErrorCode::Io:
      return QS_ERR_IO;
    case qsynth::ErrorCode::HashMismatch:
      return QS_ERR_HASH_MISMATCH;
  }
  return QS_ERR_INTERNAL;
}

qs_status fail(qs_status s, const std::string& what) {
  last_error = what;
  return s;
}

template <class F>
qs_status guarded(F&& f) {
  last_error.clear();
  try {
    return f();
  } catch (const qsynth::Error& e) {
    return fail(code_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(QS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(QS_ERR_INTERNAL, e.what());
  }
}

qs_status copy_out(const std::string& s, char* buf, size_t len) {
  if (!buf) return fail(QS_ERR_INVALID_ARGUMENT, "null buffer");
  if (s.size() + 1 > len) return fail(QS_ERR_INVALID_ARGUMENT, "buffer too small, need " + std::to_string(s.size() + 1));
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return QS_OK;
}

void copy_hash(const std::string& s, char (&dst)[17]) {
  std::memset(dst, 0, sizeof dst);
  std::memcpy(dst, s.c_str(), std::min(s.size(), sizeof dst - 1));
}

qsynth::RunConfig to_config(const qs_synth_options* o) {
  if (!o) throw qsynth::Error(qsynth::ErrorCode::InvalidArgument, "null options");
  if (!o->model) throw qsynth::Error(qsynth::ErrorCode::InvalidArgument, "no model given");
  qsynth::RunConfig c;
  c.model = o->model;
  c.bits = o->bits;
  c.inputs = o->inputs;
  c.goal_vref = o->goal_vref;
  c.goal_eps = o->goal_eps;
  c.variant = o->variant == QS_VARIANT_MAX ? qsynth::Variant::Maximum : qsynth::Variant::Minimum;
  c.exact = o->exact != 0;
  c.budget_nodes = o->budget_nodes;
  c.jobs = o->jobs;
  c.seed = o->seed;
  c.out = o->out ? o->out : ".";
  return c;
}

qs_status model_out(qsynth::Dtlhs h, qs_model** out) {
  if (!out) return fail(QS_ERR_INVALID_ARGUMENT, "null output handle");
  *out = new qs_model{std::move(h)};
  return QS_OK;
}

}  // namespace

extern "C" {

const char* qs_version(void) { return "0.1.0"; }

const char* qs_last_error(void) { return last_error.c_str(); }

const char* qs_status_string(qs_status s) {
  switch (s) {
    case QS_OK:
      return "ok";
    case QS_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case QS_ERR_MODEL:
      return "model error";
    case QS_ERR_INFEASIBLE:
      return "infeasible";
    case QS_ERR_SOLVER:
      return "solver error";
    case QS_ERR_IO:
      return "i/o error";
    case QS_ERR_HASH_MISMATCH:
      return "hash mismatch";
    case QS_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

qs_status qs_set_log_level(const char* level) {
  return guarded([&] {
    if (!level) return fail(QS_ERR_INVALID_ARGUMENT, "null level");
    const auto l = spdlog::level::from_str(level);
    if (l == spdlog::level::off && std::strcmp(level, "off") != 0) {
      return fail(QS_ERR_INVALID_ARGUMENT, std::string("unknown log level ") + level);
    }
    spdlog::set_level(l);
    return QS_OK;
  });
}

qs_status qs_models_list(char* buf, size_t len) {
  return guarded([&] {
    std::string s;
    for (const auto& n : qsynth::builtin_model_names()) s += n + "\n";
    return copy_out(s, buf, len);
  });
}

qs_status qs_model_builtin(const char* name, int inputs, qs_model** out) {
  return guarded([&] {
    if (!name) return fail(QS_ERR_INVALID_ARGUMENT, "null model name");
    const std::string n = name;
    if (n.rfind("buck", 0) != 0 && n.rfind("multibuck", 0) != 0) {
      return fail(QS_ERR_INVALID_ARGUMENT, "unknown built-in model " + n);
    }
    return model_out(qsynth::resolve_model(n, inputs).model, out);
  });
}

qs_status qs_model_load(const char* path, qs_model** out) {
  return guarded([&] {
    if (!path) return fail(QS_ERR_INVALID_ARGUMENT, "null path");
    return model_out(qsynth::load_model(path), out);
  });
}

void qs_model_free(qs_model* m) { delete m; }

qs_status qs_model_hash(const qs_model* m, char* buf, size_t len) {
  return guarded([&] {
    if (!m) return fail(QS_ERR_INVALID_ARGUMENT, "null model");
    return copy_out(qsynth::model_hash(m->model), buf, len);
  });
}

qs_status qs_model_name(const qs_model* m, char* buf, size_t len) {
  return guarded([&] {
    if (!m) return fail(QS_ERR_INVALID_ARGUMENT, "null model");
    return copy_out(m->model.name, buf, len);
  });
}

qs_status qs_model_dims(const qs_model* m, int* states, int* inputs, int* aux) {
  return guarded([&] {
    if (!m) return fail(QS_ERR_INVALID_ARGUMENT, "null model");
    if (states) *states = static_cast<int>(m->model.state.size());
    if (inputs) *inputs = static_cast<int>(m->model.inputs.size());
    if (aux) *aux = static_cast<int>(m->model.aux.size());
    return QS_OK;
  });
}

qs_status qs_model_json(const qs_model* m, char* buf, size_t len) {
  return guarded([&] {
    if (!m) return fail(QS_ERR_INVALID_ARGUMENT, "null model");
    return copy_out(qsynth::model_to_json(m->model), buf, len);
  });
}

void qs_synth_options_default(qs_synth_options* o) {
  if (!o) return;
  const qsynth::RunConfig c;
  o->model = "buck";
  o->bits = c.bits;
  o->inputs = c.inputs;
  o->goal_vref = c.goal_vref;
  o->goal_eps = c.goal_eps;
  o->variant = QS_VARIANT_MIN;
  o->exact = 0;
  o->budget_nodes = c.budget_nodes;
  o->jobs = c.jobs;
  o->seed = c.seed;
  o->out = ".";
}

qs_status qs_synth(const qs_synth_options* o, qs_synth_result* r) {
  return guarded([&] {
    if (!r) return fail(QS_ERR_INVALID_ARGUMENT, "null result");
    const qsynth::SynthRun run = qsynth::run_synthesis(to_config(o));
    qsynth::write_artifacts(run);
    const auto& st = run.abstraction.stats();
    const auto& k = run.controller;
    *r = qs_synth_result{};
    r->outcome = k.outcome() == qsynth::Outcome::Sol     ? QS_SOL
                 : k.outcome() == qsynth::Outcome::NoSol ? QS_NOSOL
                                                         : QS_UNK;
    r->empty_goal = run.empty_goal();
    r->cells = k.num_cells();
    r->controllable_cells = k.controllable_count();
    r->max_rank = k.max_rank();
    r->arcs = st.arcs_max;
    r->max_loops = st.max_loops;
    r->loop_frac = st.loop_frac;
    r->cpu_seconds = run.cpu_seconds;
    r->mem_kb = run.mem_kb;
    r->source_lines = run.source_lines;
    r->budget_events = st.budget_events;
    copy_hash(run.model_hash, r->model_hash);
    copy_hash(run.config_hash, r->config_hash);
    return QS_OK;
  });
}

void qs_sim_options_default(qs_sim_options* o) {
  if (!o) return;
  o->controller = nullptr;
  o->initial = nullptr;
  o->initial_len = 0;
  o->steps = 1000;
  o->trials = 1;
  o->disturbance = QS_DISTURB_PER_TRIAL;
}

qs_status qs_simulate(const qs_synth_options* o, const qs_sim_options* s, qs_sim_result* r) {
  return guarded([&] {
    if (!s || !r) return fail(QS_ERR_INVALID_ARGUMENT, "null simulation options or result");
    if (!s->controller) return fail(QS_ERR_INVALID_ARGUMENT, "no controller file given");
    qsynth::SimulateRequest req;
    req.config = to_config(o);
    req.controller_path = s->controller;
    if (s->initial) req.initial.assign(s->initial, s->initial + s->initial_len);
    req.steps = s->steps;
    req.trials = s->trials;
    switch (s->disturbance) {
      case QS_DISTURB_NOMINAL:
        req.disturbance = qsynth::Disturbance::Nominal;
        break;
      case QS_DISTURB_PER_TRIAL:
        req.disturbance = qsynth::Disturbance::PerTrial;
        break;
      case QS_DISTURB_PER_STEP:
        req.disturbance = qsynth::Disturbance::PerStep;
        break;
      default:
        return fail(QS_ERR_INVALID_ARGUMENT, "unknown disturbance mode");
    }
    const qsynth::SimulateResult res = qsynth::run_simulation(req);
    qsynth::write_simulation(req, res);
    const auto& m = res.summary;
    *r = qs_sim_result{m.trials,   m.violations,         m.faults, m.reached, m.reached_within_bound,
                       m.left_goal, m.max_steps_to_goal};
    return QS_OK;
  });
}

qs_status qs_region(const qs_synth_options* o, const char* controller, const char* out_path,
                    unsigned long long* controllable_cells) {
  return guarded([&] {
    if (!controller || !out_path) return fail(QS_ERR_INVALID_ARGUMENT, "null controller or output path");
    const qsynth::RunConfig cfg = to_config(o);
    const qsynth::ModelSpec spec = qsynth::resolve_model(cfg.model, cfg.inputs);
    const qsynth::ControllerFile file = qsynth::read_controller_file(controller);
    const std::string mh = qsynth::model_hash(spec.model);
    if (file.model_hash != mh) {
      return fail(QS_ERR_HASH_MISMATCH, "controller was built for model hash " + file.model_hash);
    }
    const qsynth::Policy p = file.policy(qsynth::QuantSchema::uniform(spec.model, file.bits));
    std::error_code ec;
    const std::filesystem::path parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) return fail(QS_ERR_IO, std::string("cannot write ") + out_path);
    out << qsynth::provenance_line(file.model_hash, file.config_hash, file.bits, file.inputs) << '\n';
    qsynth::write_policy_region_csv(out, p);
    if (controllable_cells) *controllable_cells = p.region_cells().size();
    return QS_OK;
  });
}

}  // extern "C"
