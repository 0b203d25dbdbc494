#include "stamp/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace stamp {

json to_json(const EvalRun& v) {
  return json{{"task_id", v.task_id},
              {"attempt_index", v.attempt_index},
              {"outcome",
               {{"success", v.outcome.success},
                {"submitted", v.outcome.submitted},
                {"gold", v.outcome.gold}}},
              {"predicted_memories", v.predicted_memories},
              {"reference_memories", v.reference_memories},
              {"grades", v.grades}};
}

double score_memory_accuracy(const std::vector<double>& grades) {
  if (grades.empty()) throw std::invalid_argument("M-Acc over empty grades");
  double sum = 0.0;
  for (double g : grades) {
    if (g != 1.0 && g != 0.5 && g != 0.0) {
      throw std::invalid_argument("grade outside {1, 0.5, 0}");
    }
    sum += g;
  }
  return sum / static_cast<double>(grades.size());
}

double score_pass_at_k(const std::map<std::string, std::vector<EvalRun>>& runs_by_task, int k) {
  if (runs_by_task.empty()) throw std::invalid_argument("pass@k over empty run set");
  std::size_t passed = 0;
  for (const auto& [task, runs] : runs_by_task) {
    if (static_cast<int>(runs.size()) < k) {
      throw std::invalid_argument("task '" + task + "' has fewer than k attempts");
    }
    bool ok = false;
    for (const auto& r : runs) {
      if (r.attempt_index <= k && r.outcome.success) ok = true;
    }
    if (ok) passed++;
  }
  return static_cast<double>(passed) / static_cast<double>(runs_by_task.size());
}

std::vector<double> hrp_memory_credit(const std::vector<std::string>& transcript_texts,
                                      const std::vector<std::string>& references,
                                      const JudgeFn& judge) {
  std::vector<double> grades;
  for (const auto& ref : references) {
    grades.push_back(gamma_of(judge({ref}, transcript_texts)));
  }
  return grades;
}

std::string to_string(BenchAgent a) {
  switch (a) {
    case BenchAgent::scripted: return "scripted";
    case BenchAgent::scripted_nomem: return "scripted_nomem";
    case BenchAgent::noop: return "noop";
    case BenchAgent::service: return "service";
  }
  return "scripted";
}

std::string to_string(BenchVariant v) {
  return v == BenchVariant::guided ? "guided" : "natural";
}

json to_json(const BenchmarkReport& v) {
  json tasks = json::array();
  for (const auto& t : v.tasks) {
    json attempts = json::array();
    for (const auto& a : t.attempts) attempts.push_back(to_json(a));
    tasks.push_back(json{{"task_id", t.task_id},
                         {"t_acc", t.t_acc},
                         {"m_acc", t.m_acc},
                         {"attempts", attempts}});
  }
  json pass = json::object();
  for (const auto& [k, p] : v.pass_at) pass[std::to_string(k)] = p;
  return json{{"stamp_schema", 1},
              {"tasks", tasks},
              {"aggregate", {{"t_acc", v.t_acc}, {"m_acc", v.m_acc}, {"pass_at", pass}}},
              {"meta",
               {{"k", v.meta.k},
                {"variant", v.meta.variant},
                {"agent", v.meta.agent},
                {"suite_size", v.meta.suite_size}}}};
}

// ---------------------------------------------------------------------------
// Full-protocol agent episode
// ---------------------------------------------------------------------------

namespace {

// Maps a parsed mobile_use tool call onto the engine's action space; actions
// outside the virtual environment's reach become recorded chrome noops.
Action tool_to_engine_action(const ToolAction& t, const Observation& obs) {
  switch (t.action) {
    case MobileAction::click:
      return Action::Click(t.coordinate->first, t.coordinate->second);
    case MobileAction::type: {
      if (t.coordinate) {
        return Action::Type(t.coordinate->first, t.coordinate->second, t.text.value_or(""));
      }
      for (const auto& v : obs.visible_elements) {
        if (v.kind == ElementKind::input) {
          return Action::Type((v.bbox.x0 + v.bbox.x1) / 2, (v.bbox.y0 + v.bbox.y1) / 2,
                              t.text.value_or(""));
        }
      }
      return Action::Click(500, 60);
    }
    case MobileAction::swipe:
      return Action::Scroll();
    case MobileAction::answer:
      return Action::Answer(t.text.value_or(""));
    case MobileAction::system_button:
      if (t.button && *t.button == "Back") return Action::Back();
      return Action::Click(500, 60);
    default:
      // key, long_press, open, wait, interact: accepted but inert here.
      return Action::Click(500, 60);
  }
}

}  // namespace

Trajectory run_agent_episode(const EnvironmentBundle& bundle, const CompletionFn& agent,
                             int max_steps, BenchVariant variant) {
  EnvState state = reset(bundle, max_steps);
  Trajectory traj;
  traj.goal = variant == BenchVariant::guided ? bundle.task_spec.task.guideline
                                              : bundle.task_spec.task.natural_language;
  traj.task_id = bundle_digest(bundle).substr(0, 12);

  std::vector<HistoryEntry> history;
  std::map<std::string, std::pair<std::string, std::string>> fact_by_testid;
  for (const auto& page : bundle.page_graph.pages) {
    for (const auto& e : page.elements) {
      if (e.fact_key && e.value) fact_by_testid[e.testid] = {*e.fact_key, *e.value};
    }
  }

  while (!state.terminal && state.step_count < max_steps) {
    Observation obs = render_observation(state);
    int t = state.step_count + 1;
    PromptBundle prompt = assemble_prompt(traj.goal, history, t);
    // The screenshot stand-in rides on the current turn as text.
    std::string request = prompt.system_text + "\n\n";
    for (const auto& turn : prompt.user_turns) request += turn.text + "\n";
    request += "\nCurrent screen:\n" + to_json(obs).dump() + "\n";

    std::string reply = agent(request);

    StepRecord rec;
    rec.page_id = state.current_page_id;
    rec.screenshot_ref = canonical_digest(to_json(obs));
    for (const auto& v : obs.visible_elements) {
      auto it = fact_by_testid.find(v.testid);
      if (it != fact_by_testid.end()) {
        rec.visible_facts.push_back(it->second.first + "=" + it->second.second);
      }
    }
    rec.raw_output = reply;

    StepOutput parsed;
    bool parsed_ok = true;
    try {
      parsed = parse_step_output(reply);
    } catch (const StepParseError&) {
      parsed_ok = false;
    }
    if (!parsed_ok) {
      // Malformed turn burns a step as a recorded noop.
      Action noop = Action::Click(500, 60);
      StepResult res = step(state, noop);
      rec.action = to_json(noop);
      rec.effect = to_string(res.effect);
      rec.action_desc = "(unparseable output)";
      rec.user_text = prompt.user_turns.back().text;
      traj.steps.push_back(std::move(rec));
      history.push_back({"(unparseable output)", "", prompt.user_turns.back().text});
      continue;
    }

    if (parsed.tool_call.action == MobileAction::terminate) {
      rec.action_desc = parsed.action_desc;
      rec.thought = parsed.think;
      rec.memory = parsed.memory;
      rec.tool_call = to_json(parsed.tool_call);
      rec.effect = "noop";
      rec.user_text = prompt.user_turns.back().text;
      traj.steps.push_back(std::move(rec));
      break;
    }

    Action action = tool_to_engine_action(parsed.tool_call, obs);
    StepResult res = step(state, action);
    rec.action = to_json(action);
    rec.effect = to_string(res.effect);
    rec.action_desc = parsed.action_desc;
    rec.thought = parsed.think;
    rec.memory = parsed.memory;
    rec.tool_call = to_json(parsed.tool_call);
    rec.user_text = prompt.user_turns.back().text;
    traj.steps.push_back(std::move(rec));
    history.push_back({parsed.action_desc, parsed.memory, rec.user_text});
  }

  if (state.terminal) {
    traj.outcome = *state.terminal;
  } else {
    std::string submitted = state.input_buffer.count("answer-input")
                                ? state.input_buffer.at("answer-input")
                                : std::string();
    traj.outcome = GradeResult{false, submitted, bundle.gold};
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

BenchmarkReport run_benchmark(const std::vector<EnvironmentBundle>& suite,
                              const BenchmarkOptions& opts) {
  JudgeFn judge = opts.judge ? opts.judge
                             : JudgeFn([](const std::vector<std::string>& r,
                                          const std::vector<std::string>& p) {
                                 return offline_judge(r, p);
                               });
  BenchmarkReport report;
  report.meta.k = opts.k;
  report.meta.variant = to_string(opts.variant);
  report.meta.agent = to_string(opts.agent);
  report.meta.suite_size = suite.size();

  std::map<std::string, std::vector<EvalRun>> runs_by_task;
  double t_acc_sum = 0.0, m_acc_sum = 0.0;
  std::size_t attempt_count = 0;

  for (const auto& bundle : suite) {
    BenchmarkReport::TaskResult tr;
    tr.task_id = bundle_digest(bundle).substr(0, 12);
    std::vector<std::string> reference;
    for (const auto& item : bundle.task_spec.task.memory_items) {
      auto it = bundle.facts.find(item.fact_key);
      if (it != bundle.facts.end()) reference.push_back(item.fact_key + "=" + it->second);
    }

    for (int attempt = 1; attempt <= opts.k; ++attempt) {
      EvalRun run;
      run.task_id = tr.task_id;
      run.attempt_index = attempt;
      run.reference_memories = reference;
      try {
        Trajectory traj;
        switch (opts.agent) {
          case BenchAgent::scripted:
          case BenchAgent::scripted_nomem: {
            auto planner =
                scripted_planner(bundle, opts.agent == BenchAgent::scripted);
            auto worker = oracle_worker();
            traj = run_episode(bundle, *planner, *worker, opts.max_steps);
            break;
          }
          case BenchAgent::noop: {
            traj.outcome = GradeResult{false, "", bundle.gold};
            break;
          }
          case BenchAgent::service: {
            if (!opts.agent_client) throw TransportError("no agent client configured");
            traj = run_agent_episode(bundle, opts.agent_client, opts.max_steps, opts.variant);
            break;
          }
        }
        run.outcome = traj.outcome.value_or(GradeResult{false, "", bundle.gold});
        for (const auto& s : traj.steps) {
          if (!s.memory.empty()) run.predicted_memories.push_back(s.memory);
        }
      } catch (const std::exception&) {
        run.outcome = GradeResult{false, "", bundle.gold};  // errored attempt = failure
      }
      for (const auto& ref : reference) {
        run.grades.push_back(gamma_of(judge({ref}, run.predicted_memories)));
      }
      t_acc_sum += run.outcome.success ? 1.0 : 0.0;
      m_acc_sum += run.grades.empty() ? 0.0 : score_memory_accuracy(run.grades);
      attempt_count++;
      tr.attempts.push_back(run);
      runs_by_task[tr.task_id].push_back(run);
    }

    double t_sum = 0.0, m_sum = 0.0;
    for (const auto& a : tr.attempts) {
      t_sum += a.outcome.success ? 1.0 : 0.0;
      m_sum += a.grades.empty() ? 0.0 : score_memory_accuracy(a.grades);
    }
    tr.t_acc = t_sum / static_cast<double>(tr.attempts.size());
    tr.m_acc = m_sum / static_cast<double>(tr.attempts.size());
    report.tasks.push_back(std::move(tr));
  }

  report.t_acc = attempt_count ? t_acc_sum / static_cast<double>(attempt_count) : 0.0;
  report.m_acc = attempt_count ? m_acc_sum / static_cast<double>(attempt_count) : 0.0;
  for (int k = 1; k <= opts.k; ++k) report.pass_at[k] = score_pass_at_k(runs_by_task, k);
  return report;
}

}  // namespace stamp
