#include "stamp/harness.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "stamp/prompts.hpp"

namespace stamp {

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json to_json(const StepRecord& v) {
  return json{{"screenshot_ref", v.screenshot_ref},
              {"action", v.action},
              {"tool_call", v.tool_call},
              {"action_desc", v.action_desc},
              {"thought", v.thought},
              {"conclusion", v.conclusion},
              {"trainable", v.trainable},
              {"non_trainable_reason", v.non_trainable_reason},
              {"memory", v.memory},
              {"b", v.b},
              {"m_tilde", v.m_tilde},
              {"action_masked", v.action_masked},
              {"memory_masked", v.memory_masked},
              {"effect", v.effect},
              {"page_id", v.page_id},
              {"visible_facts", v.visible_facts},
              {"user_text", v.user_text},
              {"raw_output", v.raw_output}};
}

StepRecord step_record_from_json(const json& j) {
  StepRecord v;
  v.screenshot_ref = j.value("screenshot_ref", "");
  v.action = j.value("action", json::object());
  v.tool_call = j.value("tool_call", json::object());
  v.action_desc = j.value("action_desc", "");
  v.thought = j.value("thought", "");
  v.conclusion = j.value("conclusion", "");
  v.trainable = j.value("trainable", true);
  v.non_trainable_reason = j.value("non_trainable_reason", "");
  v.memory = j.value("memory", "");
  v.b = j.value("b", false);
  v.m_tilde = j.value("m_tilde", "");
  v.action_masked = j.value("action_masked", false);
  v.memory_masked = j.value("memory_masked", false);
  v.effect = j.value("effect", "");
  v.page_id = j.value("page_id", "");
  v.visible_facts = j.value("visible_facts", std::vector<std::string>{});
  v.user_text = j.value("user_text", "");
  v.raw_output = j.value("raw_output", "");
  return v;
}

json to_json(const Trajectory& v) {
  json steps = json::array();
  for (const auto& s : v.steps) steps.push_back(to_json(s));
  json j{{"stamp_schema", 1},
         {"goal", v.goal},
         {"steps", steps},
         {"ids", {{"task_id", v.task_id}, {"traj_id", v.traj_id}}}};
  if (v.outcome) {
    j["outcome"] = {{"success", v.outcome->success},
                    {"submitted", v.outcome->submitted},
                    {"gold", v.outcome->gold}};
  }
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory v;
  v.goal = j.value("goal", "");
  for (const auto& s : j.value("steps", json::array())) {
    v.steps.push_back(step_record_from_json(s));
  }
  if (j.contains("outcome")) {
    const auto& o = j.at("outcome");
    v.outcome = GradeResult{o.value("success", false), o.value("submitted", ""),
                            o.value("gold", "")};
  }
  if (j.contains("ids")) {
    v.task_id = j.at("ids").value("task_id", "");
    v.traj_id = j.at("ids").value("traj_id", "");
  }
  return v;
}

void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HarnessError("cannot open '" + path + "' for writing");
  for (const auto& t : trajectories) out << canonical_dump(to_json(t)) << "\n";
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError("cannot open '" + path + "'");
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(trajectory_from_json(json::parse(line)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle planner / worker
// ---------------------------------------------------------------------------

namespace {

const VisibleElement* find_visible(const Observation& obs, const std::string& testid) {
  for (const auto& v : obs.visible_elements) {
    if (v.testid == testid) return &v;
  }
  return nullptr;
}

class ScriptedPlanner final : public Planner {
 public:
  ScriptedPlanner(const EnvironmentBundle& bundle, bool emit_memory) {
    const auto& items = bundle.task_spec.task.memory_items;
    // Entry element on home for each detail page.
    const Page* home = bundle.page_graph.find_page(bundle.page_graph.home_page_id);
    auto entry_for = [&](const std::string& page_id) -> std::string {
      if (home) {
        for (const auto& e : home->elements) {
          if (e.target_page && *e.target_page == page_id) return e.testid;
        }
      }
      return "";
    };
    const std::string home_tab =
        bundle.page_graph.tab_elements.empty() ? "" : bundle.page_graph.tab_elements[0].testid;

    for (std::size_t i = 0; i < items.size(); ++i) {
      PlanProposal open;
      open.kind = PlanProposal::Kind::Click;
      open.target_testid = entry_for(items[i].page_id);
      open.description = "the entry for " + items[i].page_id + " on the home list";
      plan_.push_back(open);

      // Navigate-away step: its pre-action screen shows the fact, so the
      // memory is externalized here.
      PlanProposal leave;
      leave.kind = PlanProposal::Kind::Click;
      bool last = i + 1 == items.size();
      leave.target_testid = last ? "go-submit-answer" : home_tab;
      leave.description = last ? "the Submit Answer button" : "the home tab";
      if (emit_memory) {
        auto it = bundle.facts.find(items[i].fact_key);
        if (it != bundle.facts.end()) leave.memory = items[i].fact_key + "=" + it->second;
      }
      plan_.push_back(leave);
    }
    if (items.empty()) {
      PlanProposal open;
      open.kind = PlanProposal::Kind::Click;
      open.target_testid = "go-submit-answer";
      open.description = "the Submit Answer button";
      plan_.push_back(open);
    }

    PlanProposal input;
    input.kind = PlanProposal::Kind::Input;
    input.target_testid = "answer-input";
    input.description = "the answer input box";
    input.text = bundle.gold;
    plan_.push_back(input);

    PlanProposal end;
    end.kind = PlanProposal::Kind::End;
    plan_.push_back(end);
  }

  PlanProposal next(const Observation& obs, const Trajectory&) override {
    if (obs.success_banner) {
      PlanProposal end;
      end.kind = PlanProposal::Kind::End;
      return end;
    }
    if (cursor_ >= plan_.size()) {
      PlanProposal end;
      end.kind = PlanProposal::Kind::End;
      return end;
    }
    const PlanProposal& goal = plan_[cursor_];
    if (goal.kind != PlanProposal::Kind::End && !goal.target_testid.empty() &&
        !find_visible(obs, goal.target_testid)) {
      PlanProposal scroll;
      scroll.kind = PlanProposal::Kind::Scroll;
      scroll.description = "scroll down to reveal " + goal.target_testid;
      return scroll;
    }
    return plan_[cursor_++];
  }

 private:
  std::vector<PlanProposal> plan_;
  std::size_t cursor_ = 0;
};

class OracleWorker final : public Worker {
 public:
  Action ground(const PlanProposal& p, const Observation& obs) override {
    switch (p.kind) {
      case PlanProposal::Kind::Scroll:
        return Action::Scroll();
      case PlanProposal::Kind::Click: {
        const VisibleElement* e = find_visible(obs, p.target_testid);
        if (!e) return Action::Scroll();
        return Action::Click((e->bbox.x0 + e->bbox.x1) / 2, (e->bbox.y0 + e->bbox.y1) / 2);
      }
      case PlanProposal::Kind::Input:
        // type-then-submit, compiled to the engine's answer primitive.
        return Action::Answer(p.text);
      case PlanProposal::Kind::End:
        throw HarnessError("End proposals are not grounded");
    }
    return Action::Scroll();
  }
};

}  // namespace

std::unique_ptr<Planner> scripted_planner(const EnvironmentBundle& bundle, bool emit_memory) {
  return std::make_unique<ScriptedPlanner>(bundle, emit_memory);
}

std::unique_ptr<Worker> oracle_worker() { return std::make_unique<OracleWorker>(); }

// ---------------------------------------------------------------------------
// Service planner / worker
// ---------------------------------------------------------------------------

Action parse_worker_output(const std::string& text) {
  static const std::regex click_re(R"(^click \((\d+),\s*(\d+)\)$)");
  static const std::regex type_re(R"(^type \((\d+),\s*(\d+),\s*(.*)\)$)");
  std::string t = text;
  // trim
  auto b = t.find_first_not_of(" \t\r\n");
  auto e = t.find_last_not_of(" \t\r\n");
  t = b == std::string::npos ? "" : t.substr(b, e - b + 1);
  if (t == "scroll") return Action::Scroll();
  std::smatch m;
  if (std::regex_match(t, m, click_re)) {
    return Action::Click(std::stoi(m[1]), std::stoi(m[2]));
  }
  if (std::regex_match(t, m, type_re)) {
    return Action::Type(std::stoi(m[1]), std::stoi(m[2]), m[3]);
  }
  throw HarnessError("unparseable worker output: '" + t + "'");
}

namespace {

std::string observation_text(const Observation& obs) {
  std::string s = "Screen: " + obs.page_title + ". Elements:";
  for (const auto& v : obs.visible_elements) {
    s += " [" + v.testid + " '" + v.label + "'";
    if (v.value && !v.value->empty()) s += " = " + *v.value;
    s += "]";
  }
  if (obs.scroll_hint) s += " (more content below)";
  if (obs.success_banner) s += " Banner: " + *obs.success_banner;
  return s;
}

class ServicePlanner final : public Planner {
 public:
  ServicePlanner(const EnvironmentBundle& bundle, CompletionFn client)
      : client_(std::move(client)) {
    base_prompt_ = substitute(prompts::kPlannerPrompt,
                              {{"task", bundle.task_spec.task.natural_language},
                               {"guideline", bundle.task_spec.task.guideline},
                               {"calculation", bundle.scenario.truth.explain},
                               {"answer", bundle.gold}});
  }

  PlanProposal next(const Observation& obs, const Trajectory& so_far) override {
    std::string prompt = base_prompt_ + "\n\nAction history:\n";
    for (std::size_t i = 0; i < so_far.steps.size(); ++i) {
      prompt += "Step " + std::to_string(i + 1) + ": " + so_far.steps[i].action_desc + "\n";
    }
    prompt += "\nCurrent screen:\n" + observation_text(obs) + "\n";
    std::string reply = client_(prompt);
    return parse_reply(reply);
  }

 private:
  static PlanProposal parse_reply(const std::string& reply) {
    auto a = reply.find('{');
    auto z = reply.rfind('}');
    if (a == std::string::npos || z == std::string::npos || z < a) {
      throw HarnessError("planner reply carries no JSON object");
    }
    json doc = json::parse(reply.substr(a, z - a + 1));
    PlanProposal p;
    p.think = doc.value("think", "");
    std::string action = doc.value("action", "");
    if (action.rfind("Click", 0) == 0) {
      p.kind = PlanProposal::Kind::Click;
      p.description = action;
    } else if (action.rfind("Input", 0) == 0) {
      p.kind = PlanProposal::Kind::Input;
      p.description = action;
      auto colon = action.find(':');
      if (colon != std::string::npos) p.text = action.substr(colon + 1);
    } else if (action.rfind("Scroll", 0) == 0) {
      p.kind = PlanProposal::Kind::Scroll;
    } else if (action.rfind("End", 0) == 0) {
      p.kind = PlanProposal::Kind::End;
    } else {
      throw HarnessError("planner reply action not in {Click, Input, Scroll, End}");
    }
    return p;
  }

  CompletionFn client_;
  std::string base_prompt_;
};

class ServiceWorker final : public Worker {
 public:
  explicit ServiceWorker(CompletionFn client) : client_(std::move(client)) {}

  Action ground(const PlanProposal& p, const Observation& obs) override {
    if (p.kind == PlanProposal::Kind::Scroll) return Action::Scroll();
    std::string prompt =
        substitute(prompts::kWorkerPrompt, {{"next_planning", p.description}});
    prompt += "\n\nScreen content (textual stand-in for the screenshot):\n" +
              observation_text(obs);
    return parse_worker_output(client_(prompt));
  }

 private:
  CompletionFn client_;
};

}  // namespace

std::unique_ptr<Planner> service_planner(const EnvironmentBundle& bundle, CompletionFn client) {
  return std::make_unique<ServicePlanner>(bundle, std::move(client));
}

std::unique_ptr<Worker> service_worker(CompletionFn client) {
  return std::make_unique<ServiceWorker>(std::move(client));
}

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

namespace {

std::string describe(const PlanProposal& p, const Action& a) {
  switch (a.kind) {
    case Action::Kind::click:
      return "Click " + (p.description.empty() ? "the element" : p.description);
    case Action::Kind::type:
      return "Type '" + a.text + "' into " + p.description;
    case Action::Kind::answer:
      return "Type '" + a.text + "' into the answer box and submit it";
    case Action::Kind::scroll:
      return "Scroll down";
    case Action::Kind::open:
      return "Open " + a.testid;
    case Action::Kind::back:
      return "Go back";
  }
  return "Act";
}

ToolAction to_tool_action(const Action& a) {
  ToolAction t;
  switch (a.kind) {
    case Action::Kind::click:
      t.action = MobileAction::click;
      t.coordinate = {a.x, a.y};
      break;
    case Action::Kind::type:
      t.action = MobileAction::type;
      t.coordinate = {a.x, a.y};
      t.text = a.text;
      break;
    case Action::Kind::answer:
      t.action = MobileAction::answer;
      t.text = a.text;
      break;
    case Action::Kind::scroll:
      t.action = MobileAction::swipe;
      t.coordinate = {500, 700};
      t.coordinate2 = {500, 100};
      break;
    case Action::Kind::open:
      t.action = MobileAction::open;
      t.text = a.testid;
      break;
    case Action::Kind::back:
      t.action = MobileAction::system_button;
      t.button = "Back";
      break;
  }
  return t;
}

std::string synthesize_thought(const Observation& obs, const std::string& action_desc,
                               const std::string& memory) {
  std::string s = "The screen shows " + obs.page_title + "; the next move is to " + action_desc +
                  ".";
  if (!memory.empty()) s += " I should keep in mind: " + memory + ".";
  return s;
}

std::atomic<long long> g_traj_counter{0};

}  // namespace

Trajectory run_episode(const EnvironmentBundle& bundle, Planner& planner, Worker& worker,
                       int max_steps) {
  // Map element testids to the fact they carry, for alignment bookkeeping.
  std::map<std::string, std::pair<std::string, std::string>> fact_by_testid;
  for (const auto& page : bundle.page_graph.pages) {
    for (const auto& e : page.elements) {
      if (e.fact_key && e.value) fact_by_testid[e.testid] = {*e.fact_key, *e.value};
    }
  }

  EnvState state = reset(bundle, max_steps);
  Trajectory traj;
  traj.goal = bundle.task_spec.task.natural_language;
  traj.task_id = bundle_digest(bundle).substr(0, 12);
  traj.traj_id = traj.task_id + "-" + std::to_string(g_traj_counter.fetch_add(1));

  while (true) {
    Observation obs = render_observation(state);
    if (state.terminal) break;
    if (state.step_count >= max_steps) break;

    PlanProposal proposal = planner.next(obs, traj);
    if (proposal.kind == PlanProposal::Kind::End) break;

    Action action;
    try {
      action = worker.ground(proposal, obs);
    } catch (const HarnessError&) {
      try {  // one retry per step on unparseable worker output
        action = worker.ground(proposal, obs);
      } catch (const HarnessError&) {
        break;
      }
    }

    StepRecord rec;
    rec.page_id = state.current_page_id;
    rec.screenshot_ref = canonical_digest(to_json(obs));
    rec.user_text = observation_text(obs);
    for (const auto& v : obs.visible_elements) {
      auto it = fact_by_testid.find(v.testid);
      if (it != fact_by_testid.end()) {
        rec.visible_facts.push_back(it->second.first + "=" + it->second.second);
      }
    }

    StepResult res = step(state, action);
    rec.action = to_json(action);
    rec.effect = to_string(res.effect);
    rec.action_desc = describe(proposal, action);
    rec.memory = proposal.memory;
    rec.thought =
        proposal.think.empty() ? synthesize_thought(obs, rec.action_desc, proposal.memory)
                               : proposal.think;
    rec.conclusion = res.diagnostic;
    rec.tool_call = to_json(to_tool_action(action));
    rec.raw_output =
        render_step_output({rec.thought, rec.action_desc, rec.memory, to_tool_action(action)});
    traj.steps.push_back(std::move(rec));
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
// Alignment / critic / SFT
// ---------------------------------------------------------------------------

Trajectory align_memory(Trajectory trajectory, const TaskSpec& task_spec) {
  for (auto& s : trajectory.steps) {
    s.b = false;
    s.m_tilde.clear();
  }
  // first_reveal[step index] -> facts revealed there, in memory_item order
  std::map<std::size_t, std::vector<std::string>> first_reveal;
  std::size_t revealed = 0;
  for (const auto& item : task_spec.task.memory_items) {
    bool found = false;
    for (std::size_t i = 0; i < trajectory.steps.size() && !found; ++i) {
      for (const auto& kv : trajectory.steps[i].visible_facts) {
        if (kv.rfind(item.fact_key + "=", 0) == 0) {
          first_reveal[i].push_back(kv);
          revealed++;
          found = true;
          break;
        }
      }
    }
  }
  for (const auto& [idx, facts] : first_reveal) {
    auto& s = trajectory.steps[idx];
    s.b = true;
    for (const auto& kv : facts) {
      if (!s.m_tilde.empty()) s.m_tilde += "; ";
      s.m_tilde += kv;
    }
  }
  if (trajectory.outcome && trajectory.outcome->success &&
      revealed != task_spec.task.memory_items.size()) {
    throw AlignmentError(
        "successful trajectory never revealed every memory fact; must_visit contract broken");
  }
  return trajectory;
}

namespace {

class HeuristicCritic final : public Critic {
 public:
  void review(Trajectory& trajectory) override {
    for (auto& s : trajectory.steps) {
      if (s.effect == "noop") {
        s.trainable = false;
        s.non_trainable_reason = "noop_action";
        s.action_masked = true;
      }
      bool contradicts = s.b ? (!s.memory.empty() && s.memory != s.m_tilde) : !s.memory.empty();
      if (contradicts) s.memory_masked = true;
    }
  }
};

class ServiceCritic final : public Critic {
 public:
  explicit ServiceCritic(CompletionFn client) : client_(std::move(client)) {}

  void review(Trajectory& trajectory) override {
    try {
      std::string prompt =
          "Review the following agent trajectory step by step. For each step decide whether "
          "its action and memory labels are valid training targets. Reply with a JSON array "
          "of {\"step\": 1-based index, \"trainable\": bool, \"action_masked\": bool, "
          "\"memory_masked\": bool, \"reason\": string}.\n\n" +
          canonical_dump(to_json(trajectory));
      json verdicts = json::parse(client_(prompt));
      for (const auto& v : verdicts) {
        int idx = v.value("step", 0) - 1;
        if (idx < 0 || idx >= static_cast<int>(trajectory.steps.size())) continue;
        auto& s = trajectory.steps[idx];
        s.trainable = v.value("trainable", s.trainable);
        s.action_masked = v.value("action_masked", s.action_masked);
        s.memory_masked = v.value("memory_masked", s.memory_masked);
        if (!s.trainable && s.non_trainable_reason.empty()) {
          s.non_trainable_reason = v.value("reason", "critic");
        }
      }
    } catch (const std::exception&) {
      // Critic failures degrade to no-op filtering.
    }
  }

 private:
  CompletionFn client_;
};

}  // namespace

std::unique_ptr<Critic> heuristic_critic() { return std::make_unique<HeuristicCritic>(); }

std::unique_ptr<Critic> service_critic(CompletionFn client) {
  return std::make_unique<ServiceCritic>(std::move(client));
}

Trajectory critic_filter(Trajectory trajectory, Critic& critic) {
  critic.review(trajectory);
  return trajectory;
}

json to_json(const SftRecord& v) {
  json turns = json::array();
  for (const auto& t : v.prompt.user_turns) {
    turns.push_back(json{{"text", t.text}, {"has_image", t.has_image}});
  }
  return json{{"stamp_schema", 1},
              {"prompt",
               {{"system_text", v.prompt.system_text},
                {"user_turns", turns},
                {"compressed_history", v.prompt.compressed_history}}},
              {"target", v.target},
              {"weights", {{"w_bal", v.w_bal}, {"w_a", v.w_a}, {"w_m", v.w_m}}},
              {"masks", {{"action_masked", v.action_masked}, {"memory_masked", v.memory_masked}}},
              {"ids", {{"task_id", v.task_id}, {"traj_id", v.traj_id}, {"step_id", v.step_id}}}};
}

std::vector<SftRecord> emit_sft(const std::vector<Trajectory>& trajectories,
                                const SftOptions& opts) {
  std::vector<SftRecord> records;
  std::vector<bool> is_memory_record;

  for (const auto& traj : trajectories) {
    if (!traj.outcome || !traj.outcome->success) continue;  // only-success emission
    std::vector<HistoryEntry> history;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
      const StepRecord& s = traj.steps[i];
      history.push_back({s.action_desc, s.memory, s.user_text});
      if (!s.trainable) continue;
      int t = static_cast<int>(i) + 1;
      SftRecord rec;
      rec.prompt = assemble_prompt(traj.goal, history, t);  // history beyond t-1 unused
      StepOutput target{s.thought, s.action_desc, s.b ? s.m_tilde : std::string(),
                        tool_action_from_json(s.tool_call)};
      rec.target = render_step_output(target);
      rec.w_bal = s.b ? opts.n : 1.0;
      rec.w_a = opts.w_a;
      rec.w_m = opts.w_m;
      rec.action_masked = s.action_masked;
      rec.memory_masked = s.memory_masked;
      rec.task_id = traj.task_id;
      rec.traj_id = traj.traj_id;
      rec.step_id = t;
      is_memory_record.push_back(s.b && !s.memory_masked);
      records.push_back(std::move(rec));
    }
  }

  if (!opts.upsample) return records;

  long long mem = 0, ord = 0;
  for (bool m : is_memory_record) (m ? mem : ord)++;
  if (mem == 0) {
    if (ord == 0) return records;
    throw HarnessError("target ratio unreachable with zero memory steps");
  }
  double r = static_cast<double>(opts.ratio_memory) / opts.ratio_ordinary;
  long long target_total = std::llround(r * static_cast<double>(ord));
  if (target_total <= mem) return records;

  // Spread duplicates evenly over the memory records.
  long long extra = target_total - mem;
  std::vector<SftRecord> out;
  long long seen_mem = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(records[i]);
    if (is_memory_record[i]) {
      long long copies =
          (extra * (seen_mem + 1)) / mem - (extra * seen_mem) / mem;  // fair share
      for (long long c = 0; c < copies; ++c) out.push_back(records[i]);
      seen_mem++;
    }
  }
  return out;
}

void write_sft(const std::string& path, const std::vector<SftRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HarnessError("cannot open '" + path + "' for writing");
  for (const auto& r : records) out << canonical_dump(to_json(r)) << "\n";
}

}  // namespace stamp
