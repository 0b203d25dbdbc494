#pragma once

#include <memory>

#include "stamp/agent_protocol.hpp"
#include "stamp/env_engine.hpp"

namespace stamp {

// ---------------------------------------------------------------------------
// Trajectory records
// ---------------------------------------------------------------------------

struct StepRecord {
  std::string screenshot_ref;  // digest of the pre-action observation
  json action;                 // engine action payload
  json tool_call;              // mobile_use tool call payload
  std::string action_desc;     // a_t
  std::string thought;         // c_t (synthesized for scripted runs)
  std::string conclusion;
  bool trainable = true;
  std::string non_trainable_reason;
  std::string memory;  // m_t as emitted
  bool b = false;      // memory-required flag
  std::string m_tilde; // target memory, empty when b = false
  bool action_masked = false;
  bool memory_masked = false;
  std::string effect;
  std::string page_id;  // page of the pre-action observation
  std::vector<std::string> visible_facts;  // "key=value" pairs shown pre-action
  std::string user_text;   // user-turn text for prompt assembly
  std::string raw_output;  // rendered step output as produced (r_fmt input)
};

struct Trajectory {
  std::string goal;
  std::vector<StepRecord> steps;
  std::optional<GradeResult> outcome;
  std::string task_id;
  std::string traj_id;
};

json to_json(const StepRecord& v);
json to_json(const Trajectory& v);
StepRecord step_record_from_json(const json& j);
Trajectory trajectory_from_json(const json& j);

void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories(const std::string& path);

// ---------------------------------------------------------------------------
// Planner / worker interfaces
// ---------------------------------------------------------------------------

struct PlanProposal {
  enum class Kind { Click, Input, Scroll, End } kind = Kind::Click;
  std::string description;    // element description (testid for the oracle)
  std::string target_testid;  // oracle grounding hint
  std::string text;           // Input payload
  std::string memory;         // memory the planner wants externalized
  std::string think;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual PlanProposal next(const Observation& obs, const Trajectory& so_far) = 0;
};

class Worker {
 public:
  virtual ~Worker() = default;
  virtual Action ground(const PlanProposal& proposal, const Observation& obs) = 0;
};

struct HarnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Guideline-following oracle. emit_memory=false yields the memory-suppressed
// variant (solves the task but never externalizes facts).
std::unique_ptr<Planner> scripted_planner(const EnvironmentBundle& bundle,
                                          bool emit_memory = true);
std::unique_ptr<Worker> oracle_worker();

// Service-backed planner/worker on chat completion functions.
std::unique_ptr<Planner> service_planner(const EnvironmentBundle& bundle, CompletionFn client);
std::unique_ptr<Worker> service_worker(CompletionFn client);

// Parses the worker grammar: "click (x, y)" | "type (x, y, text)" | "scroll".
Action parse_worker_output(const std::string& text);

Trajectory run_episode(const EnvironmentBundle& bundle, Planner& planner, Worker& worker,
                       int max_steps);

// ---------------------------------------------------------------------------
// Alignment, filtering, SFT emission
// ---------------------------------------------------------------------------

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// First-reveal rule: for each memory item, the first step whose pre-action
// observation shows the fact carrier gets b=true and m_tilde "{key}={value}";
// multiple items on one step concatenate with "; " in memory_item order.
Trajectory align_memory(Trajectory trajectory, const TaskSpec& task_spec);

class Critic {
 public:
  virtual ~Critic() = default;
  virtual void review(Trajectory& trajectory) = 0;
};

// noop-effect steps -> non-trainable + action-masked; emitted memory that
// contradicts m_tilde (or appears on b=false steps) -> memory-masked.
std::unique_ptr<Critic> heuristic_critic();
// Critic failures degrade to no-op filtering.
std::unique_ptr<Critic> service_critic(CompletionFn client);

Trajectory critic_filter(Trajectory trajectory, Critic& critic);

struct SftRecord {
  PromptBundle prompt;
  std::string target;
  double w_bal = 1.0, w_a = 1.0, w_m = 1.0;
  bool action_masked = false, memory_masked = false;
  std::string task_id, traj_id;
  int step_id = 0;
};

json to_json(const SftRecord& v);

struct SftOptions {
  // memory:ordinary dataset target, e.g. {3,1}; upsample=false is "vanilla".
  bool upsample = false;
  int ratio_memory = 1, ratio_ordinary = 1;
  double w_a = 1.0, w_m = 1.0;
  double n = 1.0;  // w_bal on b=true steps
};

// Admits only successful trajectories; throws HarnessError when upsampling is
// requested with zero memory steps.
std::vector<SftRecord> emit_sft(const std::vector<Trajectory>& trajectories,
                                const SftOptions& opts);

void write_sft(const std::string& path, const std::vector<SftRecord>& records);

}  // namespace stamp
