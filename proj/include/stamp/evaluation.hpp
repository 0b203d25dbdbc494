#pragma once

#include "stamp/rl_core.hpp"

namespace stamp {

struct EvalRun {
  std::string task_id;
  int attempt_index = 1;  // 1-based
  GradeResult outcome;
  std::vector<std::string> predicted_memories;
  std::vector<std::string> reference_memories;
  std::vector<double> grades;  // g_i in {1, 0.5, 0}, one per judged item
};

json to_json(const EvalRun& v);

// Arithmetic mean of per-item grades; throws on empty input.
double score_memory_accuracy(const std::vector<double>& grades);

// Fraction of tasks with at least one success among the first k attempts.
double score_pass_at_k(const std::map<std::string, std::vector<EvalRun>>& runs_by_task, int k);

// HRP scoring: each reference item is graded against the union of all
// textual outputs an agent produced, so memory recoverable anywhere in the
// transcript is credited.
std::vector<double> hrp_memory_credit(const std::vector<std::string>& transcript_texts,
                                      const std::vector<std::string>& references,
                                      const JudgeFn& judge);

enum class BenchAgent { scripted, scripted_nomem, noop, service };
enum class BenchVariant { guided, natural };

std::string to_string(BenchAgent a);
std::string to_string(BenchVariant v);

struct BenchmarkReport {
  struct TaskResult {
    std::string task_id;
    double t_acc = 0.0;
    double m_acc = 0.0;
    std::vector<EvalRun> attempts;
  };
  std::vector<TaskResult> tasks;
  double t_acc = 0.0;
  double m_acc = 0.0;
  std::map<int, double> pass_at;  // k -> pass@k
  struct Meta {
    int k = 1;
    std::string variant;
    std::string agent;
    std::size_t suite_size = 0;
  } meta;
};

json to_json(const BenchmarkReport& v);

struct BenchmarkOptions {
  int k = 1;
  BenchVariant variant = BenchVariant::natural;
  BenchAgent agent = BenchAgent::scripted;
  int max_steps = 30;
  CompletionFn agent_client;  // required for BenchAgent::service
  JudgeFn judge;              // defaults to the offline judge
};

// Full protocol-level episode: assembles prompts via agent_protocol, calls the
// chat agent, parses StepOutput, and maps the tool call onto engine actions.
// Returns the trajectory plus the raw texts for format checks.
Trajectory run_agent_episode(const EnvironmentBundle& bundle, const CompletionFn& agent,
                             int max_steps, BenchVariant variant);

BenchmarkReport run_benchmark(const std::vector<EnvironmentBundle>& suite,
                              const BenchmarkOptions& opts);

}  // namespace stamp
