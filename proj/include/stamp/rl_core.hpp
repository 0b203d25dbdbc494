#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>

#include "stamp/harness.hpp"

namespace stamp {

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

struct RewardBreakdown {
  double r_task = 0.0;  // {0, 1}
  double r_fmt = 0.0;   // {0, -0.3}, once per trajectory
  double r_mem = 0.0;   // 0.3 * gamma, gamma in {1, 0.5, 0}
  double total = 0.0;
};

enum class JudgeVerdict { Complete, Partial, None };
double gamma_of(JudgeVerdict v);
std::string to_string(JudgeVerdict v);

using JudgeFn = std::function<JudgeVerdict(const std::vector<std::string>& reference,
                                           const std::vector<std::string>& predicted)>;

// Core-value containment: Complete iff every reference item's value token
// (text after '=') appears case-insensitively somewhere in the predicted
// trace; Partial iff at least one does; None otherwise.
JudgeVerdict offline_judge(const std::vector<std::string>& reference,
                           const std::vector<std::string>& predicted);

// Exact-string verdict-line parsing; throws TransportError when no verdict
// line is present.
JudgeVerdict parse_judge_verdict(const std::string& reply);

// HTTP-backed judge on the fixed Memory-Acc prompt; on transport failure
// falls back to the offline judge when allowed, else rethrows.
JudgeFn completion_judge(CompletionFn client, std::string task_text,
                         bool fallback_offline = true);

double task_reward(const std::optional<GradeResult>& outcome);  // throws if absent
double format_reward(const std::vector<std::string>& raw_step_texts);
double memory_reward(const std::vector<std::string>& reference,
                     const std::vector<std::string>& predicted, const JudgeFn& judge);

// Reference trace = m_tilde units of b=true steps; predicted trace = emitted
// Memory fields on those steps.
RewardBreakdown total_reward(const Trajectory& trajectory, const JudgeFn& judge);

// ---------------------------------------------------------------------------
// Step-GRPO advantages
// ---------------------------------------------------------------------------

struct RolloutSample {
  std::string task_id;
  std::string traj_id;
  int step_id = 0;  // >= 1
  double score = 0.0;
  bool is_final_step = false;
  std::string response_ref;
};

enum class AdvantageMode { last_step, each_step };

struct AdvantageConfig {
  AdvantageMode mode = AdvantageMode::last_step;
  double beta = 1.0;      // temporal decay in (0, 1]
  double epsilon = 1e-8;  // denominator guard
};

struct AdvantageResult {
  std::vector<double> advantages;  // aligned with the input samples
  std::vector<std::string> warnings;
};

// last_step: s_hat = (terminal score - mean)/(population sigma + eps) per
// task, broadcast to every step scaled by beta^(t_max - t_i). each_step:
// normalization within each (task_id, step_id) group.
AdvantageResult step_grpo_advantages(const std::vector<RolloutSample>& samples,
                                     const AdvantageConfig& cfg);

void write_scores(const std::string& path, const std::vector<RolloutSample>& samples,
                  const std::vector<double>& advantages);

// ---------------------------------------------------------------------------
// Rollout buffer (bounded, strict on-policy)
// ---------------------------------------------------------------------------

struct RolloutBatch {
  std::vector<RolloutSample> samples;
  long long policy_version = 0;
};

class RolloutBuffer {
 public:
  // block_when_full=false makes push reject (return false) instead of block.
  explicit RolloutBuffer(std::size_t capacity, bool block_when_full = true);

  bool push(RolloutBatch batch);
  // Pops everything currently queued; returns only batches matching the
  // requested version (FIFO); stale-version batches are discarded and counted.
  std::vector<RolloutBatch> drain(long long policy_version);

  long long stale_discarded() const;
  std::size_t size() const;

 private:
  std::size_t capacity_;
  bool block_when_full_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::deque<RolloutBatch> queue_;
  long long stale_discarded_ = 0;
};

// ---------------------------------------------------------------------------
// Trainer configuration carrier
// ---------------------------------------------------------------------------

struct TrainerDefaults {
  double learning_rate = 2e-7;
  int train_batch = 32;
  int mini_batch = 32;
  int micro_batch_per_device = 1;
  double clip_low = 0.05;
  double clip_high = 0.05;
  double kl_coefficient = 0.05;
  std::string kl_type = "low_variance";
  double entropy_coefficient = 5e-4;
  int critic_warmup = 0;
};

json to_json(const TrainerDefaults& v);

}  // namespace stamp
