#include "stamp/rl_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stamp/prompts.hpp"

namespace stamp {

double gamma_of(JudgeVerdict v) {
  switch (v) {
    case JudgeVerdict::Complete: return 1.0;
    case JudgeVerdict::Partial: return 0.5;
    case JudgeVerdict::None: return 0.0;
  }
  return 0.0;
}

std::string to_string(JudgeVerdict v) {
  switch (v) {
    case JudgeVerdict::Complete: return "Complete Match";
    case JudgeVerdict::Partial: return "Partial Match";
    case JudgeVerdict::None: return "No Match";
  }
  return "No Match";
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// The verifiable core of a "key=value" unit is the value token.
std::string core_value(const std::string& item) {
  auto eq = item.find('=');
  return eq == std::string::npos ? item : item.substr(eq + 1);
}

}  // namespace

JudgeVerdict offline_judge(const std::vector<std::string>& reference,
                           const std::vector<std::string>& predicted) {
  if (reference.empty()) return JudgeVerdict::Complete;
  std::string haystack;
  for (const auto& p : predicted) haystack += lower(p) + "\n";
  std::size_t hit = 0;
  for (const auto& r : reference) {
    if (haystack.find(lower(core_value(r))) != std::string::npos) hit++;
  }
  if (hit == reference.size()) return JudgeVerdict::Complete;
  if (hit > 0) return JudgeVerdict::Partial;
  return JudgeVerdict::None;
}

JudgeVerdict parse_judge_verdict(const std::string& reply) {
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r\"");
    auto e = line.find_last_not_of(" \t\r\"");
    std::string t = b == std::string::npos ? "" : line.substr(b, e - b + 1);
    if (t == "Complete Match") return JudgeVerdict::Complete;
    if (t == "Partial Match") return JudgeVerdict::Partial;
    if (t == "No Match") return JudgeVerdict::None;
  }
  throw TransportError("judge reply carries no verdict line");
}

JudgeFn completion_judge(CompletionFn client, std::string task_text, bool fallback_offline) {
  return [client = std::move(client), task = std::move(task_text), fallback_offline](
             const std::vector<std::string>& reference,
             const std::vector<std::string>& predicted) -> JudgeVerdict {
    try {
      auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) {
          if (!s.empty()) s += "\n";
          s += x;
        }
        return s.empty() ? std::string("(nothing)") : s;
      };
      std::string prompt = substitute(
          prompts::kMemoryAccJudgePrompt,
          {{"task", task}, {"reference", join(reference)}, {"memorized", join(predicted)}});
      return parse_judge_verdict(client(prompt));
    } catch (const std::exception&) {
      if (fallback_offline) return offline_judge(reference, predicted);
      throw;
    }
  };
}

double task_reward(const std::optional<GradeResult>& outcome) {
  if (!outcome) throw std::invalid_argument("task_reward on a non-terminal trajectory");
  return outcome->success ? 1.0 : 0.0;
}

double format_reward(const std::vector<std::string>& raw_step_texts) {
  for (const auto& text : raw_step_texts) {
    try {
      parse_step_output(text);
    } catch (const StepParseError&) {
      return -0.3;  // once per trajectory, not additive
    }
  }
  return 0.0;
}

double memory_reward(const std::vector<std::string>& reference,
                     const std::vector<std::string>& predicted, const JudgeFn& judge) {
  return 0.3 * gamma_of(judge(reference, predicted));
}

RewardBreakdown total_reward(const Trajectory& trajectory, const JudgeFn& judge) {
  RewardBreakdown rb;
  rb.r_task = task_reward(trajectory.outcome);
  std::vector<std::string> raw;
  std::vector<std::string> reference, predicted;
  for (const auto& s : trajectory.steps) {
    raw.push_back(s.raw_output);
    if (s.b) {
      reference.push_back(s.m_tilde);
      if (!s.memory.empty()) predicted.push_back(s.memory);
    }
  }
  rb.r_fmt = format_reward(raw);
  rb.r_mem = memory_reward(reference, predicted, judge);
  rb.total = rb.r_task + rb.r_fmt + rb.r_mem;
  return rb;
}

// ---------------------------------------------------------------------------
// Step-GRPO
// ---------------------------------------------------------------------------

AdvantageResult step_grpo_advantages(const std::vector<RolloutSample>& samples,
                                     const AdvantageConfig& cfg) {
  AdvantageResult res;
  res.advantages.assign(samples.size(), 0.0);

  if (cfg.mode == AdvantageMode::last_step) {
    // task -> traj -> sample indices; terminal score and max step per traj.
    std::map<std::string, std::map<std::string, std::vector<std::size_t>>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      groups[samples[i].task_id][samples[i].traj_id].push_back(i);
    }
    for (const auto& [task, trajs] : groups) {
      std::vector<std::pair<const std::string*, double>> terminals;
      std::map<std::string, int> t_max;
      for (const auto& [traj, idxs] : trajs) {
        double terminal_score = 0.0;
        bool found = false;
        int mx = 0;
        for (std::size_t i : idxs) {
          mx = std::max(mx, samples[i].step_id);
          if (samples[i].is_final_step) {
            terminal_score = samples[i].score;
            found = true;
          }
        }
        if (!found) {
          res.warnings.push_back("trajectory " + traj + " has no final-step sample");
        }
        t_max[traj] = mx;
        terminals.push_back({&traj, terminal_score});
      }
      if (terminals.size() < 2) {
        res.warnings.push_back("task " + task +
                               " has a single trajectory; advantages set to 0");
        continue;
      }
      double mu = 0.0;
      for (const auto& [_, s] : terminals) mu += s;
      mu /= static_cast<double>(terminals.size());
      double var = 0.0;
      for (const auto& [_, s] : terminals) var += (s - mu) * (s - mu);
      double sigma = std::sqrt(var / static_cast<double>(terminals.size()));  // population
      std::map<std::string, double> s_hat;
      for (const auto& [traj, s] : terminals) s_hat[*traj] = (s - mu) / (sigma + cfg.epsilon);
      for (const auto& [traj, idxs] : trajs) {
        for (std::size_t i : idxs) {
          res.advantages[i] =
              s_hat[traj] * std::pow(cfg.beta, t_max[traj] - samples[i].step_id);
        }
      }
    }
  } else {
    // each_step: normalize within every (task_id, step_id) group.
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      groups[{samples[i].task_id, samples[i].step_id}].push_back(i);
    }
    for (const auto& [key, idxs] : groups) {
      double mu = 0.0;
      for (std::size_t i : idxs) mu += samples[i].score;
      mu /= static_cast<double>(idxs.size());
      double var = 0.0;
      for (std::size_t i : idxs) var += (samples[i].score - mu) * (samples[i].score - mu);
      double sigma = std::sqrt(var / static_cast<double>(idxs.size()));
      for (std::size_t i : idxs) {
        res.advantages[i] = (samples[i].score - mu) / (sigma + cfg.epsilon);
      }
    }
  }
  return res;
}

void write_scores(const std::string& path, const std::vector<RolloutSample>& samples,
                  const std::vector<double>& advantages) {
  if (samples.size() != advantages.size()) {
    throw std::invalid_argument("samples/advantages size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << canonical_dump(json{{"task_id", samples[i].task_id},
                               {"traj_id", samples[i].traj_id},
                               {"step_id", samples[i].step_id},
                               {"score", samples[i].score},
                               {"advantage", advantages[i]}})
        << "\n";
  }
}

// ---------------------------------------------------------------------------
// Rollout buffer
// ---------------------------------------------------------------------------

RolloutBuffer::RolloutBuffer(std::size_t capacity, bool block_when_full)
    : capacity_(capacity), block_when_full_(block_when_full) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be >= 1");
}

bool RolloutBuffer::push(RolloutBatch batch) {
  std::unique_lock<std::mutex> lock(mu_);
  if (queue_.size() >= capacity_) {
    if (!block_when_full_) return false;
    not_full_.wait(lock, [&] { return queue_.size() < capacity_; });
  }
  queue_.push_back(std::move(batch));
  return true;
}

std::vector<RolloutBatch> RolloutBuffer::drain(long long policy_version) {
  std::deque<RolloutBatch> taken;
  {
    std::lock_guard<std::mutex> lock(mu_);
    taken.swap(queue_);
    for (const auto& b : taken) {
      if (b.policy_version != policy_version) stale_discarded_++;
    }
  }
  not_full_.notify_all();
  std::vector<RolloutBatch> out;
  for (auto& b : taken) {
    if (b.policy_version == policy_version) out.push_back(std::move(b));
  }
  return out;
}

long long RolloutBuffer::stale_discarded() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stale_discarded_;
}

std::size_t RolloutBuffer::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.size();
}

json to_json(const TrainerDefaults& v) {
  return json{{"learning_rate", v.learning_rate},
              {"train_batch", v.train_batch},
              {"mini_batch", v.mini_batch},
              {"micro_batch_per_device", v.micro_batch_per_device},
              {"clip_low", v.clip_low},
              {"clip_high", v.clip_high},
              {"kl_coefficient", v.kl_coefficient},
              {"kl_type", v.kl_type},
              {"entropy_coefficient", v.entropy_coefficient},
              {"critic_warmup", v.critic_warmup}};
}

}  // namespace stamp
