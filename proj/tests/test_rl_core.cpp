#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "stamp/rl_core.hpp"

using namespace stamp;

namespace {

JudgeFn offline = [](const std::vector<std::string>& ref, const std::vector<std::string>& pred) {
  return offline_judge(ref, pred);
};

Trajectory traj_fixture(bool success, bool valid_format, double gamma_target) {
  Trajectory t;
  t.outcome = GradeResult{success, "x", success ? "x" : "y"};
  // Two memory steps; gamma 1 -> both match, 0.5 -> one, 0 -> none.
  for (int i = 0; i < 2; ++i) {
    StepRecord s;
    s.b = true;
    s.m_tilde = i == 0 ? "alpha=AA" : "beta=BB";
    bool recall = gamma_target >= 1.0 || (gamma_target >= 0.5 && i == 0);
    s.memory = recall ? s.m_tilde : "";
    StepOutput out{"t", "Click x", s.memory, ToolAction{}};
    out.tool_call.action = MobileAction::click;
    out.tool_call.coordinate = {10, 200};
    s.raw_output = render_step_output(out);
    if (!valid_format && i == 0) s.raw_output = "Action: no think here";
    t.steps.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("reward fixtures hit the pinned totals") {
  struct Case {
    bool success, valid;
    double gamma, want;
  } cases[] = {
      {true, true, 1.0, 1.3},
      {false, false, 0.0, -0.3},
      {true, true, 0.5, 1.15},
  };
  for (const auto& c : cases) {
    CAPTURE(c.want);
    RewardBreakdown r = total_reward(traj_fixture(c.success, c.valid, c.gamma), offline);
    CHECK(r.total == doctest::Approx(c.want).epsilon(1e-12));
    CHECK(r.total == doctest::Approx(r.r_task + r.r_fmt + r.r_mem).epsilon(1e-12));
  }
}

TEST_CASE("format penalty applies once per trajectory") {
  CHECK(format_reward({"garbage", "garbage"}) == doctest::Approx(-0.3));
  StepOutput ok{"t", "Wait", "", ToolAction{}};
  ok.tool_call.action = MobileAction::wait;
  ok.tool_call.time = 1.0;
  std::string good = render_step_output(ok);
  CHECK(format_reward({good, good}) == 0.0);
  CHECK(format_reward({good, "garbage"}) == doctest::Approx(-0.3));
  CHECK(format_reward({}) == 0.0);
}

TEST_CASE("task reward requires an outcome") {
  CHECK(task_reward(GradeResult{true, "a", "a"}) == 1.0);
  CHECK(task_reward(GradeResult{false, "a", "b"}) == 0.0);
  CHECK_THROWS(task_reward(std::nullopt));
}

TEST_CASE("offline judge grades by core-value containment") {
  std::vector<std::string> ref = {"release=2024-03-01", "price=$12.99"};
  CHECK(offline_judge(ref, {"noted release=2024-03-01", "price is $12.99"}) ==
        JudgeVerdict::Complete);
  CHECK(offline_judge(ref, {"the date was 2024-03-01"}) == JudgeVerdict::Partial);
  CHECK(offline_judge(ref, {"nothing useful"}) == JudgeVerdict::None);
  // case-insensitive
  CHECK(offline_judge({"name=NovaBeat"}, {"remember novabeat"}) == JudgeVerdict::Complete);
  // empty reference is trivially complete
  CHECK(offline_judge({}, {}) == JudgeVerdict::Complete);
  CHECK(gamma_of(JudgeVerdict::Complete) == 1.0);
  CHECK(gamma_of(JudgeVerdict::Partial) == 0.5);
  CHECK(gamma_of(JudgeVerdict::None) == 0.0);
}

TEST_CASE("judge verdict parsing is strict") {
  CHECK(parse_judge_verdict("Complete Match") == JudgeVerdict::Complete);
  CHECK(parse_judge_verdict("reasoning...\nPartial Match\n") == JudgeVerdict::Partial);
  CHECK(parse_judge_verdict("  \"No Match\"  ") == JudgeVerdict::None);
  CHECK_THROWS_AS(parse_judge_verdict("complete-ish"), TransportError);
  CHECK_THROWS_AS(parse_judge_verdict("The match is Complete"), TransportError);
}

TEST_CASE("completion judge falls back to offline on transport failure") {
  std::vector<std::string> ref = {"alpha=1"};
  SUBCASE("service verdict wins") {
    JudgeFn j = completion_judge([](const std::string&) { return "No Match"; }, "task");
    CHECK(j(ref, {"alpha=1"}) == JudgeVerdict::None);
  }
  SUBCASE("fallback") {
    JudgeFn j = completion_judge(
        [](const std::string&) -> std::string { throw std::runtime_error("down"); }, "task");
    CHECK(j(ref, {"saw alpha=1"}) == JudgeVerdict::Complete);
  }
  SUBCASE("no fallback rethrows") {
    JudgeFn j = completion_judge(
        [](const std::string&) -> std::string { throw TransportError("down"); }, "task", false);
    CHECK_THROWS_AS(j(ref, {}), TransportError);
  }
  SUBCASE("prompt carries reference and prediction") {
    std::string seen;
    JudgeFn j = completion_judge(
        [&](const std::string& p) {
          seen = p;
          return "Complete Match";
        },
        "find the code");
    j(ref, {"alpha=1 noted"});
    CHECK(seen.find("find the code") != std::string::npos);
    CHECK(seen.find("alpha=1") != std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Step-GRPO
// ---------------------------------------------------------------------------

namespace {

std::vector<RolloutSample> group(const std::string& task,
                                 const std::vector<std::pair<std::string, std::vector<double>>>&
                                     trajs) {
  // each pair: traj_id -> per-step scores (terminal last)
  std::vector<RolloutSample> out;
  for (const auto& [tid, scores] : trajs) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out.push_back({task, tid, static_cast<int>(i) + 1, scores[i],
                     i + 1 == scores.size(), ""});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("four-trajectory fixture matches the pinned advantages") {
  auto samples = group("t", {{"a", {1.3}}, {"b", {0.3}}, {"c", {0.3}}, {"d", {0.3}}});
  AdvantageResult res = step_grpo_advantages(samples, {});
  REQUIRE(res.advantages.size() == 4);
  CHECK(res.advantages[0] == doctest::Approx(1.7321).epsilon(1e-4));
  for (int i = 1; i < 4; ++i) CHECK(res.advantages[i] == doctest::Approx(-0.5774).epsilon(1e-4));
}

TEST_CASE("beta decays earlier steps of the winning trajectory") {
  auto samples = group("t", {{"a", {1.3, 1.3, 1.3}}, {"b", {0.3}}, {"c", {0.3}}, {"d", {0.3}}});
  AdvantageConfig cfg;
  cfg.beta = 0.5;
  AdvantageResult res = step_grpo_advantages(samples, cfg);
  CHECK(res.advantages[0] == doctest::Approx(0.4330).epsilon(1e-3));
  CHECK(res.advantages[1] == doctest::Approx(0.8660).epsilon(1e-3));
  CHECK(res.advantages[2] == doctest::Approx(1.7321).epsilon(1e-3));
  // beta=1 broadcasts the terminal advantage unchanged
  AdvantageResult flat = step_grpo_advantages(samples, {});
  CHECK(flat.advantages[0] == doctest::Approx(flat.advantages[2]).epsilon(1e-12));
}

TEST_CASE("degenerate groups") {
  SUBCASE("all-equal scores give zero advantage") {
    auto samples = group("t", {{"a", {0.3}}, {"b", {0.3}}, {"c", {0.3}}});
    AdvantageResult res = step_grpo_advantages(samples, {});
    for (double a : res.advantages) CHECK(std::abs(a) < 1e-6);
  }
  SUBCASE("group of one is zeroed with a warning") {
    auto samples = group("t", {{"a", {1.0, 1.3}}});
    AdvantageResult res = step_grpo_advantages(samples, {});
    for (double a : res.advantages) CHECK(a == 0.0);
    CHECK_FALSE(res.warnings.empty());
  }
  SUBCASE("empty input") {
    AdvantageResult res = step_grpo_advantages({}, {});
    CHECK(res.advantages.empty());
  }
}

TEST_CASE("brute-force oracle over 1000 random groups") {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> score(-0.3, 1.3);
  const double eps = 1e-8;
  for (int g = 0; g < 1000; ++g) {
    int k = 2 + static_cast<int>(rng() % 15);  // group size 2..16
    std::vector<std::pair<std::string, std::vector<double>>> trajs;
    std::vector<double> terminals;
    std::vector<int> lens;
    for (int i = 0; i < k; ++i) {
      int len = 1 + static_cast<int>(rng() % 4);
      std::vector<double> scores(len, 0.0);
      scores.back() = score(rng);
      terminals.push_back(scores.back());
      lens.push_back(len);
      trajs.push_back({"traj" + std::to_string(i), scores});
    }
    double beta = 0.25 + 0.75 * (static_cast<double>(rng() % 1000) / 1000.0);
    auto samples = group("task", trajs);
    AdvantageConfig cfg;
    cfg.beta = beta;
    AdvantageResult res = step_grpo_advantages(samples, cfg);

    // Independent oracle: naive two-pass mean/population-sigma.
    double mu = 0.0;
    for (double s : terminals) mu += s;
    mu /= k;
    double var = 0.0;
    for (double s : terminals) var += (s - mu) * (s - mu);
    double sigma = std::sqrt(var / k);
    double shat_sum = 0.0;
    std::size_t cursor = 0;
    for (int i = 0; i < k; ++i) {
      double shat = (terminals[i] - mu) / (sigma + eps);
      shat_sum += shat;
      for (int t = 1; t <= lens[i]; ++t) {
        double want = shat * std::pow(beta, lens[i] - t);
        REQUIRE(res.advantages[cursor] == doctest::Approx(want).epsilon(1e-12));
        cursor++;
      }
    }
    CHECK(std::abs(shat_sum / k) < 1e-9);  // normalized scores are centered
  }
}

TEST_CASE("each_step mode normalizes within (task, step)") {
  auto samples = group("t", {{"a", {1.0, 2.0}}, {"b", {3.0, 4.0}}, {"c", {5.0, 6.0}}});
  AdvantageConfig cfg;
  cfg.mode = AdvantageMode::each_step;
  AdvantageResult res = step_grpo_advantages(samples, cfg);
  // step 1 scores {1,3,5}: mean 3, sigma sqrt(8/3)
  double sigma1 = std::sqrt(8.0 / 3.0) + 1e-8;
  CHECK(res.advantages[0] == doctest::Approx(-2.0 / sigma1).epsilon(1e-9));
  CHECK(res.advantages[2] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(res.advantages[4] == doctest::Approx(2.0 / sigma1).epsilon(1e-9));
  // step 2 scores {2,4,6}
  CHECK(res.advantages[1] == doctest::Approx(-2.0 / sigma1).epsilon(1e-9));
  CHECK(res.advantages[5] == doctest::Approx(2.0 / sigma1).epsilon(1e-9));
}

TEST_CASE("write_scores emits one JSONL line per sample") {
  namespace fs = std::filesystem;
  auto samples = group("t", {{"a", {1.3}}, {"b", {0.3}}});
  AdvantageResult res = step_grpo_advantages(samples, {});
  fs::path path = fs::temp_directory_path() / "stamp-scores-test.jsonl";
  write_scores(path.string(), samples, res.advantages);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    CHECK(j.contains("advantage"));
    CHECK(j.at("task_id") == "t");
    lines++;
  }
  CHECK(lines == 2);
  fs::remove(path);
}

// ---------------------------------------------------------------------------
// Rollout buffer
// ---------------------------------------------------------------------------

TEST_CASE("buffer preserves FIFO and discards stale versions") {
  RolloutBuffer buf(16);
  for (int i = 0; i < 4; ++i) {
    RolloutBatch b;
    b.policy_version = i % 2;  // interleave stale version 1
    b.samples.push_back({"t", "traj" + std::to_string(i), 1, 0.0, true, ""});
    CHECK(buf.push(std::move(b)));
  }
  auto got = buf.drain(0);
  REQUIRE(got.size() == 2);
  CHECK(got[0].samples[0].traj_id == "traj0");
  CHECK(got[1].samples[0].traj_id == "traj2");
  CHECK(buf.stale_discarded() == 2);
  CHECK(buf.size() == 0);
}

TEST_CASE("non-blocking buffer rejects when full") {
  RolloutBuffer buf(2, false);
  CHECK(buf.push({}));
  CHECK(buf.push({}));
  CHECK_FALSE(buf.push({}));
  buf.drain(0);
  CHECK(buf.push({}));
}

TEST_CASE("blocking push waits for a drain") {
  RolloutBuffer buf(1);
  CHECK(buf.push({}));
  std::atomic<bool> pushed{false};
  std::thread producer([&] {
    buf.push({});
    pushed = true;
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK_FALSE(pushed.load());
  buf.drain(0);
  producer.join();
  CHECK(pushed.load());
}

TEST_CASE("stress: four producers, one consumer, version bumps, zero stale kept") {
  const int kBatches = 10000;
  RolloutBuffer buf(64);
  std::atomic<long long> version{0};
  std::atomic<int> produced{0};
  std::vector<std::thread> producers;
  for (int p = 0; p < 4; ++p) {
    producers.emplace_back([&] {
      while (true) {
        int i = produced.fetch_add(1);
        if (i >= kBatches) break;
        RolloutBatch b;
        b.policy_version = version.load();
        b.samples.push_back({"t", std::to_string(i), 1, 0.0, true, ""});
        buf.push(std::move(b));
      }
    });
  }
  long long kept = 0;
  int drains = 0;
  while (kept + buf.stale_discarded() < kBatches) {
    long long v = version.load();
    for (const auto& b : buf.drain(v)) {
      CHECK(b.policy_version == v);  // strict on-policy: nothing stale delivered
      kept++;
    }
    if (++drains % 50 == 0) version.fetch_add(1);  // trainer update
    std::this_thread::yield();
  }
  for (auto& t : producers) t.join();
  // late stragglers pushed after the final count may remain; flush them
  for (long long v = version.load(); buf.size() > 0;) kept += buf.drain(v).size();
  CHECK(kept + buf.stale_discarded() >= kBatches);
  CHECK(kept > 0);
}

TEST_CASE("trainer defaults are pinned") {
  TrainerDefaults d;
  CHECK(d.learning_rate == 2e-7);
  CHECK(d.train_batch == 32);
  CHECK(d.mini_batch == 32);
  CHECK(d.micro_batch_per_device == 1);
  CHECK(d.clip_low == 0.05);
  CHECK(d.clip_high == 0.05);
  CHECK(d.kl_coefficient == 0.05);
  CHECK(d.kl_type == "low_variance");
  CHECK(d.entropy_coefficient == 5e-4);
  CHECK(d.critic_warmup == 0);
  json j = to_json(d);
  CHECK(j.at("learning_rate") == 2e-7);
  CHECK(j.at("kl_type") == "low_variance");
}
