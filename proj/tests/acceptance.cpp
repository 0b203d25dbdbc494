// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "stamp/evaluation.hpp"

using namespace stamp;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
  void require(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
};

std::vector<EnvironmentBundle> gen_suite(long long first_seed, int count) {
  std::vector<EnvironmentBundle> out;
  for (long long seed = first_seed; seed < first_seed + count; ++seed) {
    auto [p, t] = sample_seeds(seed, default_catalog());
    out.push_back(generate_environment(p, t, seed));
  }
  return out;
}

int required_steps_of(const EnvironmentBundle& b) {
  for (const auto& t : default_catalog().tasks) {
    if (t.id == b.provenance.task_seed_id) return t.required_steps;
  }
  return 0;
}

Action action_from_json(const json& j) {
  std::string kind = j.at("kind");
  if (kind == "click") return Action::Click(j.at("x"), j.at("y"));
  if (kind == "type") return Action::Type(j.at("x"), j.at("y"), j.at("text"));
  if (kind == "scroll") return Action::Scroll();
  if (kind == "open") return Action::Open(j.at("testid"));
  if (kind == "back") return Action::Back();
  if (kind == "answer") return Action::Answer(j.at("text"));
  throw std::runtime_error("unknown action kind " + kind);
}

// ---------------------------------------------------------------------------

Check c1_synthesis_determinism() {
  Check c;
  auto start = std::chrono::steady_clock::now();
  auto first = gen_suite(1, 100);
  auto second = gen_suite(1, 100);
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (int i = 0; i < 100; ++i) {
    if (bundle_digest(first[i]) != bundle_digest(second[i])) {
      c.fail("digest mismatch at seed " + std::to_string(i + 1));
    }
  }
  c.require(secs < 60.0, "regeneration took " + std::to_string(secs) + "s");
  c.detail = c.ok ? "100 byte-identical digests in " + std::to_string(secs).substr(0, 5) + "s"
                  : c.detail;
  return c;
}

Check c2_end_to_end_soundness(const std::vector<EnvironmentBundle>& suite) {
  Check c;
  int solved = 0, recalled = 0;
  for (const auto& b : suite) {
    auto planner = scripted_planner(b);
    auto worker = oracle_worker();
    Trajectory traj = run_episode(b, *planner, *worker, 60);
    if (!traj.outcome || !traj.outcome->success) {
      c.fail("episode failed on task " + b.provenance.task_seed_id);
      continue;
    }
    solved++;
    int bound = required_steps_of(b) +
                static_cast<int>(b.task_spec.task.memory_items.size()) + 3;
    c.require(static_cast<int>(traj.steps.size()) <= bound,
              "episode exceeded step bound " + std::to_string(bound));

    // Replay the recorded actions: the final screen must show "Success!".
    EnvState state = reset(b, 60, false);
    for (const auto& s : traj.steps) step(state, action_from_json(s.action));
    Observation final_obs = render_observation(state);
    c.require(final_obs.success_banner == std::optional<std::string>("Success!"),
              "no visible Success! banner after replay");

    // M-Acc: every memory item recalled verbatim.
    Trajectory aligned = align_memory(traj, b.task_spec);
    std::vector<std::string> ref, pred;
    for (const auto& s : aligned.steps) {
      if (s.b) {
        ref.push_back(s.m_tilde);
        if (!s.memory.empty()) pred.push_back(s.memory);
      }
    }
    if (offline_judge(ref, pred) == JudgeVerdict::Complete) recalled++;
  }
  c.require(solved == static_cast<int>(suite.size()), "T-Acc below 1.0");
  c.require(recalled == static_cast<int>(suite.size()), "M-Acc below 1.0");
  if (c.ok) c.detail = "T-Acc=1.0 M-Acc=1.0 over " + std::to_string(solved) + " episodes";
  return c;
}

Check c3_gold_exclusivity(const std::vector<EnvironmentBundle>& suite) {
  Check c;
  std::mt19937_64 rng(9001);
  for (const auto& b : suite) {
    EnvState s = reset(b, 10, false);
    std::set<std::string> candidates = {b.gold};
    for (const auto& [k, v] : b.facts) candidates.insert(v);
    for (int i = 0; i < 100; ++i) {
      std::ostringstream os;
      os << "rnd-" << std::hex << rng();
      candidates.insert(os.str());
    }
    int successes = 0;
    for (const auto& cand : candidates) {
      if (grade(s, cand).success) successes++;
    }
    if (successes != 1) {
      c.fail("grading succeeded " + std::to_string(successes) + " times for one bundle");
    }
  }
  if (c.ok) c.detail = "exactly one accepted answer per bundle";
  return c;
}

Check c4_mutation_suite(const std::vector<EnvironmentBundle>& suite) {
  Check c;
  int applied = 0, flagged = 0;
  for (const auto& clean : suite) {
    if (statically_verify(clean).ok == false) {
      c.fail("false flag on a clean bundle");
      continue;
    }
    for (int m = 0; m < 2 && applied < 200; ++m) {
      EnvironmentBundle mut = clean;
      bool did = false;
      if (m == 0) {
        // ambiguity: give a home-page distractor a value that contests the gold
        Page* home = mut.page_graph.find_page(mut.page_graph.home_page_id);
        for (auto& e : home->elements) {
          if (e.kind == ElementKind::distractor) {
            if (mut.provenance.task_seed_id == "date_compare_latest") e.value = "2099-12-31";
            else if (mut.provenance.task_seed_id == "price_compare_cheapest") e.value = "$0.01";
            else e.value = mut.facts.begin()->second;
            did = true;
            break;
          }
        }
      } else {
        // structural: break a required testid
        Page* submit = mut.page_graph.find_page(mut.page_graph.submission_page_id);
        std::erase_if(submit->elements,
                      [](const Element& e) { return e.testid == "answer-submit"; });
        did = true;
      }
      if (!did) continue;
      applied++;
      InspectionReport rep = statically_verify(mut);
      if (!rep.ok) flagged++;
    }
  }
  c.require(applied == 200, "only " + std::to_string(applied) + " mutations applied");
  c.require(flagged * 100 >= applied * 95,
            "flag rate " + std::to_string(flagged) + "/" + std::to_string(applied));
  if (c.ok) {
    c.detail = std::to_string(flagged) + "/" + std::to_string(applied) +
               " mutations flagged, zero false flags";
  }
  return c;
}

Check c5_protocol_round_trip() {
  Check c;
  std::mt19937_64 rng(20260825);
  auto below = [&](int n) { return static_cast<int>(rng() % n); };
  auto word = [&]() {
    static const char* pool[] = {"open", "tab", "read", "fact", "note", "price"};
    return std::string(pool[below(6)]);
  };
  auto text = [&](int n) {
    std::string out = word();
    for (int i = 1 + below(n); i > 0; --i) out += " " + word();
    return out;
  };
  for (int i = 0; i < 1000 && c.ok; ++i) {
    StepOutput s;
    s.think = text(8);
    s.action_desc = text(3);
    s.memory = below(3) == 0 ? "" : text(4);
    s.tool_call.action = MobileAction::click;
    s.tool_call.coordinate = {below(1001), below(1001)};
    if (below(3) == 0) {
      s.tool_call.action = MobileAction::type;
      s.tool_call.coordinate.reset();
      s.tool_call.text = text(2);
    }
    std::string wire = render_step_output(s);
    try {
      StepOutput back = parse_step_output(wire);
      c.require(back == s && render_step_output(back) == wire, "round trip diverged");
    } catch (const StepParseError& e) {
      c.fail(std::string("round trip refused: ") + e.what());
    }
  }

  StepOutput s{"think text", "Click the row", "key=value", ToolAction{}};
  s.tool_call.coordinate = {100, 200};
  std::string wire = render_step_output(s);
  auto kind_of = [](const std::string& t) -> std::optional<ParseErrorKind> {
    try {
      parse_step_output(t);
      return std::nullopt;
    } catch (const StepParseError& e) {
      return e.kind;
    }
  };
  std::string no_think = wire.substr(wire.find("</think>") + 9);
  std::string no_action = wire;
  no_action.erase(no_action.find("Action:"),
                  no_action.find("\nMemory:") - no_action.find("Action:"));
  std::string no_memory = wire;
  no_memory.erase(no_memory.find("Memory:"),
                  no_memory.find("<tool_call>") - no_memory.find("Memory:"));
  std::string no_tool = wire.substr(0, wire.find("<tool_call>"));
  c.require(kind_of(no_think) == ParseErrorKind::MissingThink, "think mutant misclassified");
  c.require(kind_of(no_action) == ParseErrorKind::MissingAction, "action mutant misclassified");
  c.require(kind_of(no_memory) == ParseErrorKind::MissingMemory, "memory mutant misclassified");
  c.require(kind_of(no_tool) == ParseErrorKind::MissingToolCall, "tool mutant misclassified");
  if (c.ok) c.detail = "1000 round trips bit-exact; 4 deletion mutants classified distinctly";
  return c;
}

Check c6_history_protocol() {
  Check c;
  const std::map<int, std::pair<std::vector<int>, std::vector<int>>> expect = {
      {1, {{}, {}}},
      {3, {{1, 2}, {}}},
      {7, {{2, 3, 4, 5, 6}, {1}}},
      {9, {{4, 5, 6, 7, 8}, {1, 2, 3}}},
      {12, {{7, 8, 9, 10, 11}, {1, 2, 3, 4, 5, 6}}},
  };
  std::vector<HistoryEntry> steps;
  for (int i = 1; i <= 12; ++i) {
    steps.push_back({"Action " + std::to_string(i), "", "user " + std::to_string(i)});
  }
  for (const auto& [t, want] : expect) {
    StepIndexWindows w = windows(t);
    c.require(w.recent == want.first && w.early == want.second,
              "window mismatch at t=" + std::to_string(t));
    PromptBundle p = assemble_prompt("goal", steps, t);
    int images = 0;
    for (const auto& turn : p.user_turns) images += turn.has_image ? 1 : 0;
    c.require(images == std::min(5, t), "image budget mismatch at t=" + std::to_string(t));
  }
  std::string compressed = compress_history(steps, 12);
  int blocks = 0;
  for (std::size_t pos = compressed.find("Step "); pos != std::string::npos;
       pos = compressed.find("Step ", pos + 1)) {
    blocks++;
  }
  c.require(blocks == 6, "t=12 produced " + std::to_string(blocks) + " compressed blocks");
  if (c.ok) c.detail = "windows, image budgets and t=12 compression match";
  return c;
}

Trajectory reward_fixture(bool success, bool valid_format, double gamma) {
  Trajectory t;
  t.outcome = GradeResult{success, "x", success ? "x" : "y"};
  for (int i = 0; i < 2; ++i) {
    StepRecord s;
    s.b = true;
    s.m_tilde = i == 0 ? "alpha=AA" : "beta=BB";
    s.memory = (gamma >= 1.0 || (gamma >= 0.5 && i == 0)) ? s.m_tilde : "";
    StepOutput out{"t", "Click", s.memory, ToolAction{}};
    out.tool_call.coordinate = {10, 200};
    s.raw_output = valid_format ? render_step_output(out) : "no grammar here";
    t.steps.push_back(s);
  }
  return t;
}

Check c7_rewards() {
  Check c;
  JudgeFn judge = [](const std::vector<std::string>& r, const std::vector<std::string>& p) {
    return offline_judge(r, p);
  };
  struct Case {
    bool success, valid;
    double gamma, want;
  } cases[] = {{true, true, 1.0, 1.3}, {false, false, 0.0, -0.3}, {true, true, 0.5, 1.15}};
  for (const auto& k : cases) {
    double got = total_reward(reward_fixture(k.success, k.valid, k.gamma), judge).total;
    if (std::abs(got - k.want) > 1e-12) {
      c.fail("reward " + std::to_string(got) + " != " + std::to_string(k.want));
    }
  }
  if (c.ok) c.detail = "fixture totals {1.3, -0.3, 1.15} reproduced to 1e-12";
  return c;
}

Check c8_step_grpo() {
  Check c;
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> score(-0.3, 1.3);
  const double eps = 1e-8;
  for (int g = 0; g < 1000 && c.ok; ++g) {
    int k = 2 + static_cast<int>(rng() % 15);
    double beta = 0.25 + 0.75 * (static_cast<double>(rng() % 1000) / 1000.0);
    std::vector<RolloutSample> samples;
    std::vector<double> terminals;
    std::vector<int> lens;
    for (int i = 0; i < k; ++i) {
      int len = 1 + static_cast<int>(rng() % 4);
      lens.push_back(len);
      terminals.push_back(score(rng));
      for (int t = 1; t <= len; ++t) {
        samples.push_back({"task", "traj" + std::to_string(i), t,
                           t == len ? terminals.back() : 0.0, t == len, ""});
      }
    }
    AdvantageConfig cfg;
    cfg.beta = beta;
    auto res = step_grpo_advantages(samples, cfg);

    double mu = 0.0;
    for (double s : terminals) mu += s;
    mu /= k;
    double var = 0.0;
    for (double s : terminals) var += (s - mu) * (s - mu);
    double sigma = std::sqrt(var / k);
    double shat_mean = 0.0;
    std::size_t cursor = 0;
    for (int i = 0; i < k; ++i) {
      double shat = (terminals[i] - mu) / (sigma + eps);
      shat_mean += shat / k;
      for (int t = 1; t <= lens[i]; ++t, ++cursor) {
        double want = shat * std::pow(beta, lens[i] - t);
        if (std::abs(res.advantages[cursor] - want) > 1e-12) {
          c.fail("oracle mismatch in group " + std::to_string(g));
        }
      }
    }
    c.require(std::abs(shat_mean) < 1e-9, "normalized scores not centered");

    // beta=1 broadcast constancy on the same group
    cfg.beta = 1.0;
    auto flat = step_grpo_advantages(samples, cfg);
    cursor = 0;
    for (int i = 0; i < k; ++i) {
      for (int t = 1; t <= lens[i]; ++t, ++cursor) {
        if (std::abs(flat.advantages[cursor] - flat.advantages[cursor + lens[i] - t]) > 1e-12) {
          c.fail("beta=1 broadcast not constant");
        }
      }
    }
  }

  std::vector<RolloutSample> fixture = {{"t", "a", 1, 1.3, true, ""},
                                        {"t", "b", 1, 0.3, true, ""},
                                        {"t", "c", 1, 0.3, true, ""},
                                        {"t", "d", 1, 0.3, true, ""}};
  auto res = step_grpo_advantages(fixture, {});
  c.require(std::abs(res.advantages[0] - 1.7321) < 1e-4, "fixture winner advantage off");
  for (int i = 1; i < 4; ++i) {
    c.require(std::abs(res.advantages[i] + 0.5774) < 1e-4, "fixture loser advantage off");
  }
  if (c.ok) c.detail = "1000 groups match the brute-force oracle to 1e-12";
  return c;
}

Check c9_sft_balance() {
  Check c;
  // Synthetic successful corpus with exactly 20% memory steps: 1 of 5.
  std::vector<Trajectory> corpus;
  for (int i = 0; i < 8; ++i) {
    Trajectory t;
    t.task_id = "task" + std::to_string(i);
    t.traj_id = t.task_id + "-0";
    t.goal = "goal";
    t.outcome = GradeResult{true, "x", "x"};
    for (int s = 0; s < 5; ++s) {
      StepRecord r;
      r.action_desc = "Click row " + std::to_string(s);
      r.thought = "step";
      r.user_text = "user";
      ToolAction tool;
      tool.coordinate = {100, 200 + s};
      r.tool_call = to_json(tool);
      if (s == 2) {
        r.b = true;
        r.m_tilde = "key=value" + std::to_string(i);
        r.memory = r.m_tilde;
      }
      t.steps.push_back(r);
    }
    corpus.push_back(std::move(t));
  }

  for (auto [rm, ro] : {std::pair{1, 1}, std::pair{3, 1}}) {
    SftOptions opts;
    opts.upsample = true;
    opts.ratio_memory = rm;
    opts.ratio_ordinary = ro;
    opts.n = 3.0;
    auto recs = emit_sft(corpus, opts);
    long long mem = 0, ord = 0;
    for (const auto& r : recs) {
      bool is_mem = r.w_bal == 3.0 && !r.memory_masked;
      (is_mem ? mem : ord)++;
      if (is_mem && r.w_bal != opts.n) c.fail("b=true record lost w_bal=n");
    }
    double target = static_cast<double>(rm) / ro * static_cast<double>(ord);
    if (std::abs(static_cast<double>(mem) - target) > 1.0) {
      c.fail("ratio " + std::to_string(rm) + ":" + std::to_string(ro) + " off: " +
             std::to_string(mem) + " vs target " + std::to_string(target));
    }
  }
  if (c.ok) c.detail = "1:1 and 3:1 within one duplication unit on a 20% corpus, w_bal=n";
  return c;
}

Check c10_buffer_on_policy() {
  Check c;
  const int kBatches = 10000;
  RolloutBuffer buf(64);
  std::atomic<long long> version{0};
  std::atomic<int> produced{0};
  std::atomic<bool> stale_seen{false};
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
      if (b.policy_version != v) stale_seen = true;
      kept++;
    }
    if (++drains % 40 == 0) version.fetch_add(1);
    std::this_thread::yield();
  }
  for (auto& t : producers) t.join();
  while (buf.size() > 0) kept += buf.drain(version.load()).size();
  c.require(!stale_seen.load(), "a stale-version batch was drained");
  c.require(kept + buf.stale_discarded() >= kBatches, "batches lost");
  if (c.ok) {
    c.detail = std::to_string(kept) + " on-policy batches drained, " +
               std::to_string(buf.stale_discarded()) + " stale discarded, 0 stale delivered";
  }
  return c;
}

Check c11_metrics_decoupled(const std::vector<EnvironmentBundle>& suite) {
  Check c;
  double macc = score_memory_accuracy({1.0, 0.0, 0.5});
  c.require(std::abs(macc - 0.5) < 1e-12, "M-Acc fixture {1,0,0.5} != 0.5");
  c.require(score_memory_accuracy({1.0, 1.0}) == 1.0, "M-Acc all-ones fixture failed");

  std::vector<EnvironmentBundle> sub(suite.begin(), suite.begin() + 20);
  BenchmarkOptions opts;
  opts.k = 3;
  auto report = run_benchmark(sub, opts);
  for (int k = 1; k < 3; ++k) {
    c.require(report.pass_at.at(k) <= report.pass_at.at(k + 1), "pass@k not monotone");
  }
  c.require(report.t_acc == 1.0 && report.m_acc == 1.0, "oracle benchmark not perfect");

  opts.k = 1;
  opts.agent = BenchAgent::scripted_nomem;
  auto nomem = run_benchmark(sub, opts);
  c.require(nomem.t_acc == 1.0, "memory-suppressed oracle lost T-Acc");
  c.require(nomem.m_acc == 0.0, "memory-suppressed oracle leaked M-Acc");
  if (c.ok) c.detail = "pass@k monotone; suppressed oracle scores T-Acc=1.0, M-Acc=0";
  return c;
}

Check c12_performance_guard(const EnvironmentBundle& bundle) {
  Check c;
  const int kEpisodes = 2000;  // 50 steps each -> 100k steps
  long long steps_done = 0;
  auto start = std::chrono::steady_clock::now();
  for (int e = 0; e < kEpisodes; ++e) {
    EnvState s = reset(bundle, 1 << 30, false);
    for (int i = 0; i < 50; ++i) {
      step(s, i % 3 == 2 ? Action::Scroll() : Action::Click(960, 60));
      steps_done++;
    }
  }
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double rate = steps_done / secs;
  c.require(rate >= 10000.0, "only " + std::to_string(static_cast<long long>(rate)) +
                                 " steps/s");
  if (c.ok) {
    c.detail = std::to_string(static_cast<long long>(rate)) + " steps/s over " +
               std::to_string(steps_done) + " steps";
  }
  return c;
}

}  // namespace

int main() {
  std::vector<EnvironmentBundle> suite;
  struct Criterion {
    const char* name;
    std::function<Check()> run;
  };
  const Criterion criteria[] = {
      {"synthesis determinism", [&] { suite = gen_suite(1, 100); return c1_synthesis_determinism(); }},
      {"end-to-end soundness", [&] { return c2_end_to_end_soundness(suite); }},
      {"gold exclusivity", [&] { return c3_gold_exclusivity(suite); }},
      {"static-verifier mutation suite", [&] { return c4_mutation_suite(suite); }},
      {"protocol round-trip", [] { return c5_protocol_round_trip(); }},
      {"history protocol", [] { return c6_history_protocol(); }},
      {"rewards", [] { return c7_rewards(); }},
      {"step-GRPO oracle", [] { return c8_step_grpo(); }},
      {"SFT balance", [] { return c9_sft_balance(); }},
      {"buffer on-policy guarantee", [] { return c10_buffer_on_policy(); }},
      {"metrics decoupling", [&] { return c11_metrics_decoupled(suite); }},
      {"performance guard", [&] { return c12_performance_guard(suite.front()); }},
  };

  int failures = 0;
  int idx = 0;
  for (const auto& cr : criteria) {
    idx++;
    Check result;
    try {
      result = cr.run();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %2d (%s)%s%s\n", result.ok ? "PASS" : "FAIL", idx, cr.name,
                result.detail.empty() ? "" : ": ", result.detail.c_str());
    std::fflush(stdout);
    if (!result.ok) failures++;
  }
  return failures;
}
