#include <doctest.h>

#include <thread>

#include "stamp/evaluation.hpp"
#include "stamp/service.hpp"

#include <httplib.h>

using namespace stamp;

namespace {

JudgeFn offline = [](const std::vector<std::string>& r, const std::vector<std::string>& p) {
  return offline_judge(r, p);
};

EnvironmentBundle make_bundle(long long seed) {
  auto [p, t] = sample_seeds(seed, default_catalog());
  return generate_environment(p, t, seed);
}

std::vector<EnvironmentBundle> suite(int n, long long seed0 = 60) {
  std::vector<EnvironmentBundle> out;
  for (int i = 0; i < n; ++i) out.push_back(make_bundle(seed0 + i));
  return out;
}

EvalRun run_of(const std::string& task, int attempt, bool success) {
  EvalRun r;
  r.task_id = task;
  r.attempt_index = attempt;
  r.outcome = GradeResult{success, "", ""};
  return r;
}

}  // namespace

TEST_CASE("memory accuracy fixtures") {
  CHECK(score_memory_accuracy({1.0, 0.0, 0.5}) == doctest::Approx(0.5));
  CHECK(score_memory_accuracy({1.0, 1.0, 1.0}) == 1.0);
  CHECK(score_memory_accuracy({0.0}) == 0.0);
  CHECK_THROWS_AS(score_memory_accuracy({}), std::invalid_argument);
  CHECK_THROWS_AS(score_memory_accuracy({0.7}), std::invalid_argument);
}

TEST_CASE("pass@k fixtures and monotonicity") {
  std::map<std::string, std::vector<EvalRun>> runs;
  // task A: fails then succeeds; task B: always fails; task C: first-try success
  runs["A"] = {run_of("A", 1, false), run_of("A", 2, true), run_of("A", 3, false)};
  runs["B"] = {run_of("B", 1, false), run_of("B", 2, false), run_of("B", 3, false)};
  runs["C"] = {run_of("C", 1, true), run_of("C", 2, false), run_of("C", 3, true)};
  CHECK(score_pass_at_k(runs, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(score_pass_at_k(runs, 2) == doctest::Approx(2.0 / 3.0));
  CHECK(score_pass_at_k(runs, 3) == doctest::Approx(2.0 / 3.0));
  for (int k = 1; k < 3; ++k) {
    CHECK(score_pass_at_k(runs, k) <= score_pass_at_k(runs, k + 1));
  }
  CHECK_THROWS_AS(score_pass_at_k(runs, 4), std::invalid_argument);
  CHECK_THROWS_AS(score_pass_at_k({}, 1), std::invalid_argument);
}

TEST_CASE("hrp credit searches the whole transcript") {
  std::vector<std::string> refs = {"release=2024-03-01", "price=$9.50"};
  SUBCASE("values buried in thoughts still count") {
    std::vector<std::string> transcript = {
        "<think>the first album came out 2024-03-01, noting that</think>",
        "Action: Click the next item"};
    auto grades = hrp_memory_credit(transcript, refs, offline);
    REQUIRE(grades.size() == 2);
    CHECK(grades[0] == 1.0);
    CHECK(grades[1] == 0.0);
  }
  SUBCASE("absent values earn zero") {
    auto grades = hrp_memory_credit({"nothing relevant"}, refs, offline);
    CHECK(score_memory_accuracy(grades) == 0.0);
  }
}

TEST_CASE("scripted benchmark is a perfect oracle") {
  BenchmarkOptions opts;
  opts.k = 2;
  auto report = run_benchmark(suite(4), opts);
  CHECK(report.t_acc == 1.0);
  CHECK(report.m_acc == 1.0);
  CHECK(report.pass_at.at(1) == 1.0);
  CHECK(report.pass_at.at(2) == 1.0);
  CHECK(report.meta.agent == "scripted");
  CHECK(report.meta.suite_size == 4);
  json j = to_json(report);
  CHECK(j.at("aggregate").at("t_acc") == 1.0);
}

TEST_CASE("memory-suppressed agent solves tasks but recalls nothing") {
  BenchmarkOptions opts;
  opts.agent = BenchAgent::scripted_nomem;
  auto report = run_benchmark(suite(3), opts);
  CHECK(report.t_acc == 1.0);
  CHECK(report.m_acc == 0.0);
}

TEST_CASE("noop agent scores zero everywhere") {
  BenchmarkOptions opts;
  opts.agent = BenchAgent::noop;
  opts.k = 2;
  auto report = run_benchmark(suite(3), opts);
  CHECK(report.t_acc == 0.0);
  CHECK(report.m_acc == 0.0);
  CHECK(report.pass_at.at(2) == 0.0);
}

TEST_CASE("guided and natural variants pick different goals") {
  EnvironmentBundle b = make_bundle(71);
  std::string seen_guided, seen_natural;
  auto terminator = [](std::string& sink) {
    return CompletionFn([&sink](const std::string& p) {
      sink = p;
      StepOutput s{"t", "Terminate", "", ToolAction{}};
      s.tool_call.action = MobileAction::terminate;
      s.tool_call.status = "failure";
      return render_step_output(s);
    });
  };
  run_agent_episode(b, terminator(seen_guided), 5, BenchVariant::guided);
  run_agent_episode(b, terminator(seen_natural), 5, BenchVariant::natural);
  CHECK(seen_guided.find(b.task_spec.task.guideline) != std::string::npos);
  CHECK(seen_natural.find(b.task_spec.task.natural_language) != std::string::npos);
  CHECK(seen_guided != seen_natural);
}

TEST_CASE("protocol agent can solve a task through the wire format") {
  EnvironmentBundle b = make_bundle(73);
  int calls = 0;
  CompletionFn agent = [&](const std::string& prompt) {
    calls++;
    CHECK(prompt.find("Current screen:") != std::string::npos);
    StepOutput s;
    s.think = "step " + std::to_string(calls);
    if (calls == 1) {
      // pinned go-submit entry: center of {700,140,960,220}
      s.action_desc = "Open the submission page";
      s.tool_call.action = MobileAction::click;
      s.tool_call.coordinate = {830, 180};
    } else {
      s.action_desc = "Submit the answer";
      s.memory = "gold=" + b.gold;
      s.tool_call.action = MobileAction::answer;
      s.tool_call.text = b.gold;
    }
    return render_step_output(s);
  };
  Trajectory t = run_agent_episode(b, agent, 10, BenchVariant::guided);
  REQUIRE(t.outcome.has_value());
  CHECK(t.outcome->success);
  CHECK(t.steps.size() == 2);
  CHECK(calls == 2);
  CHECK(t.steps[1].memory == "gold=" + b.gold);
}

TEST_CASE("unparseable agent output burns steps as noops") {
  EnvironmentBundle b = make_bundle(79);
  CompletionFn agent = [](const std::string&) { return "I refuse to follow the grammar"; };
  Trajectory t = run_agent_episode(b, agent, 3, BenchVariant::natural);
  REQUIRE(t.outcome.has_value());
  CHECK_FALSE(t.outcome->success);
  CHECK(t.steps.size() == 3);
  for (const auto& s : t.steps) CHECK(s.action_desc == "(unparseable output)");
}

TEST_CASE("service agent errors count as failed attempts") {
  BenchmarkOptions opts;
  opts.agent = BenchAgent::service;
  opts.agent_client = [](const std::string&) -> std::string {
    throw TransportError("agent offline");
  };
  auto report = run_benchmark(suite(2), opts);
  CHECK(report.t_acc == 0.0);
  CHECK(report.pass_at.at(1) == 0.0);
}

TEST_CASE("http chat client round trips against a local server") {
  httplib::Server server;
  std::string last_body;
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    last_body = req.body;
    res.set_content(
        R"({"choices": [{"message": {"role": "assistant", "content": "Complete Match"}}]})",
        "application/json");
  });
  server.Post("/plain", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("just text", "text/plain");
  });
  server.Post("/fail", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  std::string base = "http://127.0.0.1:" + std::to_string(port);
  CompletionFn chat = http_chat_client(base + "/v1/chat", "sekrit");
  CHECK(chat("grade this") == "Complete Match");
  json body = json::parse(last_body);
  CHECK(body.at("messages").at(0).at("role") == "user");
  CHECK(body.at("messages").at(0).at("content") == "grade this");

  CompletionFn plain = http_chat_client(base + "/plain");
  CHECK(plain("x") == "just text");

  CompletionFn failing = http_chat_client(base + "/fail");
  CHECK_THROWS_AS(failing("x"), TransportError);

  CompletionFn dead = http_chat_client("http://127.0.0.1:1/nope");
  CHECK_THROWS_AS(dead("x"), TransportError);

  server.stop();
  th.join();
}

TEST_CASE("client_from_env requires the URL variable") {
  unsetenv("STAMP_TEST_FAKE_URL");
  CHECK_THROWS_AS(client_from_env("STAMP_TEST_FAKE_URL"), TransportError);
  setenv("STAMP_TEST_FAKE_URL", "http://127.0.0.1:1/x", 1);
  CHECK_NOTHROW(client_from_env("STAMP_TEST_FAKE_URL"));
  unsetenv("STAMP_TEST_FAKE_URL");
}
