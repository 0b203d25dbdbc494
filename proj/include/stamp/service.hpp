#pragma once

#include <string>

#include "stamp/harness.hpp"

namespace stamp {

// Environment variables naming the chat endpoints of the external services.
inline constexpr const char* kGeneratorUrlEnv = "STAMP_GENERATOR_URL";
inline constexpr const char* kGeneratorKeyEnv = "STAMP_GENERATOR_KEY";
inline constexpr const char* kPlannerUrlEnv = "STAMP_PLANNER_URL";
inline constexpr const char* kWorkerUrlEnv = "STAMP_WORKER_URL";
inline constexpr const char* kCriticUrlEnv = "STAMP_CRITIC_URL";
inline constexpr const char* kJudgeUrlEnv = "STAMP_JUDGE_URL";
inline constexpr const char* kAgentUrlEnv = "STAMP_AGENT_URL";

// JSON-over-HTTP chat client: POSTs {"messages": [{"role": "user", ...}]} to
// the URL and extracts the completion text from common response shapes.
// Throws TransportError on connection errors or non-2xx status.
CompletionFn http_chat_client(const std::string& url, const std::string& api_key = "");

// Reads the URL (and optional key) from the environment; throws
// TransportError when the URL variable is unset.
CompletionFn client_from_env(const char* url_env, const char* key_env = nullptr);

}  // namespace stamp
