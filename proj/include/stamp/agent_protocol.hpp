#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stamp/json_util.hpp"

namespace stamp {

// ---------------------------------------------------------------------------
// Step output grammar:  <think>..</think> \n Action: .. \n Memory: .. \n
//                       <tool_call>{json}</tool_call>
// ---------------------------------------------------------------------------

enum class MobileAction {
  key,
  click,
  long_press,
  swipe,
  type,
  system_button,
  open,
  wait,
  answer,
  interact,
  terminate
};

std::string to_string(MobileAction a);
MobileAction mobile_action_from_string(const std::string& s);

struct ToolAction {
  std::string name = "mobile_use";
  MobileAction action = MobileAction::click;
  std::optional<std::pair<int, int>> coordinate;
  std::optional<std::pair<int, int>> coordinate2;
  std::optional<std::string> text;
  std::optional<double> time;
  std::optional<std::string> button;  // Back | Home | Menu | Enter
  std::optional<std::string> status;  // success | failure

  bool operator==(const ToolAction&) const = default;
};

// Throws std::invalid_argument when required arguments for the declared
// action kind are absent or coordinates leave [0,1000].
void validate_tool_action(const ToolAction& a);

json to_json(const ToolAction& a);
ToolAction tool_action_from_json(const json& j);

struct StepOutput {
  std::string think;
  std::string action_desc;
  std::string memory;  // "" canonical; "none" on the wire
  ToolAction tool_call;

  bool operator==(const StepOutput&) const = default;
};

enum class ParseErrorKind {
  MissingThink,
  MissingAction,
  MissingMemory,
  MissingToolCall,
  MalformedToolCall,
  WrongOrder
};

std::string to_string(ParseErrorKind k);

struct StepParseError : std::runtime_error {
  ParseErrorKind kind;
  StepParseError(ParseErrorKind k, const std::string& what)
      : std::runtime_error(what), kind(k) {}
};

StepOutput parse_step_output(const std::string& text);
std::string render_step_output(const StepOutput& s);

// ---------------------------------------------------------------------------
// Two-tier history retention
// ---------------------------------------------------------------------------

struct StepIndexWindows {
  std::vector<int> recent;  // R_t = {t-5 .. t-1}, clipped positive
  std::vector<int> early;   // H_t = {1 .. t-6}
};

StepIndexWindows windows(int t);

struct HistoryEntry {
  std::string action_desc;
  std::string memory;     // "" means none
  std::string user_text;  // the user turn of that round, kept for recent turns
};

// Serializes the early window (steps 1..t-6) as
// "Step i: {action}\nMemory: {memory or none}" blocks, newline-joined.
// steps[i-1] holds step i; throws on index gaps (too few entries).
std::string compress_history(const std::vector<HistoryEntry>& steps, int t);

struct PromptBundle {
  std::string system_text;
  struct UserTurn {
    std::string text;
    bool has_image = false;
  };
  std::vector<UserTurn> user_turns;
  std::string compressed_history;
};

// The current turn is the fixed user template with {goal}/{history_string}
// substituted; recent turns ride along in full. Exactly min(5, t) trailing
// turns carry images (the current one plus up to 4 prior).
PromptBundle assemble_prompt(const std::string& goal, const std::vector<HistoryEntry>& steps,
                             int t);

// Verbatim {placeholder} substitution used for all fixed templates.
std::string substitute(std::string tmpl, const std::map<std::string, std::string>& values);

}  // namespace stamp
