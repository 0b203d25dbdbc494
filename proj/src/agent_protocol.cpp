#include "stamp/agent_protocol.hpp"

#include <algorithm>

#include "stamp/prompts.hpp"

namespace stamp {

std::string to_string(MobileAction a) {
  switch (a) {
    case MobileAction::key: return "key";
    case MobileAction::click: return "click";
    case MobileAction::long_press: return "long_press";
    case MobileAction::swipe: return "swipe";
    case MobileAction::type: return "type";
    case MobileAction::system_button: return "system_button";
    case MobileAction::open: return "open";
    case MobileAction::wait: return "wait";
    case MobileAction::answer: return "answer";
    case MobileAction::interact: return "interact";
    case MobileAction::terminate: return "terminate";
  }
  return "click";
}

MobileAction mobile_action_from_string(const std::string& s) {
  static const std::map<std::string, MobileAction> table = {
      {"key", MobileAction::key},
      {"click", MobileAction::click},
      {"long_press", MobileAction::long_press},
      {"swipe", MobileAction::swipe},
      {"type", MobileAction::type},
      {"system_button", MobileAction::system_button},
      {"open", MobileAction::open},
      {"wait", MobileAction::wait},
      {"answer", MobileAction::answer},
      {"interact", MobileAction::interact},
      {"terminate", MobileAction::terminate}};
  auto it = table.find(s);
  if (it == table.end()) throw std::invalid_argument("unknown mobile action '" + s + "'");
  return it->second;
}

namespace {

void require(bool cond, const std::string& why) {
  if (!cond) throw std::invalid_argument(why);
}

void check_coord(const std::optional<std::pair<int, int>>& c, const std::string& who) {
  require(c.has_value(), who + " requires a coordinate");
  require(c->first >= 0 && c->first <= 1000 && c->second >= 0 && c->second <= 1000,
          who + " coordinate outside [0,1000]");
}

}  // namespace

void validate_tool_action(const ToolAction& a) {
  require(a.name == "mobile_use", "tool name must be mobile_use");
  switch (a.action) {
    case MobileAction::click:
      check_coord(a.coordinate, "click");
      break;
    case MobileAction::long_press:
      check_coord(a.coordinate, "long_press");
      require(a.time.has_value(), "long_press requires time");
      break;
    case MobileAction::swipe:
      check_coord(a.coordinate, "swipe");
      check_coord(a.coordinate2, "swipe (end point)");
      break;
    case MobileAction::key:
    case MobileAction::type:
    case MobileAction::open:
    case MobileAction::answer:
    case MobileAction::interact:
      require(a.text.has_value(), to_string(a.action) + " requires text");
      break;
    case MobileAction::wait:
      require(a.time.has_value(), "wait requires time");
      break;
    case MobileAction::system_button:
      require(a.button.has_value(), "system_button requires button");
      require(*a.button == "Back" || *a.button == "Home" || *a.button == "Menu" ||
                  *a.button == "Enter",
              "unknown system button");
      break;
    case MobileAction::terminate:
      require(a.status.has_value(), "terminate requires status");
      require(*a.status == "success" || *a.status == "failure", "unknown terminate status");
      break;
  }
}

json to_json(const ToolAction& a) {
  json args{{"action", to_string(a.action)}};
  if (a.coordinate) args["coordinate"] = {a.coordinate->first, a.coordinate->second};
  if (a.coordinate2) args["coordinate2"] = {a.coordinate2->first, a.coordinate2->second};
  if (a.text) args["text"] = *a.text;
  if (a.time) args["time"] = *a.time;
  if (a.button) args["button"] = *a.button;
  if (a.status) args["status"] = *a.status;
  return json{{"name", a.name}, {"arguments", args}};
}

ToolAction tool_action_from_json(const json& j) {
  ToolAction a;
  a.name = j.at("name").get<std::string>();
  const json& args = j.at("arguments");
  a.action = mobile_action_from_string(args.at("action").get<std::string>());
  auto coord = [](const json& v) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
      throw std::invalid_argument("coordinate must be an [x, y] integer pair");
    }
    return std::pair<int, int>{v[0].get<int>(), v[1].get<int>()};
  };
  if (args.contains("coordinate")) a.coordinate = coord(args.at("coordinate"));
  if (args.contains("coordinate2")) a.coordinate2 = coord(args.at("coordinate2"));
  if (args.contains("text")) a.text = args.at("text").get<std::string>();
  if (args.contains("time")) a.time = args.at("time").get<double>();
  if (args.contains("button")) a.button = args.at("button").get<std::string>();
  if (args.contains("status")) a.status = args.at("status").get<std::string>();
  validate_tool_action(a);
  return a;
}

// ---------------------------------------------------------------------------
// Parser: strict part-order automaton over labeled sections.
// ---------------------------------------------------------------------------

std::string to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::MissingThink: return "MissingThink";
    case ParseErrorKind::MissingAction: return "MissingAction";
    case ParseErrorKind::MissingMemory: return "MissingMemory";
    case ParseErrorKind::MissingToolCall: return "MissingToolCall";
    case ParseErrorKind::MalformedToolCall: return "MalformedToolCall";
    case ParseErrorKind::WrongOrder: return "WrongOrder";
  }
  return "WrongOrder";
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Finds `label` at the start of a line (whitespace-tolerant indentation).
std::size_t find_label(const std::string& text, const std::string& label) {
  std::size_t from = 0;
  while (true) {
    auto pos = text.find(label, from);
    if (pos == std::string::npos) return std::string::npos;
    std::size_t line_start = pos;
    while (line_start > 0 && text[line_start - 1] != '\n') --line_start;
    if (trim(text.substr(line_start, pos - line_start)).empty()) return pos;
    from = pos + label.size();
  }
}

}  // namespace

StepOutput parse_step_output(const std::string& text) {
  auto p_think = text.find("<think>");
  auto p_think_end = text.find("</think>");
  auto p_action = find_label(text, "Action:");
  auto p_memory = find_label(text, "Memory:");
  auto p_tc = text.find("<tool_call>");
  auto p_tc_end = text.find("</tool_call>");

  if (p_think == std::string::npos || p_think_end == std::string::npos) {
    throw StepParseError(ParseErrorKind::MissingThink, "missing <think> block");
  }
  if (p_action == std::string::npos) {
    throw StepParseError(ParseErrorKind::MissingAction, "missing Action: line");
  }
  if (p_memory == std::string::npos) {
    throw StepParseError(ParseErrorKind::MissingMemory, "missing Memory: line");
  }
  if (p_tc == std::string::npos || p_tc_end == std::string::npos) {
    throw StepParseError(ParseErrorKind::MissingToolCall, "missing <tool_call> block");
  }
  if (!(p_think < p_think_end && p_think_end < p_action && p_action < p_memory &&
        p_memory < p_tc && p_tc < p_tc_end)) {
    throw StepParseError(ParseErrorKind::WrongOrder,
                         "parts present but out of think/Action/Memory/tool_call order");
  }

  StepOutput out;
  out.think = trim(text.substr(p_think + 7, p_think_end - (p_think + 7)));
  {
    auto line_end = text.find('\n', p_action);
    if (line_end == std::string::npos || line_end > p_memory) line_end = p_memory;
    out.action_desc = trim(text.substr(p_action + 7, line_end - (p_action + 7)));
  }
  {
    // Memory content may span lines, up to the tool_call block.
    std::string mem = trim(text.substr(p_memory + 7, p_tc - (p_memory + 7)));
    out.memory = mem == "none" ? "" : mem;
  }
  {
    std::string body = trim(text.substr(p_tc + 11, p_tc_end - (p_tc + 11)));
    try {
      out.tool_call = tool_action_from_json(json::parse(body));
    } catch (const std::exception& e) {
      throw StepParseError(ParseErrorKind::MalformedToolCall,
                           std::string("tool_call body invalid: ") + e.what());
    }
  }
  return out;
}

std::string render_step_output(const StepOutput& s) {
  validate_tool_action(s.tool_call);
  std::string out = "<think>" + s.think + "</think>\n";
  out += "Action: " + s.action_desc + "\n";
  out += "Memory: " + (s.memory.empty() ? std::string("none") : s.memory) + "\n";
  out += "<tool_call>\n" + to_json(s.tool_call).dump() + "\n</tool_call>";
  return out;
}

// ---------------------------------------------------------------------------
// History retention
// ---------------------------------------------------------------------------

StepIndexWindows windows(int t) {
  if (t < 1) throw std::invalid_argument("step index must be >= 1");
  StepIndexWindows w;
  for (int i = std::max(1, t - 5); i <= t - 1; ++i) w.recent.push_back(i);
  for (int i = 1; i <= t - 6; ++i) w.early.push_back(i);
  return w;
}

std::string compress_history(const std::vector<HistoryEntry>& steps, int t) {
  StepIndexWindows w = windows(t);
  if (!w.early.empty() && static_cast<int>(steps.size()) < w.early.back()) {
    throw std::invalid_argument("history has index gaps: step " +
                                std::to_string(w.early.back()) + " missing");
  }
  std::string out;
  for (int i : w.early) {
    const HistoryEntry& h = steps[i - 1];
    if (!out.empty()) out += "\n";
    out += "Step " + std::to_string(i) + ": " + h.action_desc + "\nMemory: " +
           (h.memory.empty() ? std::string("none") : h.memory);
  }
  return out;
}

std::string substitute(std::string tmpl, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = tmpl.find(needle, pos)) != std::string::npos) {
      tmpl.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return tmpl;
}

PromptBundle assemble_prompt(const std::string& goal, const std::vector<HistoryEntry>& steps,
                             int t) {
  StepIndexWindows w = windows(t);
  if (!w.recent.empty() && static_cast<int>(steps.size()) < w.recent.back()) {
    throw std::invalid_argument("history shorter than the recent window");
  }
  PromptBundle pb;
  pb.system_text = prompts::kSystemPrompt;
  pb.compressed_history = compress_history(steps, t);
  for (int i : w.recent) {
    pb.user_turns.push_back({steps[i - 1].user_text, false});
  }
  pb.user_turns.push_back(
      {substitute(prompts::kUserPromptTemplate,
                  {{"goal", goal}, {"history_string", pb.compressed_history}}),
       false});
  int budget = std::min(5, t);
  for (int i = 0; i < budget; ++i) {
    pb.user_turns[pb.user_turns.size() - 1 - i].has_image = true;
  }
  return pb;
}

}  // namespace stamp
