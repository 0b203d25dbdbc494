#pragma once

#include <map>
#include <string>
#include <vector>

#include "stamp/json_util.hpp"

namespace stamp {

constexpr int kStampSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Seed documents
// ---------------------------------------------------------------------------

struct PlatformSeed {
  std::string app_type;
  std::string app_name;
  std::string slogan;
  std::vector<std::string> tabs;
  std::vector<std::string> colors;  // three #RRGGBB codes
  std::string card_style;
  std::string icon_style;
  std::string text_tone;
  std::vector<std::string> common_entities;
  std::vector<std::string> detail_entry_points;
  std::vector<std::string> distractions;
};

enum class MemoryLoad { low, medium, high };
enum class AnswerType { single_label, code, composite };

struct TaskSeed {
  std::string id;
  std::string description;
  std::string goal;
  int required_steps = 0;
  MemoryLoad memory_load = MemoryLoad::low;
  std::string output_format;
  AnswerType answer_type = AnswerType::single_label;
  std::vector<std::string> ui_pattern;  // last role must be a submission role
};

// ---------------------------------------------------------------------------
// Scenario / task spec documents
// ---------------------------------------------------------------------------

struct ScenarioEntity {
  std::string name;
  std::map<std::string, std::string> attributes;
};

struct ScenarioPage {
  std::string id;
  std::string title;
  std::string purpose;
  std::vector<std::string> must_show_facts;
};

struct Scenario {
  struct Meta {
    long long seed = 0;
    std::string platform_type;
    std::string app_name;
    std::vector<std::string> theme_keywords;
  } meta;
  std::vector<ScenarioEntity> entities;
  struct Truth {
    std::string gold;
    std::string explain;
    std::map<std::string, std::string> facts;
  } truth;
  struct Task {
    std::string question;
    std::vector<std::string> must_visit;
    std::string final_output_format;
    std::string gold;
  } task;
  struct UiRequirements {
    std::vector<std::string> tabs;
    std::vector<std::string> key_testids;  // advisory only
    std::vector<std::string> distraction_interactions;
    std::vector<ScenarioPage> pages;
  } ui_requirements;
};

struct MemoryItem {
  std::string page_id;
  std::string fact_key;
  std::string how_to_find;
};

struct TaskSpec {
  struct Platform {
    std::string app_name;
    std::vector<std::string> style_keywords;
    std::vector<std::string> tabs;
  } platform;
  struct Task {
    std::string natural_language;
    std::string guideline;
    std::vector<std::string> must_visit_pages;
    std::vector<MemoryItem> memory_items;
    struct FinalAction {
      std::string page_id;
      std::string type;  // "input_and_submit"
      std::string input_testid;
      std::string submit_testid;
      std::string required_output_format;
      std::string gold;
    } final_action;
    struct Grading {
      std::string method;  // "exact"
      std::string gold;
      std::string pass_regex;
    } grading;
  } task;
  struct UiContract {
    std::vector<std::string> required_testids;
    std::vector<std::string> navigation_contract;
  } ui_contract;
  struct AntiTriviality {
    std::vector<std::string> extra_interactives;
    std::string notes;
  } anti_triviality;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string rule_id;
  std::string message;
  std::string path;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;

  void add(std::string rule_id, std::string message, std::string path = "") {
    ok = false;
    violations.push_back({std::move(rule_id), std::move(message), std::move(path)});
  }
  bool has(const std::string& rule_id) const {
    for (const auto& v : violations) {
      if (v.rule_id == rule_id) return true;
    }
    return false;
  }
};

ValidationReport validate_platform_seed(const PlatformSeed& seed);
ValidationReport validate_task_seed(const TaskSeed& seed);
// Enforces hard constraints HC1..HC7 of the task document contract plus the
// structural invariants (memory items non-empty, must-visit pages, etc.).
ValidationReport validate_task_spec(const TaskSpec& spec, const Scenario& scenario);
ValidationReport validate_scenario(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Serialization (canonical, key-sorted JSON; "stamp_schema": 1 on documents)
// ---------------------------------------------------------------------------

// Lowercase identifier form used for testids: "Feed" -> "feed",
// "Trending Picks" -> "trending-picks".
std::string slug(const std::string& text);

std::string to_string(MemoryLoad v);
std::string to_string(AnswerType v);
MemoryLoad memory_load_from_string(const std::string& s);
AnswerType answer_type_from_string(const std::string& s);

json to_json(const PlatformSeed& v);
json to_json(const TaskSeed& v);
json to_json(const Scenario& v);
json to_json(const TaskSpec& v);
json to_json(const ValidationReport& v);

PlatformSeed platform_seed_from_json(const json& j);
TaskSeed task_seed_from_json(const json& j);
Scenario scenario_from_json(const json& j);
TaskSpec task_spec_from_json(const json& j);

}  // namespace stamp
