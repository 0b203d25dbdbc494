#include "stamp/seed_model.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

namespace stamp {

std::string slug(const std::string& text) {
  std::string out;
  bool pending_dash = false;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (pending_dash && !out.empty()) out.push_back('-');
      pending_dash = false;
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      pending_dash = true;
    }
  }
  return out;
}

namespace {

bool is_color_code(const std::string& s) {
  if (s.size() != 7 || s[0] != '#') return false;
  return std::all_of(s.begin() + 1, s.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

ValidationReport validate_platform_seed(const PlatformSeed& seed) {
  ValidationReport r;
  if (seed.app_name.empty()) r.add("app_name_nonempty", "app_name must be non-empty", "app_name");
  if (seed.tabs.empty()) r.add("tabs_nonempty", "tabs must be non-empty", "tabs");
  std::set<std::string> seen;
  for (const auto& t : seed.tabs) {
    if (!seen.insert(t).second) {
      r.add("tabs_distinct", "duplicate tab '" + t + "'", "tabs");
      break;
    }
  }
  if (seed.distractions.empty()) {
    r.add("distractions_nonempty", "at least one distraction module required", "distractions");
  }
  if (seed.colors.size() != 3) {
    r.add("colors_count", "exactly three color codes required", "colors");
  }
  for (const auto& c : seed.colors) {
    if (!is_color_code(c)) {
      r.add("color_syntax", "color '" + c + "' is not #RRGGBB", "colors");
      break;
    }
  }
  return r;
}

ValidationReport validate_task_seed(const TaskSeed& seed) {
  ValidationReport r;
  if (seed.id.empty()) r.add("id_nonempty", "task seed id must be non-empty", "id");
  if (seed.ui_pattern.empty()) {
    r.add("ui_pattern_nonempty", "ui_pattern must be non-empty", "ui_pattern");
  } else {
    std::string last = slug(seed.ui_pattern.back());
    if (last.find("submit") == std::string::npos && last.find("submission") == std::string::npos) {
      r.add("ui_pattern_submission_last", "last ui_pattern role must be a submission role",
            "ui_pattern");
    }
  }
  if (seed.required_steps < 1 ||
      seed.required_steps < static_cast<int>(seed.ui_pattern.size()) - 1) {
    r.add("required_steps_min", "required_steps must be positive and >= |ui_pattern| - 1",
          "required_steps");
  }
  return r;
}

ValidationReport validate_scenario(const Scenario& scenario) {
  ValidationReport r;
  if (scenario.task.gold != scenario.truth.gold) {
    r.add("gold_consistency", "task.gold must equal truth.gold exactly", "task.gold");
  }
  for (const auto& page : scenario.ui_requirements.pages) {
    for (const auto& key : page.must_show_facts) {
      if (scenario.truth.facts.find(key) == scenario.truth.facts.end()) {
        r.add("fact_keys_exist", "fact '" + key + "' on page '" + page.id + "' not in truth.facts",
              "ui_requirements.pages");
      }
    }
  }
  if (scenario.ui_requirements.distraction_interactions.size() < 5) {
    r.add("distractions_min5", "at least 5 distraction interactions required",
          "ui_requirements.distraction_interactions");
  }
  return r;
}

ValidationReport validate_task_spec(const TaskSpec& spec, const Scenario& scenario) {
  ValidationReport r;
  const auto& task = spec.task;

  if (task.final_action.gold != scenario.truth.gold) {
    r.add("HC1", "final_action.gold must be exactly identical to scenario.truth.gold",
          "task.final_action.gold");
  }
  if (task.grading.gold != task.final_action.gold) {
    r.add("HC2", "grading.gold must be exactly identical to final_action.gold",
          "task.grading.gold");
  }
  try {
    std::regex re(task.grading.pass_regex);
    if (!std::regex_search(task.grading.gold, re)) {
      r.add("HC3", "grading.pass_regex does not match the gold string", "task.grading.pass_regex");
    }
  } catch (const std::regex_error&) {
    r.add("HC3", "grading.pass_regex is not a valid regex", "task.grading.pass_regex");
  }

  std::vector<std::string> needed = {"go-submit-answer", "answer-input", "answer-submit", "result"};
  for (const auto& tab : spec.platform.tabs) needed.push_back("tab-" + slug(tab));
  for (const auto& t : needed) {
    if (!contains(spec.ui_contract.required_testids, t)) {
      r.add("HC4", "required_testids must include '" + t + "'", "ui_contract.required_testids");
    }
  }

  for (const auto& item : task.memory_items) {
    auto it = scenario.truth.facts.find(item.fact_key);
    if (it == scenario.truth.facts.end()) continue;  // covered by fact_keys_exist on the scenario
    if (task.natural_language.find(it->second) != std::string::npos) {
      r.add("HC5", "natural_language leaks the value of fact '" + item.fact_key + "'",
            "task.natural_language");
    }
    if (task.guideline.find(it->second) == std::string::npos) {
      r.add("HC7", "guideline must state the exact content of fact '" + item.fact_key + "'",
            "task.guideline");
    }
  }
  if (task.guideline.empty()) {
    r.add("HC6", "guideline must describe the full workflow", "task.guideline");
  }

  if (task.memory_items.empty()) {
    r.add("memory_items_nonempty", "at least one memory item required", "task.memory_items");
  }
  if (task.must_visit_pages.size() < 2) {
    r.add("must_visit_min2", "at least two must-visit pages required", "task.must_visit_pages");
  }
  for (const auto& item : task.memory_items) {
    if (!contains(task.must_visit_pages, item.page_id)) {
      r.add("memory_item_page_must_visit",
            "memory item page '" + item.page_id + "' not in must_visit_pages",
            "task.memory_items");
    }
  }
  if (task.grading.method != "exact") {
    r.add("grading_method_exact", "grading.method must be 'exact'", "task.grading.method");
  }
  if (spec.anti_triviality.extra_interactives.size() < 5) {
    r.add("extra_interactives_min5", "at least 5 extra interactives required",
          "anti_triviality.extra_interactives");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Enum names
// ---------------------------------------------------------------------------

std::string to_string(MemoryLoad v) {
  switch (v) {
    case MemoryLoad::low: return "low";
    case MemoryLoad::medium: return "medium";
    case MemoryLoad::high: return "high";
  }
  return "low";
}

std::string to_string(AnswerType v) {
  switch (v) {
    case AnswerType::single_label: return "single_label";
    case AnswerType::code: return "code";
    case AnswerType::composite: return "composite";
  }
  return "single_label";
}

MemoryLoad memory_load_from_string(const std::string& s) {
  if (s == "low") return MemoryLoad::low;
  if (s == "medium") return MemoryLoad::medium;
  if (s == "high") return MemoryLoad::high;
  throw std::invalid_argument("unknown memory_load '" + s + "'");
}

AnswerType answer_type_from_string(const std::string& s) {
  if (s == "single_label") return AnswerType::single_label;
  if (s == "code") return AnswerType::code;
  if (s == "composite") return AnswerType::composite;
  throw std::invalid_argument("unknown answer_type '" + s + "'");
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

json to_json(const PlatformSeed& v) {
  return json{{"stamp_schema", kStampSchemaVersion},
              {"app_type", v.app_type},
              {"app_name", v.app_name},
              {"slogan", v.slogan},
              {"tabs", v.tabs},
              {"colors", v.colors},
              {"card_style", v.card_style},
              {"icon_style", v.icon_style},
              {"text_tone", v.text_tone},
              {"common_entities", v.common_entities},
              {"detail_entry_points", v.detail_entry_points},
              {"distractions", v.distractions}};
}

PlatformSeed platform_seed_from_json(const json& j) {
  PlatformSeed v;
  v.app_type = j.at("app_type").get<std::string>();
  v.app_name = j.at("app_name").get<std::string>();
  v.slogan = j.value("slogan", "");
  v.tabs = j.at("tabs").get<std::vector<std::string>>();
  v.colors = j.value("colors", std::vector<std::string>{});
  v.card_style = j.value("card_style", "");
  v.icon_style = j.value("icon_style", "");
  v.text_tone = j.value("text_tone", "");
  v.common_entities = j.value("common_entities", std::vector<std::string>{});
  v.detail_entry_points = j.value("detail_entry_points", std::vector<std::string>{});
  v.distractions = j.value("distractions", std::vector<std::string>{});
  return v;
}

json to_json(const TaskSeed& v) {
  return json{{"stamp_schema", kStampSchemaVersion},
              {"id", v.id},
              {"description", v.description},
              {"goal", v.goal},
              {"required_steps", v.required_steps},
              {"memory_load", to_string(v.memory_load)},
              {"output_format", v.output_format},
              {"answer_type", to_string(v.answer_type)},
              {"ui_pattern", v.ui_pattern}};
}

TaskSeed task_seed_from_json(const json& j) {
  TaskSeed v;
  v.id = j.at("id").get<std::string>();
  v.description = j.value("description", "");
  v.goal = j.value("goal", "");
  v.required_steps = j.at("required_steps").get<int>();
  v.memory_load = memory_load_from_string(j.value("memory_load", "low"));
  v.output_format = j.value("output_format", "");
  v.answer_type = answer_type_from_string(j.value("answer_type", "single_label"));
  v.ui_pattern = j.at("ui_pattern").get<std::vector<std::string>>();
  return v;
}

json to_json(const Scenario& v) {
  json entities = json::array();
  for (const auto& e : v.entities) {
    entities.push_back(json{{"name", e.name}, {"attributes", e.attributes}});
  }
  json pages = json::array();
  for (const auto& p : v.ui_requirements.pages) {
    pages.push_back(json{{"id", p.id},
                         {"title", p.title},
                         {"purpose", p.purpose},
                         {"must_show_facts", p.must_show_facts}});
  }
  return json{
      {"stamp_schema", kStampSchemaVersion},
      {"meta",
       {{"seed", v.meta.seed},
        {"platform_type", v.meta.platform_type},
        {"app_name", v.meta.app_name},
        {"theme_keywords", v.meta.theme_keywords}}},
      {"entities", entities},
      {"truth", {{"gold", v.truth.gold}, {"explain", v.truth.explain}, {"facts", v.truth.facts}}},
      {"task",
       {{"question", v.task.question},
        {"must_visit", v.task.must_visit},
        {"final_output_format", v.task.final_output_format},
        {"gold", v.task.gold}}},
      {"ui_requirements",
       {{"tabs", v.ui_requirements.tabs},
        {"key_testids", v.ui_requirements.key_testids},
        {"distraction_interactions", v.ui_requirements.distraction_interactions},
        {"pages", pages}}}};
}

Scenario scenario_from_json(const json& j) {
  Scenario v;
  const auto& meta = j.at("meta");
  v.meta.seed = meta.at("seed").get<long long>();
  v.meta.platform_type = meta.value("platform_type", "");
  v.meta.app_name = meta.value("app_name", "");
  v.meta.theme_keywords = meta.value("theme_keywords", std::vector<std::string>{});
  for (const auto& e : j.value("entities", json::array())) {
    ScenarioEntity ent;
    ent.name = e.at("name").get<std::string>();
    ent.attributes = e.value("attributes", std::map<std::string, std::string>{});
    v.entities.push_back(std::move(ent));
  }
  const auto& truth = j.at("truth");
  v.truth.gold = truth.at("gold").get<std::string>();
  v.truth.explain = truth.value("explain", "");
  v.truth.facts = truth.value("facts", std::map<std::string, std::string>{});
  const auto& task = j.at("task");
  v.task.question = task.at("question").get<std::string>();
  v.task.must_visit = task.value("must_visit", std::vector<std::string>{});
  v.task.final_output_format = task.value("final_output_format", "");
  v.task.gold = task.at("gold").get<std::string>();
  const auto& ui = j.at("ui_requirements");
  v.ui_requirements.tabs = ui.value("tabs", std::vector<std::string>{});
  v.ui_requirements.key_testids = ui.value("key_testids", std::vector<std::string>{});
  v.ui_requirements.distraction_interactions =
      ui.value("distraction_interactions", std::vector<std::string>{});
  for (const auto& p : ui.value("pages", json::array())) {
    ScenarioPage page;
    page.id = p.at("id").get<std::string>();
    page.title = p.value("title", "");
    page.purpose = p.value("purpose", "");
    page.must_show_facts = p.value("must_show_facts", std::vector<std::string>{});
    v.ui_requirements.pages.push_back(std::move(page));
  }
  return v;
}

json to_json(const TaskSpec& v) {
  json items = json::array();
  for (const auto& m : v.task.memory_items) {
    items.push_back(
        json{{"page_id", m.page_id}, {"fact_key", m.fact_key}, {"how_to_find", m.how_to_find}});
  }
  return json{
      {"stamp_schema", kStampSchemaVersion},
      {"platform",
       {{"app_name", v.platform.app_name},
        {"style_keywords", v.platform.style_keywords},
        {"tabs", v.platform.tabs}}},
      {"task",
       {{"natural_language", v.task.natural_language},
        {"guideline", v.task.guideline},
        {"must_visit_pages", v.task.must_visit_pages},
        {"memory_items", items},
        {"final_action",
         {{"page_id", v.task.final_action.page_id},
          {"type", v.task.final_action.type},
          {"input_testid", v.task.final_action.input_testid},
          {"submit_testid", v.task.final_action.submit_testid},
          {"required_output_format", v.task.final_action.required_output_format},
          {"gold", v.task.final_action.gold}}},
        {"grading",
         {{"method", v.task.grading.method},
          {"gold", v.task.grading.gold},
          {"pass_regex", v.task.grading.pass_regex}}}}},
      {"ui_contract",
       {{"required_testids", v.ui_contract.required_testids},
        {"navigation_contract", v.ui_contract.navigation_contract}}},
      {"anti_triviality",
       {{"extra_interactives", v.anti_triviality.extra_interactives},
        {"notes", v.anti_triviality.notes}}}};
}

TaskSpec task_spec_from_json(const json& j) {
  TaskSpec v;
  const auto& plat = j.at("platform");
  v.platform.app_name = plat.at("app_name").get<std::string>();
  v.platform.style_keywords = plat.value("style_keywords", std::vector<std::string>{});
  v.platform.tabs = plat.value("tabs", std::vector<std::string>{});
  const auto& task = j.at("task");
  v.task.natural_language = task.at("natural_language").get<std::string>();
  v.task.guideline = task.value("guideline", "");
  v.task.must_visit_pages = task.value("must_visit_pages", std::vector<std::string>{});
  for (const auto& m : task.value("memory_items", json::array())) {
    MemoryItem item;
    item.page_id = m.at("page_id").get<std::string>();
    item.fact_key = m.at("fact_key").get<std::string>();
    item.how_to_find = m.value("how_to_find", "");
    v.task.memory_items.push_back(std::move(item));
  }
  const auto& fa = task.at("final_action");
  v.task.final_action.page_id = fa.at("page_id").get<std::string>();
  v.task.final_action.type = fa.value("type", "input_and_submit");
  v.task.final_action.input_testid = fa.value("input_testid", "answer-input");
  v.task.final_action.submit_testid = fa.value("submit_testid", "answer-submit");
  v.task.final_action.required_output_format = fa.value("required_output_format", "");
  v.task.final_action.gold = fa.at("gold").get<std::string>();
  const auto& gr = task.at("grading");
  v.task.grading.method = gr.value("method", "exact");
  v.task.grading.gold = gr.at("gold").get<std::string>();
  v.task.grading.pass_regex = gr.value("pass_regex", "");
  const auto& ui = j.at("ui_contract");
  v.ui_contract.required_testids = ui.value("required_testids", std::vector<std::string>{});
  v.ui_contract.navigation_contract = ui.value("navigation_contract", std::vector<std::string>{});
  const auto& at = j.value("anti_triviality", json::object());
  v.anti_triviality.extra_interactives =
      at.value("extra_interactives", std::vector<std::string>{});
  v.anti_triviality.notes = at.value("notes", "");
  return v;
}

json to_json(const ValidationReport& v) {
  json violations = json::array();
  for (const auto& viol : v.violations) {
    violations.push_back(
        json{{"rule_id", viol.rule_id}, {"message", viol.message}, {"path", viol.path}});
  }
  return json{{"ok", v.ok}, {"violations", violations}};
}

}  // namespace stamp
