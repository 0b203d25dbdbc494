#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stamp/seed_model.hpp"

namespace stamp {

// ---------------------------------------------------------------------------
// Page graph
// ---------------------------------------------------------------------------

enum class ElementKind {
  tab,
  button,
  list_item,
  fact_display,
  input,
  submit,
  result,
  back,
  distractor
};

std::string to_string(ElementKind k);
ElementKind element_kind_from_string(const std::string& s);

struct Element {
  std::string testid;
  ElementKind kind = ElementKind::button;
  std::string label;
  std::optional<std::string> value;        // fact value for fact_display
  std::optional<std::string> target_page;  // navigation target
  std::optional<std::string> fact_key;
};

struct Page {
  std::string id;
  std::string title;
  std::string role;  // home | detail | tab_page | submit
  std::vector<Element> elements;
};

struct PageGraph {
  std::vector<Page> pages;
  // The tab bar and the submission entry are bundle-wide singletons rendered
  // on every information page; storing them once keeps testids unique.
  std::vector<Element> tab_elements;
  Element go_submit_element;
  std::string home_page_id;
  std::string submission_page_id;

  const Page* find_page(const std::string& id) const;
  Page* find_page(const std::string& id);
};

// ---------------------------------------------------------------------------
// Bundle
// ---------------------------------------------------------------------------

struct EnvironmentBundle {
  Scenario scenario;
  TaskSpec task_spec;
  PageGraph page_graph;
  std::string gold;
  std::map<std::string, std::string> facts;
  struct Provenance {
    long long master_seed = 0;
    std::string generator = "procedural";  // procedural | external
    int repair_rounds = 0;
    std::string task_seed_id;  // pattern identity, needed by the verifier
  } provenance;
};

json to_json(const EnvironmentBundle& v);
EnvironmentBundle bundle_from_json(const json& j);
std::string bundle_digest(const EnvironmentBundle& v);

// ---------------------------------------------------------------------------
// Static inspection
// ---------------------------------------------------------------------------

struct InspectionReport {
  bool ok = false;
  std::string predicted_answer;
  struct Uniqueness {
    bool is_unique = true;
    std::vector<std::string> ambiguity_reasons;
  } uniqueness;
  struct Evidence {
    std::vector<std::pair<std::string, std::string>> key_observations;  // (page, what)
    std::vector<std::string> key_notes;  // minimal memory units
  } evidence;
  bool fix_needed = false;
  std::vector<std::string> structural_violations;
};

json to_json(const InspectionReport& v);

// ---------------------------------------------------------------------------
// Seed catalog and generation
// ---------------------------------------------------------------------------

struct SeedCatalog {
  std::vector<PlatformSeed> platforms;
  std::vector<TaskSeed> tasks;
};

// Built-in catalog: four platform styles x four task patterns
// (date comparison, price comparison, code lookup, composite join).
const SeedCatalog& default_catalog();

struct GenerationOptions {
  // "high" keeps the full distraction load; "low" halves it.
  std::string noise_level = "high";
};

std::pair<PlatformSeed, TaskSeed> sample_seeds(long long master_seed, const SeedCatalog& catalog);

EnvironmentBundle generate_environment(const PlatformSeed& platform, const TaskSeed& task,
                                       long long rng_seed, const GenerationOptions& opts = {});

// Walks the page graph without executing it and recomputes the answer a
// rule-following user would derive, scanning all comparable candidates
// including distractors.
InspectionReport statically_verify(const EnvironmentBundle& bundle);

struct RepairError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal-fix loop: adjust distractor values first, then move distractors out
// of comparison scope, never rewrite truth facts. At most 3 rounds.
EnvironmentBundle repair(EnvironmentBundle bundle, InspectionReport report);

// ---------------------------------------------------------------------------
// External generation
// ---------------------------------------------------------------------------

// Chat-style completion function: prompt in, raw text out.
using CompletionFn = std::function<std::string(const std::string& prompt)>;

struct ExternalGenerateOptions {
  bool fallback_to_procedural = false;
  long long fallback_rng_seed = 0;
  std::string audit_dir;  // when non-empty, request/response logged verbatim
};

struct ExternalGenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

EnvironmentBundle external_generate(const PlatformSeed& platform, const TaskSeed& task,
                                    const CompletionFn& client,
                                    const ExternalGenerateOptions& opts = {});

// The fixed generation prompt with seed fields substituted (exposed for the
// audit log and for tests).
std::string external_generation_prompt(const PlatformSeed& platform, const TaskSeed& task);

}  // namespace stamp
