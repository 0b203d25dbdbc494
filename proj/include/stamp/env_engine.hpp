#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stamp/synthesis.hpp"

namespace stamp {

// Fixed geometry on the 0-1000 grid. Part of the golden fixtures: coordinate
// level tests pin these numbers.
constexpr int kChromeBand = 120;    // y < 120 reserved, clicks are inert
constexpr int kRowStart = 140;      // first content row top
constexpr int kRowHeight = 80;
constexpr int kRowGap = 10;         // row pitch = 90
constexpr int kViewBottom = 920;    // content window is [140, 920)
constexpr int kTabBandTop = 920;    // tab bar occupies [920, 1000]
constexpr int kScrollStride = 600;
constexpr int kRowLeft = 40;
constexpr int kRowRight = 680;
// go-submit-answer is pinned (does not scroll) so it stays visible from every
// information-bearing page; back sits at the top-left of the submission page.
constexpr int kGoSubmitBox[4] = {700, 140, 960, 220};
constexpr int kBackBox[4] = {0, 140, 120, 220};

struct Bbox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct VisibleElement {
  std::string testid;
  ElementKind kind = ElementKind::button;
  std::string label;
  std::optional<std::string> value;
  Bbox bbox;
};

struct Observation {
  std::string page_title;
  std::vector<VisibleElement> visible_elements;
  bool scroll_hint = false;  // content continues below the fold
  std::string chrome_note;   // fixed reserved-region marker
  std::optional<std::string> success_banner;
};

struct GradeResult {
  bool success = false;
  std::string submitted;
  std::string gold;
};

struct EnvState {
  const EnvironmentBundle* bundle = nullptr;
  std::string current_page_id;
  int scroll_offset = 0;
  std::map<std::string, std::string> input_buffer;  // input testid -> text
  std::set<std::string> toggled;                    // toggled distractors
  std::string result_text;                          // text of the result element
  int step_count = 0;
  int max_steps = 0;
  std::optional<GradeResult> terminal;
};

struct Action {
  enum class Kind { click, type, scroll, open, back, answer };
  Kind kind = Kind::click;
  int x = 0, y = 0;
  std::string text;    // type / answer payload
  std::string testid;  // open target

  static Action Click(int x, int y) { return {Kind::click, x, y, "", ""}; }
  static Action Type(int x, int y, std::string text) {
    return {Kind::type, x, y, std::move(text), ""};
  }
  static Action Scroll() { return {Kind::scroll, 0, 0, "", ""}; }
  static Action Open(std::string testid) { return {Kind::open, 0, 0, "", std::move(testid)}; }
  static Action Back() { return {Kind::back, 0, 0, "", ""}; }
  static Action Answer(std::string text) { return {Kind::answer, 0, 0, std::move(text), ""}; }
};

std::string to_string(Action::Kind k);
json to_json(const Action& a);

enum class StepEffect { navigated, toggled, typed, scrolled, graded, noop };
std::string to_string(StepEffect e);

json to_json(const Observation& o);

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HitResult {
  enum class Kind { element, chrome, none } kind = Kind::none;
  VisibleElement element;  // valid when kind == element
};

// verify=true re-runs static verification and rejects broken bundles.
EnvState reset(const EnvironmentBundle& bundle, int max_steps, bool verify = true);

Observation render_observation(const EnvState& state);

// Coordinates must be in [0,1000]; resolves against the current observation.
HitResult resolve_hit(const EnvState& state, int x, int y);

struct StepResult {
  StepEffect effect = StepEffect::noop;
  std::string diagnostic;  // populated for recorded noops
};

StepResult step(EnvState& state, const Action& action);

GradeResult grade(const EnvState& state, const std::string& submitted);

// Digest over the dynamic state only (page, scroll, buffers, toggles, step).
std::string state_digest(const EnvState& state);

// One JSONL record per executed step: {step, action, effect, page, digest}.
json transcript_record(const EnvState& state_after, const Action& action, StepEffect effect);

}  // namespace stamp
