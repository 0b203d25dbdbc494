#include "stamp/env_engine.hpp"

#include <algorithm>

namespace stamp {

std::string to_string(Action::Kind k) {
  switch (k) {
    case Action::Kind::click: return "click";
    case Action::Kind::type: return "type";
    case Action::Kind::scroll: return "scroll";
    case Action::Kind::open: return "open";
    case Action::Kind::back: return "back";
    case Action::Kind::answer: return "answer";
  }
  return "click";
}

json to_json(const Action& a) {
  json j{{"kind", to_string(a.kind)}};
  switch (a.kind) {
    case Action::Kind::click:
      j["x"] = a.x;
      j["y"] = a.y;
      break;
    case Action::Kind::type:
      j["x"] = a.x;
      j["y"] = a.y;
      j["text"] = a.text;
      break;
    case Action::Kind::open:
      j["testid"] = a.testid;
      break;
    case Action::Kind::answer:
      j["text"] = a.text;
      break;
    default:
      break;
  }
  return j;
}

std::string to_string(StepEffect e) {
  switch (e) {
    case StepEffect::navigated: return "navigated";
    case StepEffect::toggled: return "toggled";
    case StepEffect::typed: return "typed";
    case StepEffect::scrolled: return "scrolled";
    case StepEffect::graded: return "graded";
    case StepEffect::noop: return "noop";
  }
  return "noop";
}

json to_json(const Observation& o) {
  json elems = json::array();
  for (const auto& v : o.visible_elements) {
    json e{{"testid", v.testid},
           {"kind", to_string(v.kind)},
           {"label", v.label},
           {"bbox", {v.bbox.x0, v.bbox.y0, v.bbox.x1, v.bbox.y1}}};
    if (v.value) e["value"] = *v.value;
    elems.push_back(std::move(e));
  }
  json j{{"page_title", o.page_title},
         {"visible_elements", elems},
         {"scroll_hint", o.scroll_hint},
         {"chrome_note", o.chrome_note}};
  if (o.success_banner) j["success_banner"] = *o.success_banner;
  return j;
}

namespace {

const Page& current_page(const EnvState& s) {
  const Page* p = s.bundle->page_graph.find_page(s.current_page_id);
  if (!p) throw EngineError("current page '" + s.current_page_id + "' missing from graph");
  return *p;
}

bool is_submission(const EnvState& s) {
  return s.current_page_id == s.bundle->page_graph.submission_page_id;
}

// Content rows of a page: everything except the back element, which is pinned.
std::vector<const Element*> content_rows(const Page& page) {
  std::vector<const Element*> rows;
  for (const auto& e : page.elements) {
    if (e.kind != ElementKind::back) rows.push_back(&e);
  }
  return rows;
}

int content_bottom(const Page& page) {
  int n = static_cast<int>(content_rows(page).size());
  if (n == 0) return kRowStart;
  return kRowStart + (n - 1) * (kRowHeight + kRowGap) + kRowHeight;
}

int max_scroll(const Page& page) { return std::max(0, content_bottom(page) - kViewBottom); }

VisibleElement project(const Element& e, Bbox box) {
  VisibleElement v;
  v.testid = e.testid;
  v.kind = e.kind;
  v.label = e.label;
  v.value = e.value;
  v.bbox = box;
  return v;
}

}  // namespace

Observation render_observation(const EnvState& state) {
  const Page& page = current_page(state);
  const PageGraph& g = state.bundle->page_graph;
  Observation obs;
  obs.page_title = page.title;
  obs.chrome_note = "fixed tag bar, y<=120, do not interact";

  // Content rows, scroll-translated; a row is visible only when fully inside
  // the [140, 920) content window.
  auto rows = content_rows(page);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int top = kRowStart + static_cast<int>(i) * (kRowHeight + kRowGap) - state.scroll_offset;
    int bottom = top + kRowHeight;
    if (top < kRowStart || bottom > kViewBottom) continue;
    VisibleElement v = project(*rows[i], {kRowLeft, top, kRowRight, bottom});
    if (v.kind == ElementKind::result) v.value = state.result_text;
    obs.visible_elements.push_back(std::move(v));
  }
  obs.scroll_hint = content_bottom(page) - state.scroll_offset > kViewBottom;

  if (is_submission(state)) {
    for (const auto& e : page.elements) {
      if (e.kind == ElementKind::back) {
        obs.visible_elements.push_back(
            project(e, {kBackBox[0], kBackBox[1], kBackBox[2], kBackBox[3]}));
      }
    }
  } else {
    obs.visible_elements.push_back(project(
        g.go_submit_element, {kGoSubmitBox[0], kGoSubmitBox[1], kGoSubmitBox[2], kGoSubmitBox[3]}));
    int n = static_cast<int>(g.tab_elements.size());
    for (int i = 0; i < n; ++i) {
      int x0 = i * 1000 / n;
      int x1 = (i + 1) * 1000 / n;
      obs.visible_elements.push_back(project(g.tab_elements[i], {x0, kTabBandTop, x1, 1000}));
    }
  }

  if (state.terminal && state.terminal->success) obs.success_banner = "Success!";
  else if (state.result_text == "Success!") obs.success_banner = "Success!";
  return obs;
}

EnvState reset(const EnvironmentBundle& bundle, int max_steps, bool verify) {
  if (verify) {
    InspectionReport rep = statically_verify(bundle);
    if (!rep.ok) throw EngineError("refusing to run an unverified bundle");
  }
  EnvState s;
  s.bundle = &bundle;
  s.current_page_id = bundle.page_graph.home_page_id;
  s.max_steps = max_steps;
  return s;
}

HitResult resolve_hit(const EnvState& state, int x, int y) {
  if (x < 0 || x > 1000 || y < 0 || y > 1000) {
    throw EngineError("coordinates out of the 0-1000 grid");
  }
  if (y < kChromeBand) return {HitResult::Kind::chrome, {}};
  Observation obs = render_observation(state);
  for (const auto& v : obs.visible_elements) {
    if (v.bbox.contains(x, y)) return {HitResult::Kind::element, v};
  }
  return {HitResult::Kind::none, {}};
}

GradeResult grade(const EnvState& state, const std::string& submitted) {
  GradeResult r;
  r.submitted = submitted;
  r.gold = state.bundle->gold;
  r.success = submitted == state.bundle->gold;
  return r;
}

namespace {

// Looks up the navigation target behind a testid: tabs, the submission entry,
// or any element of the current page.
const Element* find_navigable(const EnvState& s, const std::string& testid) {
  const PageGraph& g = s.bundle->page_graph;
  for (const auto& e : g.tab_elements) {
    if (e.testid == testid) return &e;
  }
  if (g.go_submit_element.testid == testid) return &g.go_submit_element;
  for (const auto& e : current_page(s).elements) {
    if (e.testid == testid) return &e;
  }
  return nullptr;
}

StepResult navigate(EnvState& s, const std::string& target) {
  if (!s.bundle->page_graph.find_page(target)) {
    return {StepEffect::noop, "navigation target '" + target + "' missing"};
  }
  s.current_page_id = target;
  s.scroll_offset = 0;
  return {StepEffect::navigated, ""};
}

StepResult do_grade(EnvState& s) {
  std::string submitted = s.input_buffer.count("answer-input") ? s.input_buffer["answer-input"]
                                                               : std::string();
  GradeResult r = grade(s, submitted);
  // Exact banner contract: the result element reads exactly "Success!" iff the
  // submission matches; on failure the session continues.
  s.result_text = r.success ? "Success!" : "Incorrect answer. Please try again.";
  if (r.success) s.terminal = r;
  return {StepEffect::graded, ""};
}

StepResult click_element(EnvState& s, const VisibleElement& hit) {
  switch (hit.kind) {
    case ElementKind::tab:
    case ElementKind::button:
    case ElementKind::list_item:
    case ElementKind::back: {
      const Element* e = find_navigable(s, hit.testid);
      if (!e || !e->target_page) return {StepEffect::noop, "element has no target"};
      return navigate(s, *e->target_page);
    }
    case ElementKind::distractor:
      if (!s.toggled.erase(hit.testid)) s.toggled.insert(hit.testid);
      return {StepEffect::toggled, ""};
    case ElementKind::submit:
      return do_grade(s);
    case ElementKind::input:
      return {StepEffect::noop, "click on input without text"};
    default:
      return {StepEffect::noop, "inert element"};
  }
}

}  // namespace

StepResult step(EnvState& state, const Action& action) {
  if (state.terminal) throw EngineError("step on a terminal state");
  state.step_count += 1;

  StepResult res{StepEffect::noop, ""};
  switch (action.kind) {
    case Action::Kind::click: {
      HitResult hit = resolve_hit(state, action.x, action.y);
      if (hit.kind == HitResult::Kind::chrome) res = {StepEffect::noop, "chrome band is inert"};
      else if (hit.kind == HitResult::Kind::none) res = {StepEffect::noop, "no element at point"};
      else res = click_element(state, hit.element);
      break;
    }
    case Action::Kind::type: {
      HitResult hit = resolve_hit(state, action.x, action.y);
      if (hit.kind == HitResult::Kind::element && hit.element.kind == ElementKind::input) {
        state.input_buffer[hit.element.testid] = action.text;
        res = {StepEffect::typed, ""};
      } else {
        res = {StepEffect::noop, "type target is not an input"};
      }
      break;
    }
    case Action::Kind::scroll: {
      int limit = max_scroll(current_page(state));
      int next = std::min(state.scroll_offset + kScrollStride, limit);
      if (next != state.scroll_offset) {
        state.scroll_offset = next;
        res = {StepEffect::scrolled, ""};
      } else {
        res = {StepEffect::noop, "content fits the viewport"};
      }
      break;
    }
    case Action::Kind::open: {
      const Element* e = find_navigable(state, action.testid);
      if (e && e->target_page) res = navigate(state, *e->target_page);
      else res = {StepEffect::noop, "no navigable element '" + action.testid + "'"};
      break;
    }
    case Action::Kind::back: {
      const Element* back = nullptr;
      for (const auto& e : current_page(state).elements) {
        if (e.kind == ElementKind::back) back = &e;
      }
      if (back && back->target_page) res = navigate(state, *back->target_page);
      else res = {StepEffect::noop, "no back element here"};
      break;
    }
    case Action::Kind::answer: {
      if (!is_submission(state)) {
        res = {StepEffect::noop, "answer outside the submission page"};
      } else {
        state.input_buffer["answer-input"] = action.text;
        res = do_grade(state);
      }
      break;
    }
  }

  if (!state.terminal && state.step_count >= state.max_steps) {
    state.terminal = GradeResult{false, state.input_buffer["answer-input"], state.bundle->gold};
  }
  return res;
}

std::string state_digest(const EnvState& state) {
  json j{{"page", state.current_page_id},
         {"scroll", state.scroll_offset},
         {"inputs", state.input_buffer},
         {"toggled", std::vector<std::string>(state.toggled.begin(), state.toggled.end())},
         {"result_text", state.result_text},
         {"step", state.step_count}};
  if (state.terminal) {
    j["terminal"] = {{"success", state.terminal->success}, {"submitted", state.terminal->submitted}};
  }
  return canonical_digest(j);
}

json transcript_record(const EnvState& state_after, const Action& action, StepEffect effect) {
  return json{{"step", state_after.step_count},
              {"action", to_json(action)},
              {"effect", to_string(effect)},
              {"page", state_after.current_page_id},
              {"digest", state_digest(state_after)}};
}

}  // namespace stamp
