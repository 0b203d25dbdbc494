#include "stamp/synthesis.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <queue>
#include <regex>
#include <set>

namespace stamp {

namespace {

// splitmix64: portable deterministic stream, unlike std distributions.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::uint64_t below(std::uint64_t n) { return next() % n; }
  int range(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
};

std::string regex_escape(const std::string& s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

const std::vector<std::string>& name_pool() {
  static const std::vector<std::string> names = {
      "NovaBeat", "LumenFox", "Skylar",  "MiraQuinn", "EchoWren", "Vesper",
      "OrionDale", "Halcyon", "Juniper", "CedarLane", "Isolde",   "Peregrine"};
  return names;
}

const std::vector<std::string>& course_pool() {
  static const std::vector<std::string> courses = {
      "coding-course",     "emotional-intelligence", "time-management", "public-speaking",
      "creative-writing",  "data-literacy",          "design-thinking", "mindful-focus"};
  return courses;
}

bool parse_iso_date(const std::string& s, int* ordinal) {
  static const std::regex re(R"(^(\d{4})-(\d{2})-(\d{2})$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return false;
  int y = std::stoi(m[1]), mo = std::stoi(m[2]), d = std::stoi(m[3]);
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return false;
  if (ordinal) *ordinal = y * 10000 + mo * 100 + d;
  return true;
}

bool parse_price(const std::string& s, long long* cents) {
  static const std::regex re(R"(^\$(\d+)\.(\d{2})$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return false;
  if (cents) *cents = std::stoll(m[1]) * 100 + std::stoll(m[2]);
  return true;
}

std::string make_date(Rng& rng) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "2024-%02d-%02d", rng.range(1, 12), rng.range(1, 28));
  return buf;
}

std::string make_price(Rng& rng) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "$%d.%02d", rng.range(5, 499), rng.range(0, 99));
  return buf;
}

std::string make_code(Rng& rng) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d", rng.range(1000, 9999));
  return buf;
}

std::vector<std::string> pick_distinct(Rng& rng, const std::vector<std::string>& pool, int n) {
  std::vector<std::string> out;
  std::set<std::size_t> used;
  while (static_cast<int>(out.size()) < n) {
    std::size_t i = rng.below(pool.size());
    if (used.insert(i).second) out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Page graph helpers
// ---------------------------------------------------------------------------

std::string to_string(ElementKind k) {
  switch (k) {
    case ElementKind::tab: return "tab";
    case ElementKind::button: return "button";
    case ElementKind::list_item: return "list_item";
    case ElementKind::fact_display: return "fact_display";
    case ElementKind::input: return "input";
    case ElementKind::submit: return "submit";
    case ElementKind::result: return "result";
    case ElementKind::back: return "back";
    case ElementKind::distractor: return "distractor";
  }
  return "button";
}

ElementKind element_kind_from_string(const std::string& s) {
  if (s == "tab") return ElementKind::tab;
  if (s == "button") return ElementKind::button;
  if (s == "list_item") return ElementKind::list_item;
  if (s == "fact_display") return ElementKind::fact_display;
  if (s == "input") return ElementKind::input;
  if (s == "submit") return ElementKind::submit;
  if (s == "result") return ElementKind::result;
  if (s == "back") return ElementKind::back;
  if (s == "distractor") return ElementKind::distractor;
  throw std::invalid_argument("unknown element kind '" + s + "'");
}

const Page* PageGraph::find_page(const std::string& id) const {
  for (const auto& p : pages) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

Page* PageGraph::find_page(const std::string& id) {
  for (auto& p : pages) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

namespace {

json element_to_json(const Element& e) {
  json j{{"testid", e.testid}, {"kind", to_string(e.kind)}, {"label", e.label}};
  if (e.value) j["value"] = *e.value;
  if (e.target_page) j["target_page"] = *e.target_page;
  if (e.fact_key) j["fact_key"] = *e.fact_key;
  return j;
}

Element element_from_json(const json& j) {
  Element e;
  e.testid = j.at("testid").get<std::string>();
  e.kind = element_kind_from_string(j.at("kind").get<std::string>());
  e.label = j.value("label", "");
  if (j.contains("value")) e.value = j.at("value").get<std::string>();
  if (j.contains("target_page")) e.target_page = j.at("target_page").get<std::string>();
  if (j.contains("fact_key")) e.fact_key = j.at("fact_key").get<std::string>();
  return e;
}

json page_graph_to_json(const PageGraph& g) {
  json pages = json::array();
  for (const auto& p : g.pages) {
    json elems = json::array();
    for (const auto& e : p.elements) elems.push_back(element_to_json(e));
    pages.push_back(
        json{{"id", p.id}, {"title", p.title}, {"role", p.role}, {"elements", elems}});
  }
  json tabs = json::array();
  for (const auto& e : g.tab_elements) tabs.push_back(element_to_json(e));
  return json{{"pages", pages},
              {"tab_elements", tabs},
              {"go_submit_element", element_to_json(g.go_submit_element)},
              {"home_page_id", g.home_page_id},
              {"submission_page_id", g.submission_page_id}};
}

PageGraph page_graph_from_json(const json& j) {
  PageGraph g;
  for (const auto& pj : j.at("pages")) {
    Page p;
    p.id = pj.at("id").get<std::string>();
    p.title = pj.value("title", "");
    p.role = pj.value("role", "");
    for (const auto& ej : pj.value("elements", json::array())) {
      p.elements.push_back(element_from_json(ej));
    }
    g.pages.push_back(std::move(p));
  }
  for (const auto& ej : j.value("tab_elements", json::array())) {
    g.tab_elements.push_back(element_from_json(ej));
  }
  g.go_submit_element = element_from_json(j.at("go_submit_element"));
  g.home_page_id = j.at("home_page_id").get<std::string>();
  g.submission_page_id = j.at("submission_page_id").get<std::string>();
  return g;
}

}  // namespace

json to_json(const EnvironmentBundle& v) {
  return json{{"stamp_schema", kStampSchemaVersion},
              {"scenario", to_json(v.scenario)},
              {"task_spec", to_json(v.task_spec)},
              {"page_graph", page_graph_to_json(v.page_graph)},
              {"gold", v.gold},
              {"facts", v.facts},
              {"provenance",
               {{"master_seed", v.provenance.master_seed},
                {"generator", v.provenance.generator},
                {"repair_rounds", v.provenance.repair_rounds},
                {"task_seed_id", v.provenance.task_seed_id}}}};
}

EnvironmentBundle bundle_from_json(const json& j) {
  EnvironmentBundle v;
  v.scenario = scenario_from_json(j.at("scenario"));
  v.task_spec = task_spec_from_json(j.at("task_spec"));
  v.page_graph = page_graph_from_json(j.at("page_graph"));
  v.gold = j.at("gold").get<std::string>();
  v.facts = j.at("facts").get<std::map<std::string, std::string>>();
  const auto& pr = j.at("provenance");
  v.provenance.master_seed = pr.value("master_seed", 0ll);
  v.provenance.generator = pr.value("generator", "procedural");
  v.provenance.repair_rounds = pr.value("repair_rounds", 0);
  v.provenance.task_seed_id = pr.value("task_seed_id", "");
  return v;
}

std::string bundle_digest(const EnvironmentBundle& v) { return canonical_digest(to_json(v)); }

json to_json(const InspectionReport& v) {
  json obs = json::array();
  for (const auto& [page, what] : v.evidence.key_observations) {
    obs.push_back(json{{"page_or_section", page}, {"what", what}});
  }
  return json{{"ok", v.ok},
              {"predicted_answer", v.predicted_answer},
              {"uniqueness",
               {{"is_unique", v.uniqueness.is_unique},
                {"ambiguity_reasons", v.uniqueness.ambiguity_reasons}}},
              {"evidence", {{"key_observations", obs}, {"key_notes", v.evidence.key_notes}}},
              {"fix_needed", v.fix_needed},
              {"structural_violations", v.structural_violations}};
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

const SeedCatalog& default_catalog() {
  static const SeedCatalog catalog = [] {
    SeedCatalog c;
    c.platforms.push_back(PlatformSeed{
        "social", "StarWave", "Discover every trend in everyday life",
        {"Feed", "Search", "Profile", "Messages", "Me"},
        {"#FF5C8A", "#7A3CFF", "#F7F8FA"},
        "Rounded cards", "Soft skeuomorphic", "Young, social, energetic",
        {"creator", "topic", "hot post", "followers", "likes", "shares"},
        {"post detail", "topic detail", "pinned post on creator profile"},
        {"Trending Picks", "You May Like", "Upgrade to Premium", "Find Contacts", "Live Stream"}});
    c.platforms.push_back(PlatformSeed{
        "shopping", "Cartly", "Everything you need, delivered",
        {"Home", "Categories", "Cart", "Orders", "Me"},
        {"#2D9CDB", "#F2994A", "#FFFFFF"},
        "Flat cards", "Outline", "Friendly, practical",
        {"product", "brand", "order", "review", "rating"},
        {"product detail", "order detail", "brand page"},
        {"Flash Sale", "Daily Deals", "Invite Friends", "Coupon Center", "Wishlist"}});
    c.platforms.push_back(PlatformSeed{
        "finance", "Ledgerly", "Your money, in focus",
        {"Overview", "Accounts", "Reports", "Me"},
        {"#27AE60", "#1B2A41", "#F4F6F8"},
        "Dense cards", "Monoline", "Calm, precise",
        {"account", "transaction", "budget", "statement"},
        {"account detail", "transaction detail", "statement page"},
        {"Premium Upgrade", "Refer a Friend", "Budget Tips", "Currency Watch", "Insights Feed"}});
    c.platforms.push_back(PlatformSeed{
        "travel", "Wayfare", "Go further, remember more",
        {"Explore", "Trips", "Bookings", "Alerts", "Me"},
        {"#EB5757", "#2F80ED", "#FAFAFA"},
        "Photo cards", "Filled", "Adventurous, warm",
        {"destination", "trip", "booking", "guide"},
        {"trip detail", "booking detail", "destination page"},
        {"Hot Destinations", "Travel Deals", "Points Club", "Weather Widget", "Nearby Events"}});

    c.tasks.push_back(TaskSeed{
        "date_compare_latest",
        "Read dates from multiple detail pages, find the latest one, and submit the "
        "corresponding name",
        "Compare date fields and output the name associated with the latest date",
        4, MemoryLoad::medium, "Output only the latest item's name", AnswerType::single_label,
        {"Detail A", "Detail B", "Detail C", "Submit name"}});
    c.tasks.push_back(TaskSeed{
        "price_compare_cheapest",
        "Read prices from multiple detail pages, find the cheapest one, and submit the "
        "corresponding name",
        "Compare price fields and output the name associated with the lowest price",
        4, MemoryLoad::medium, "Output only the cheapest item's name", AnswerType::single_label,
        {"Detail A", "Detail B", "Detail C", "Submit name"}});
    c.tasks.push_back(TaskSeed{
        "code_lookup",
        "Find a 4-digit code on a detail page, remember it, and submit it",
        "Locate the access code and output it exactly",
        3, MemoryLoad::low, "Output only the 4-digit code", AnswerType::code,
        {"Detail Code", "Submit code"}});
    c.tasks.push_back(TaskSeed{
        "code_join_composite",
        "Read one code from each of two detail pages and submit them joined by a semicolon",
        "Collect both codes and output them joined with ';' in reading order",
        4, MemoryLoad::high, "Output code1;code2 with no spaces", AnswerType::composite,
        {"Detail First", "Detail Second", "Submit codes"}});
    return c;
  }();
  return catalog;
}

std::pair<PlatformSeed, TaskSeed> sample_seeds(long long master_seed, const SeedCatalog& catalog) {
  if (catalog.platforms.empty() || catalog.tasks.empty()) {
    throw std::invalid_argument("seed catalog is empty");
  }
  json cat = json::array();
  for (const auto& p : catalog.platforms) cat.push_back(to_json(p));
  for (const auto& t : catalog.tasks) cat.push_back(to_json(t));
  std::uint64_t mix =
      static_cast<std::uint64_t>(master_seed) ^ fnv1a64(canonical_dump(cat));
  Rng rng(mix);
  std::uint64_t idx = rng.below(catalog.platforms.size() * catalog.tasks.size());
  return {catalog.platforms[idx / catalog.tasks.size()],
          catalog.tasks[idx % catalog.tasks.size()]};
}

// ---------------------------------------------------------------------------
// Procedural generation
// ---------------------------------------------------------------------------

namespace {

struct FactSpec {
  std::string page_id;
  std::string page_title;
  std::string entity_name;
  std::string fact_key;
  std::string value;
};

struct PatternPlan {
  std::vector<FactSpec> facts;  // in ui_pattern order
  std::string gold;
  std::string explain;
  std::string question;
  std::string output_format;
  // Safe value for a comparable-looking distractor: never affects the answer.
  std::string safe_noise_value;
};

PatternPlan plan_pattern(const TaskSeed& task, const PlatformSeed& platform, Rng& rng) {
  PatternPlan plan;
  if (task.id == "date_compare_latest" || task.id == "price_compare_cheapest") {
    bool dates = task.id == "date_compare_latest";
    auto names = pick_distinct(rng, name_pool(), 3);
    std::vector<std::string> values;
    while (true) {
      values.clear();
      for (int i = 0; i < 3; ++i) values.push_back(dates ? make_date(rng) : make_price(rng));
      std::set<std::string> uniq(values.begin(), values.end());
      if (uniq.size() == 3) break;  // reject ties so the extremum is unique
    }
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (dates ? values[i] > values[best] : [&] {
            long long a = 0, b = 0;
            parse_price(values[i], &a);
            parse_price(values[best], &b);
            return a < b;
          }()) {
        best = i;
      }
    }
    std::string field = dates ? "date" : "price";
    for (int i = 0; i < 3; ++i) {
      std::string s = slug(names[i]);
      plan.facts.push_back({"detail-" + s, names[i] + " Detail", names[i], field + "_" + s,
                            values[i]});
    }
    plan.gold = names[best];
    plan.explain = names[best] + " has the " + (dates ? "latest date " : "lowest price ") +
                   values[best] + " among the three candidates.";
    plan.question = "In the " + platform.app_name + " app, open the detail pages of " + names[0] +
                    ", " + names[1] + " and " + names[2] + ", compare their " +
                    (dates ? "publish dates" : "prices") + ", and submit the name with the " +
                    (dates ? "latest date." : "lowest price.");
    plan.output_format = "Output only the name, e.g. " + name_pool()[0];
    if (dates) {
      std::string lo = *std::min_element(values.begin(), values.end());
      plan.safe_noise_value = "2023" + lo.substr(4);  // strictly older than every candidate
    } else {
      long long hi = 0;
      for (const auto& v : values) {
        long long c = 0;
        parse_price(v, &c);
        hi = std::max(hi, c);
      }
      char buf[24];
      std::snprintf(buf, sizeof(buf), "$%lld.%02d", hi / 100 + 100, static_cast<int>(hi % 100));
      plan.safe_noise_value = buf;  // strictly pricier than every candidate
    }
  } else if (task.id == "code_lookup") {
    auto names = pick_distinct(rng, name_pool(), 1);
    std::string code = make_code(rng);
    std::string s = slug(names[0]);
    plan.facts.push_back({"detail-" + s, names[0] + " Booking", names[0], "code_" + s, code});
    plan.gold = code;
    plan.explain = "The access code shown on " + names[0] + "'s booking page is " + code + ".";
    plan.question = "In the " + platform.app_name + " app, open " + names[0] +
                    "'s booking page, find the 4-digit access code, and submit it.";
    plan.output_format = "Output only the 4-digit code, e.g. 1234";
    std::string noise = make_code(rng);
    while (noise == code) noise = make_code(rng);
    plan.safe_noise_value = noise;
  } else if (task.id == "code_join_composite") {
    auto courses = pick_distinct(rng, course_pool(), 2);
    plan.facts.push_back({"detail-first", "First Pick", courses[0], "course_first", courses[0]});
    plan.facts.push_back(
        {"detail-second", "Second Pick", courses[1], "course_second", courses[1]});
    plan.gold = courses[0] + ";" + courses[1];
    plan.explain = "The two course codes, joined in reading order, form " + plan.gold + ".";
    plan.question = "In the " + platform.app_name +
                    " app, open the First Pick page and the Second Pick page, remember the course "
                    "code on each, and submit both codes joined by ';' with no spaces.";
    plan.output_format = "Output code1;code2 with no spaces, e.g. coding-course;time-management";
    plan.safe_noise_value = "";
  } else {
    throw std::invalid_argument("unsupported task seed id '" + task.id + "'");
  }
  return plan;
}

}  // namespace

EnvironmentBundle generate_environment(const PlatformSeed& platform, const TaskSeed& task,
                                       long long rng_seed, const GenerationOptions& opts) {
  {
    auto pr = validate_platform_seed(platform);
    auto tr = validate_task_seed(task);
    if (!pr.ok || !tr.ok) {
      throw std::invalid_argument("invalid seed inputs to generate_environment");
    }
  }
  Rng rng(static_cast<std::uint64_t>(rng_seed) ^ fnv1a64(platform.app_name + "|" + task.id));
  PatternPlan plan = plan_pattern(task, platform, rng);

  EnvironmentBundle b;
  b.gold = plan.gold;
  b.provenance.master_seed = rng_seed;
  b.provenance.generator = "procedural";
  b.provenance.task_seed_id = task.id;
  for (const auto& f : plan.facts) b.facts[f.fact_key] = f.value;

  // --- scenario ---
  Scenario& sc = b.scenario;
  sc.meta.seed = rng_seed;
  sc.meta.platform_type = platform.app_type;
  sc.meta.app_name = platform.app_name;
  sc.meta.theme_keywords = {platform.card_style, platform.icon_style, platform.text_tone};
  for (const auto& f : plan.facts) {
    sc.entities.push_back({f.entity_name, {{f.fact_key, f.value}}});
  }
  sc.truth.gold = plan.gold;
  sc.truth.explain = plan.explain;
  sc.truth.facts = b.facts;
  sc.task.question = plan.question;
  sc.task.final_output_format = plan.output_format;
  sc.task.gold = plan.gold;
  sc.ui_requirements.tabs = platform.tabs;
  for (const auto& d : platform.distractions) {
    sc.ui_requirements.distraction_interactions.push_back("toggle " + d);
  }
  for (std::size_t i = sc.ui_requirements.distraction_interactions.size(); i < 5; ++i) {
    sc.ui_requirements.distraction_interactions.push_back("toggle Promo " + std::to_string(i + 1));
  }

  // --- page graph ---
  PageGraph& g = b.page_graph;
  g.home_page_id = "home";
  g.submission_page_id = "submit";
  for (std::size_t i = 0; i < platform.tabs.size(); ++i) {
    const std::string& tab = platform.tabs[i];
    Element e;
    e.testid = "tab-" + slug(tab);
    e.kind = ElementKind::tab;
    e.label = tab;
    e.target_page = i == 0 ? std::string("home") : "tabpage-" + slug(tab);
    g.tab_elements.push_back(std::move(e));
  }
  g.go_submit_element = {"go-submit-answer", ElementKind::button, "Submit Answer", std::nullopt,
                         std::string("submit"), std::nullopt};

  std::vector<std::string> distraction_names = sc.ui_requirements.distraction_interactions;
  for (auto& d : distraction_names) d = d.substr(std::string("toggle ").size());
  bool high_noise = opts.noise_level != "low";

  Page home;
  home.id = "home";
  home.title = platform.app_name + " Home";
  home.role = "home";
  for (const auto& f : plan.facts) {
    home.elements.push_back({"entry-" + slug(f.entity_name), ElementKind::list_item,
                             f.page_title, std::nullopt, f.page_id, std::nullopt});
  }
  // Distractors are spread over home and tab pages; the first one on home
  // carries a comparable-looking value that can never win the comparison.
  for (std::size_t i = 0; i < distraction_names.size() && i < 2; ++i) {
    Element d{"distract-" + slug(distraction_names[i]), ElementKind::distractor,
              distraction_names[i], std::nullopt, std::nullopt, std::nullopt};
    if (i == 0 && high_noise && !plan.safe_noise_value.empty()) d.value = plan.safe_noise_value;
    home.elements.push_back(std::move(d));
  }
  g.pages.push_back(std::move(home));

  std::vector<MemoryItem> memory_items;
  for (std::size_t i = 0; i < plan.facts.size(); ++i) {
    const auto& f = plan.facts[i];
    Page detail;
    detail.id = f.page_id;
    detail.title = f.page_title;
    detail.role = "detail";
    detail.elements.push_back({"fact-" + slug(f.fact_key), ElementKind::fact_display,
                               "Key detail", f.value, std::nullopt, f.fact_key});
    if (high_noise) {
      detail.elements.push_back({"note-" + slug(f.entity_name), ElementKind::distractor,
                                 "Pinned note", std::nullopt, std::nullopt, std::nullopt});
    }
    g.pages.push_back(std::move(detail));
    memory_items.push_back({f.page_id, f.fact_key,
                            "Open " + f.page_title + " from Home and read the '" +
                                ("fact-" + slug(f.fact_key)) + "' field."});
    sc.ui_requirements.pages.push_back(
        {f.page_id, f.page_title, "Shows " + f.fact_key, {f.fact_key}});
  }

  for (std::size_t i = 1; i < platform.tabs.size(); ++i) {
    Page tp;
    tp.id = "tabpage-" + slug(platform.tabs[i]);
    tp.title = platform.tabs[i];
    tp.role = "tab_page";
    std::size_t d = 2 + (i - 1);
    if (d < distraction_names.size()) {
      tp.elements.push_back({"distract-" + slug(distraction_names[d]), ElementKind::distractor,
                             distraction_names[d], std::nullopt, std::nullopt, std::nullopt});
    }
    g.pages.push_back(std::move(tp));
  }
  // Any distraction modules that did not fit on a tab page land on the last one.
  for (std::size_t d = 2 + (platform.tabs.size() - 1); d < distraction_names.size(); ++d) {
    g.pages.back().elements.push_back({"distract-" + slug(distraction_names[d]),
                                       ElementKind::distractor, distraction_names[d],
                                       std::nullopt, std::nullopt, std::nullopt});
  }

  Page submit;
  submit.id = "submit";
  submit.title = "Submit Answer";
  submit.role = "submit";
  submit.elements.push_back(
      {"back", ElementKind::back, "Back", std::nullopt, std::string("home"), std::nullopt});
  submit.elements.push_back({"answer-input", ElementKind::input, "Your answer", std::string(""),
                             std::nullopt, std::nullopt});
  submit.elements.push_back(
      {"answer-submit", ElementKind::submit, "Submit", std::nullopt, std::nullopt, std::nullopt});
  submit.elements.push_back(
      {"result", ElementKind::result, "Result", std::string(""), std::nullopt, std::nullopt});
  g.pages.push_back(std::move(submit));

  sc.ui_requirements.pages.push_back({"home", platform.app_name + " Home", "Entry list", {}});
  sc.ui_requirements.pages.push_back({"submit", "Submit Answer", "Final submission", {}});
  sc.task.must_visit.clear();
  for (const auto& f : plan.facts) sc.task.must_visit.push_back(f.page_id);
  sc.task.must_visit.push_back("submit");

  // --- task spec ---
  TaskSpec& ts = b.task_spec;
  ts.platform.app_name = platform.app_name;
  ts.platform.style_keywords = sc.meta.theme_keywords;
  ts.platform.tabs = platform.tabs;
  ts.task.natural_language = plan.question;
  {
    std::string gl = "Workflow: ";
    for (const auto& f : plan.facts) {
      gl += "open " + f.page_title + " (page " + f.page_id + ") and remember " + f.fact_key +
            " = " + f.value + ". ";
    }
    gl += plan.explain;
    gl += " Then tap 'Submit Answer', type " + plan.gold +
          " into the answer field, and press Submit. Stop after the result shows Success!.";
    ts.task.guideline = gl;
  }
  ts.task.must_visit_pages = sc.task.must_visit;
  ts.task.memory_items = memory_items;
  ts.task.final_action = {"submit", "input_and_submit", "answer-input", "answer-submit",
                          plan.output_format, plan.gold};
  ts.task.grading = {"exact", plan.gold, "^" + regex_escape(plan.gold) + "$"};
  ts.ui_contract.required_testids = {"go-submit-answer", "answer-input", "answer-submit",
                                     "result"};
  for (const auto& e : g.tab_elements) ts.ui_contract.required_testids.push_back(e.testid);
  for (const auto& m : memory_items) {
    ts.ui_contract.required_testids.push_back("fact-" + slug(m.fact_key));
    sc.ui_requirements.key_testids.push_back("fact-" + slug(m.fact_key));
  }
  for (const auto& tab : platform.tabs) {
    ts.ui_contract.navigation_contract.push_back(
        "tab-" + slug(tab) +
        " must exist and be clickable for navigation, but must not appear on the submission page");
  }
  ts.anti_triviality.extra_interactives = distraction_names;
  ts.anti_triviality.notes = "Distraction toggles are stateful but never change truth facts.";
  return b;
}

// ---------------------------------------------------------------------------
// Static verification
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  std::string testid;
  std::string page_id;
  std::string value;
  bool is_memory = false;     // backed by a memory item fact
  std::string entity_name;    // for memory candidates of comparison patterns
};

// All elements of the bundle, with the page they live on ("" for shared ones).
void for_each_element(const PageGraph& g,
                      const std::function<void(const Element&, const std::string&)>& fn) {
  for (const auto& p : g.pages) {
    for (const auto& e : p.elements) fn(e, p.id);
  }
  for (const auto& e : g.tab_elements) fn(e, "");
  fn(g.go_submit_element, "");
}

}  // namespace

InspectionReport statically_verify(const EnvironmentBundle& bundle) {
  InspectionReport rep;
  const PageGraph& g = bundle.page_graph;
  const TaskSpec& ts = bundle.task_spec;

  // Structural checks ------------------------------------------------------
  std::map<std::string, int> testid_count;
  for_each_element(g, [&](const Element& e, const std::string&) { testid_count[e.testid]++; });
  for (const auto& t : ts.ui_contract.required_testids) {
    int n = testid_count.count(t) ? testid_count[t] : 0;
    if (n != 1) {
      rep.structural_violations.push_back("required testid '" + t + "' present " +
                                          std::to_string(n) + " times (expected 1)");
    }
  }
  for (const auto& [t, n] : testid_count) {
    if (n > 1) rep.structural_violations.push_back("duplicate testid '" + t + "'");
  }

  const Page* submit_page = g.find_page(g.submission_page_id);
  if (!submit_page) {
    rep.structural_violations.push_back("submission page missing");
  } else {
    bool has_back = false;
    for (const auto& e : submit_page->elements) {
      if (e.kind == ElementKind::back) has_back = true;
      if (e.kind == ElementKind::tab) {
        rep.structural_violations.push_back("tab element on submission page");
      }
    }
    if (!has_back) rep.structural_violations.push_back("submission page has no back element");
  }

  if (bundle.gold != bundle.scenario.truth.gold ||
      bundle.gold != ts.task.grading.gold ||
      bundle.scenario.task.gold != bundle.scenario.truth.gold) {
    rep.structural_violations.push_back("gold mismatch across scenario/task_spec/bundle");
  }
  try {
    if (!std::regex_search(bundle.gold, std::regex(ts.task.grading.pass_regex))) {
      rep.structural_violations.push_back("pass_regex does not match gold");
    }
  } catch (const std::regex_error&) {
    rep.structural_violations.push_back("pass_regex invalid");
  }

  // Reachability from home via tabs / element targets / submission entry.
  {
    std::set<std::string> reached;
    std::queue<std::string> q;
    q.push(g.home_page_id);
    reached.insert(g.home_page_id);
    auto visit = [&](const std::optional<std::string>& target) {
      if (target && !reached.count(*target) && g.find_page(*target)) {
        reached.insert(*target);
        q.push(*target);
      }
    };
    while (!q.empty()) {
      const Page* p = g.find_page(q.front());
      q.pop();
      if (!p) continue;
      if (p->role != "submit") {
        for (const auto& e : g.tab_elements) visit(e.target_page);
        visit(g.go_submit_element.target_page);
      }
      for (const auto& e : p->elements) visit(e.target_page);
    }
    for (const auto& page_id : ts.task.must_visit_pages) {
      if (!reached.count(page_id)) {
        rep.structural_violations.push_back("must_visit page '" + page_id +
                                            "' unreachable from home");
      }
    }
  }

  // Each memory fact value must sit on exactly one fact_display element.
  std::set<std::string> memory_keys;
  for (const auto& m : ts.task.memory_items) memory_keys.insert(m.fact_key);
  for (const auto& m : ts.task.memory_items) {
    auto it = bundle.facts.find(m.fact_key);
    if (it == bundle.facts.end()) {
      rep.structural_violations.push_back("memory fact '" + m.fact_key + "' missing from facts");
      continue;
    }
    int shown = 0;
    for_each_element(g, [&](const Element& e, const std::string&) {
      if (e.kind == ElementKind::fact_display && e.fact_key == m.fact_key &&
          e.value == it->second) {
        shown++;
      }
    });
    if (shown != 1) {
      rep.structural_violations.push_back("fact '" + m.fact_key + "' displayed " +
                                          std::to_string(shown) + " times (expected 1)");
    }
  }
  for_each_element(g, [&](const Element& e, const std::string&) {
    if (e.kind == ElementKind::distractor && e.fact_key && memory_keys.count(*e.fact_key)) {
      rep.structural_violations.push_back("distractor '" + e.testid +
                                          "' carries a memory fact key");
    }
  });

  // Semantic scan ----------------------------------------------------------
  const std::string& pattern = bundle.provenance.task_seed_id;
  std::vector<Candidate> candidates;
  auto entity_for_key = [&](const std::string& key) -> std::string {
    for (const auto& ent : bundle.scenario.entities) {
      if (ent.attributes.count(key)) return ent.name;
    }
    return key;
  };

  if (pattern == "date_compare_latest" || pattern == "price_compare_cheapest") {
    bool dates = pattern == "date_compare_latest";
    for_each_element(g, [&](const Element& e, const std::string& page) {
      if (!e.value) return;
      int ord = 0;
      long long cents = 0;
      bool comparable = dates ? parse_iso_date(*e.value, &ord) : parse_price(*e.value, &cents);
      if (!comparable) return;
      Candidate c{e.testid, page, *e.value,
                  e.fact_key.has_value() && memory_keys.count(*e.fact_key) > 0, ""};
      if (c.is_memory) c.entity_name = entity_for_key(*e.fact_key);
      candidates.push_back(std::move(c));
    });
    auto better = [&](const std::string& a, const std::string& b) {
      if (dates) return a > b;
      long long ca = 0, cb = 0;
      parse_price(a, &ca);
      parse_price(b, &cb);
      return ca < cb;
    };
    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
      if (c.is_memory && (!best || better(c.value, best->value))) best = &c;
    }
    if (best) {
      rep.predicted_answer = best->entity_name;
      for (const auto& c : candidates) {
        if (!c.is_memory && !better(best->value, c.value)) {
          rep.uniqueness.is_unique = false;
          rep.uniqueness.ambiguity_reasons.push_back(
              "distractor '" + c.testid + "' on page '" + c.page_id + "' shows " + c.value +
              " which ties or beats the intended winner");
        }
      }
    } else {
      rep.structural_violations.push_back("no comparable memory candidates found");
    }
  } else if (pattern == "code_lookup") {
    if (!ts.task.memory_items.empty()) {
      const auto& key = ts.task.memory_items.front().fact_key;
      auto it = bundle.facts.find(key);
      if (it != bundle.facts.end()) {
        rep.predicted_answer = it->second;
        for_each_element(g, [&](const Element& e, const std::string& page) {
          bool own = e.fact_key && *e.fact_key == key;
          if (!own && e.value == it->second) {
            rep.uniqueness.is_unique = false;
            rep.uniqueness.ambiguity_reasons.push_back("element '" + e.testid + "' on page '" +
                                                       page + "' duplicates the gold code");
          }
        });
      }
    }
  } else if (pattern == "code_join_composite") {
    std::string joined;
    for (const auto& m : ts.task.memory_items) {
      auto it = bundle.facts.find(m.fact_key);
      if (it == bundle.facts.end()) continue;
      if (!joined.empty()) joined += ";";
      joined += it->second;
      for_each_element(g, [&](const Element& e, const std::string& page) {
        bool own = e.fact_key && *e.fact_key == m.fact_key;
        if (!own && e.value == it->second) {
          rep.uniqueness.is_unique = false;
          rep.uniqueness.ambiguity_reasons.push_back("element '" + e.testid + "' on page '" +
                                                     page + "' duplicates component '" +
                                                     it->second + "'");
        }
      });
    }
    rep.predicted_answer = joined;
  } else {
    rep.structural_violations.push_back("unknown task pattern '" + pattern + "'");
  }

  for (const auto& m : ts.task.memory_items) {
    auto it = bundle.facts.find(m.fact_key);
    if (it != bundle.facts.end()) {
      rep.evidence.key_notes.push_back(m.fact_key + "=" + it->second);
      rep.evidence.key_observations.push_back({m.page_id, m.fact_key + " shown as " + it->second});
    }
  }

  rep.ok = rep.structural_violations.empty() && rep.uniqueness.is_unique &&
           rep.predicted_answer == bundle.gold;
  rep.fix_needed = !rep.ok;
  return rep;
}

// ---------------------------------------------------------------------------
// Repair
// ---------------------------------------------------------------------------

namespace {

// Parse a distractor testid out of an ambiguity reason string.
std::string quoted_testid(const std::string& reason) {
  auto a = reason.find('\'');
  if (a == std::string::npos) return "";
  auto b = reason.find('\'', a + 1);
  if (b == std::string::npos) return "";
  return reason.substr(a + 1, b - a - 1);
}

Element* find_element(PageGraph& g, const std::string& testid) {
  for (auto& p : g.pages) {
    for (auto& e : p.elements) {
      if (e.testid == testid) return &e;
    }
  }
  for (auto& e : g.tab_elements) {
    if (e.testid == testid) return &e;
  }
  if (g.go_submit_element.testid == testid) return &g.go_submit_element;
  return nullptr;
}

// Value strictly out of comparison scope for the pattern.
std::string out_of_scope_value(const EnvironmentBundle& b) {
  const std::string& pattern = b.provenance.task_seed_id;
  if (pattern == "date_compare_latest") {
    std::string lo;
    for (const auto& [k, v] : b.facts) {
      if (lo.empty() || v < lo) lo = v;
    }
    return "2020-01-01" < lo ? "2020-01-01" : "1999-01-01";
  }
  if (pattern == "price_compare_cheapest") {
    long long hi = 0;
    for (const auto& [k, v] : b.facts) {
      long long c = 0;
      if (parse_price(v, &c)) hi = std::max(hi, c);
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "$%lld.%02d", hi / 100 + 500, static_cast<int>(hi % 100));
    return buf;
  }
  return "n/a";  // codes: any non-code text leaves the scan
}

}  // namespace

EnvironmentBundle repair(EnvironmentBundle bundle, InspectionReport report) {
  if (report.ok) return bundle;
  constexpr int kMaxRounds = 3;
  for (int round = 1; round <= kMaxRounds; ++round) {
    if (bundle.scenario.task.gold != bundle.scenario.truth.gold) {
      // Truth is never rewritten; a contradictory gold is a rejection.
      throw RepairError("task.gold contradicts truth.gold; bundle rejected");
    }

    // Priority (a): adjust ambiguous distractor values. Priority (b) on later
    // rounds: take them out of comparison scope entirely.
    for (const auto& reason : report.uniqueness.ambiguity_reasons) {
      std::string testid = quoted_testid(reason);
      if (Element* e = find_element(bundle.page_graph, testid)) {
        if (round == 1) {
          e->value = out_of_scope_value(bundle);
        } else {
          e->value.reset();
        }
      }
    }

    // Structural completion on the submission page.
    if (Page* submit = bundle.page_graph.find_page(bundle.page_graph.submission_page_id)) {
      auto has = [&](const std::string& id) {
        return std::any_of(submit->elements.begin(), submit->elements.end(),
                           [&](const Element& e) { return e.testid == id; });
      };
      if (!has("answer-input")) {
        submit->elements.push_back({"answer-input", ElementKind::input, "Your answer",
                                    std::string(""), std::nullopt, std::nullopt});
      }
      if (!has("answer-submit")) {
        submit->elements.push_back({"answer-submit", ElementKind::submit, "Submit", std::nullopt,
                                    std::nullopt, std::nullopt});
      }
      if (!has("result")) {
        submit->elements.push_back({"result", ElementKind::result, "Result", std::string(""),
                                    std::nullopt, std::nullopt});
      }
      if (!std::any_of(submit->elements.begin(), submit->elements.end(),
                       [](const Element& e) { return e.kind == ElementKind::back; })) {
        submit->elements.insert(submit->elements.begin(),
                                {"back", ElementKind::back, "Back", std::nullopt,
                                 std::string(bundle.page_graph.home_page_id), std::nullopt});
      }
    }

    bundle.provenance.repair_rounds = round;
    report = statically_verify(bundle);
    if (report.ok) return bundle;
  }
  std::string why = "unrepairable after 3 rounds:";
  for (const auto& v : report.structural_violations) why += " [" + v + "]";
  for (const auto& r : report.uniqueness.ambiguity_reasons) why += " [" + r + "]";
  throw RepairError(why);
}

// ---------------------------------------------------------------------------
// External generation
// ---------------------------------------------------------------------------

std::string external_generation_prompt(const PlatformSeed& platform, const TaskSeed& task) {
  json spec{{"platform_seed", to_json(platform)}, {"task_seed", to_json(task)}};
  std::string prompt =
      "You are a scenario generator.\n\n"
      "Your task is to generate a scenario JSON for a simulated mobile web app based on the "
      "given spec.\n\n"
      "Requirements:\n"
      "- The scenario must be diverse, realistic, interactive, and verifiable.\n"
      "- There must be a unique gold answer.\n"
      "- You may only use values from spec.fixed_values as the source of truth for anything "
      "related to the gold answer.\n"
      "- Do not invent any gold-related values outside spec.fixed_values.\n"
      "- You may expand copywriting, list items, titles, distracting information, and UI page "
      "structure details.\n"
      "- Output must be strictly valid JSON.\n"
      "- Output JSON only. No explanation. No markdown.\n"
      "- All content must be in English only.\n\n"
      "Input spec:\n" +
      spec.dump(2) +
      "\n\nYou must output a single JSON object with the full environment bundle structure: "
      "scenario, task_spec, page_graph, gold, facts, provenance.\n\n"
      "Requirements for the gold field:\n"
      "- gold must be a single-line string that can be matched exactly as a string.\n"
      "- Do not include spaces unless truly required by the format.\n"
      "- task.gold must be exactly identical to data.truth.gold.\n";
  return prompt;
}

namespace {

std::string strip_code_fences(const std::string& text) {
  auto first = text.find('{');
  auto last = text.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first) return text;
  return text.substr(first, last - first + 1);
}

void audit_write(const std::string& dir, const std::string& name, const std::string& body) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
  out << body;
}

}  // namespace

EnvironmentBundle external_generate(const PlatformSeed& platform, const TaskSeed& task,
                                    const CompletionFn& client,
                                    const ExternalGenerateOptions& opts) {
  std::string prompt = external_generation_prompt(platform, task);
  std::string tag = slug(platform.app_name) + "-" + task.id;
  audit_write(opts.audit_dir, tag + ".request.txt", prompt);
  try {
    std::string response = client(prompt);
    audit_write(opts.audit_dir, tag + ".response.txt", response);
    json doc;
    try {
      doc = json::parse(strip_code_fences(response));
    } catch (const json::exception& e) {
      throw ExternalGenerationError(std::string("unparseable generator response: ") + e.what());
    }
    EnvironmentBundle bundle;
    try {
      bundle = bundle_from_json(doc);
    } catch (const json::exception& e) {
      throw ExternalGenerationError(std::string("generator response missing fields: ") + e.what());
    }
    bundle.provenance.generator = "external";
    if (bundle.provenance.task_seed_id.empty()) bundle.provenance.task_seed_id = task.id;
    InspectionReport rep = statically_verify(bundle);
    if (!rep.ok) {
      try {
        bundle = repair(std::move(bundle), rep);
      } catch (const RepairError& e) {
        throw ExternalGenerationError(std::string("verification failed after repairs: ") +
                                      e.what());
      }
    }
    return bundle;
  } catch (const ExternalGenerationError&) {
    if (opts.fallback_to_procedural) {
      return generate_environment(platform, task, opts.fallback_rng_seed);
    }
    throw;
  }
}

}  // namespace stamp
