// Command-line surface for the synthesis -> verification -> execution ->
// scoring pipeline. Exit codes: 0 success, 1 validation failure, 2 transport
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stamp/evaluation.hpp"
#include "stamp/service.hpp"

namespace fs = std::filesystem;
using namespace stamp;

namespace {

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

EnvironmentBundle load_bundle(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationFailure("cannot open bundle '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
    return bundle_from_json(doc);
  } catch (const json::exception& e) {
    throw ValidationFailure("bundle '" + path.string() + "' unreadable: " + e.what());
  }
}

std::vector<fs::path> bundle_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw ValidationFailure("'" + dir.string() + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().string().ends_with(".bundle.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationFailure("no *.bundle.json files in " + dir.string());
  return files;
}

void write_bundle(const fs::path& dir, const EnvironmentBundle& bundle) {
  fs::create_directories(dir);
  fs::path file = dir / (std::to_string(bundle.provenance.master_seed) + "-" +
                         bundle.provenance.task_seed_id + ".bundle.json");
  std::ofstream out(file, std::ios::binary);
  out << canonical_dump(to_json(bundle)) << "\n";
}

int cmd_synth(long long master_seed, int count, const std::string& out_dir,
              const std::string& noise, bool external) {
  GenerationOptions opts;
  opts.noise_level = noise;
  CompletionFn generator;
  if (external) generator = client_from_env(kGeneratorUrlEnv, kGeneratorKeyEnv);
  for (long long seed = master_seed; seed < master_seed + count; ++seed) {
    auto [platform, task] = sample_seeds(seed, default_catalog());
    EnvironmentBundle bundle;
    if (external) {
      ExternalGenerateOptions ext;
      ext.fallback_to_procedural = true;
      ext.fallback_rng_seed = seed;
      bundle = external_generate(platform, task, generator, ext);
      bundle.provenance.master_seed = seed;
    } else {
      bundle = generate_environment(platform, task, seed, opts);
    }
    InspectionReport rep = statically_verify(bundle);
    if (!rep.ok) bundle = repair(std::move(bundle), rep);
    write_bundle(out_dir, bundle);
  }
  std::cout << count << " bundle(s) written to " << out_dir << "\n";
  return 0;
}

int cmd_verify(const std::vector<std::string>& paths) {
  bool all_ok = true;
  for (const auto& p : paths) {
    EnvironmentBundle bundle = load_bundle(p);
    InspectionReport rep = statically_verify(bundle);
    std::cout << canonical_dump(json{{"bundle", p}, {"report", to_json(rep)}}) << "\n";
    all_ok = all_ok && rep.ok;
  }
  return all_ok ? 0 : 1;
}

int cmd_run(const std::string& bundle_path, const std::string& planner_kind, int max_steps) {
  EnvironmentBundle bundle = load_bundle(bundle_path);
  std::unique_ptr<Planner> planner;
  std::unique_ptr<Worker> worker;
  if (planner_kind == "service") {
    planner = service_planner(bundle, client_from_env(kPlannerUrlEnv));
    worker = service_worker(client_from_env(kWorkerUrlEnv));
  } else {
    planner = scripted_planner(bundle);
    worker = oracle_worker();
  }
  Trajectory traj = run_episode(bundle, *planner, *worker, max_steps);
  traj = align_memory(traj, bundle.task_spec);
  std::cout << canonical_dump(to_json(traj)) << "\n";
  return traj.outcome && traj.outcome->success ? 0 : 1;
}

int cmd_collect(const std::string& bundles_dir, const std::string& out_path, int max_steps) {
  std::vector<Trajectory> trajectories;
  auto critic = heuristic_critic();
  for (const auto& file : bundle_files(bundles_dir)) {
    EnvironmentBundle bundle = load_bundle(file);
    auto planner = scripted_planner(bundle);
    auto worker = oracle_worker();
    Trajectory traj = run_episode(bundle, *planner, *worker, max_steps);
    traj = align_memory(traj, bundle.task_spec);
    traj = critic_filter(std::move(traj), *critic);
    trajectories.push_back(std::move(traj));
  }
  write_trajectories(out_path, trajectories);
  std::cout << trajectories.size() << " trajectory(ies) written to " << out_path << "\n";
  return 0;
}

int cmd_emit_sft(const std::string& traj_path, const std::string& ratio, double n,
                 const std::string& out_path) {
  SftOptions opts;
  opts.n = n;
  if (ratio == "vanilla") {
    opts.upsample = false;
  } else {
    auto colon = ratio.find(':');
    if (colon == std::string::npos) {
      throw ValidationFailure("--ratio must be M:O or 'vanilla'");
    }
    opts.upsample = true;
    opts.ratio_memory = std::stoi(ratio.substr(0, colon));
    opts.ratio_ordinary = std::stoi(ratio.substr(colon + 1));
    if (opts.ratio_memory < 1 || opts.ratio_ordinary < 1) {
      throw ValidationFailure("ratio parts must be positive");
    }
  }
  std::vector<SftRecord> records = emit_sft(read_trajectories(traj_path), opts);
  write_sft(out_path, records);
  std::cout << records.size() << " SFT record(s) written to " << out_path << "\n";
  return 0;
}

int cmd_rollout(const std::string& bundles_dir, int group_size, const std::string& mode,
                double beta, const std::string& out_path, int max_steps) {
  JudgeFn judge = [](const std::vector<std::string>& r, const std::vector<std::string>& p) {
    return offline_judge(r, p);
  };
  if (std::getenv(kJudgeUrlEnv)) {
    judge = completion_judge(client_from_env(kJudgeUrlEnv), "memory task", true);
  }
  std::vector<RolloutSample> samples;
  for (const auto& file : bundle_files(bundles_dir)) {
    EnvironmentBundle bundle = load_bundle(file);
    std::string task_id = bundle_digest(bundle).substr(0, 12);
    for (int g = 0; g < group_size; ++g) {
      // Alternate memory emission so groups have score spread to normalize.
      auto planner = scripted_planner(bundle, g % 2 == 0);
      auto worker = oracle_worker();
      Trajectory traj = run_episode(bundle, *planner, *worker, max_steps);
      traj = align_memory(traj, bundle.task_spec);
      RewardBreakdown rb = total_reward(traj, judge);
      for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        RolloutSample s;
        s.task_id = task_id;
        s.traj_id = traj.traj_id;
        s.step_id = static_cast<int>(i) + 1;
        s.is_final_step = i + 1 == traj.steps.size();
        s.score = s.is_final_step ? rb.total : 0.0;
        s.response_ref = traj.steps[i].screenshot_ref;
        samples.push_back(std::move(s));
      }
    }
  }
  AdvantageConfig cfg;
  cfg.mode = mode == "each_step" ? AdvantageMode::each_step : AdvantageMode::last_step;
  cfg.beta = beta;
  AdvantageResult adv = step_grpo_advantages(samples, cfg);
  for (const auto& w : adv.warnings) std::cerr << "warning: " << w << "\n";
  write_scores(out_path, samples, adv.advantages);
  std::cout << samples.size() << " score(s) written to " << out_path << "\n";
  return 0;
}

int cmd_bench(const std::string& suite_dir, const std::string& agent, int k,
              const std::string& variant, const std::string& report_path, int max_steps) {
  std::vector<EnvironmentBundle> suite;
  for (const auto& file : bundle_files(suite_dir)) suite.push_back(load_bundle(file));
  BenchmarkOptions opts;
  opts.k = k;
  opts.max_steps = max_steps;
  opts.variant = variant == "guided" ? BenchVariant::guided : BenchVariant::natural;
  if (agent == "service") {
    opts.agent = BenchAgent::service;
    opts.agent_client = client_from_env(kAgentUrlEnv);
  } else if (agent == "scripted_nomem") {
    opts.agent = BenchAgent::scripted_nomem;
  } else if (agent == "noop") {
    opts.agent = BenchAgent::noop;
  } else {
    opts.agent = BenchAgent::scripted;
  }
  BenchmarkReport report = run_benchmark(suite, opts);
  std::ofstream out(report_path, std::ios::binary);
  out << to_json(report).dump(2) << "\n";
  std::cout << "T-Acc " << report.t_acc << "  M-Acc " << report.m_acc << "  report "
            << report_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stamp: synthesize, verify, execute and score memory-centric GUI tasks"};
  app.require_subcommand(1);

  long long master_seed = 1;
  int count = 1, max_steps = 30, group_size = 4, k = 3;
  double n = 1.0, beta = 1.0;
  std::string out_dir = "bundles", noise = "high", bundle_path, planner_kind = "scripted";
  std::string bundles_dir, out_path, traj_path, ratio = "vanilla", mode = "last_step";
  std::string suite_dir, agent = "scripted", variant = "natural", report_path = "report.json";
  std::vector<std::string> verify_paths;
  bool external = false;

  auto* synth = app.add_subcommand("synth", "generate environment bundles");
  synth->add_option("--master-seed", master_seed)->required();
  synth->add_option("--count", count)->required();
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--noise", noise)->check(CLI::IsMember({"low", "high"}));
  synth->add_flag("--external", external, "use the external generator service");

  auto* verify = app.add_subcommand("verify", "statically verify bundles");
  verify->add_option("bundles", verify_paths, "bundle files")->required();

  auto* run = app.add_subcommand("run", "run one episode");
  run->add_option("--bundle", bundle_path)->required();
  run->add_option("--planner", planner_kind)->check(CLI::IsMember({"scripted", "service"}));
  run->add_option("--max-steps", max_steps);

  auto* collect = app.add_subcommand("collect", "collect aligned trajectories");
  collect->add_option("--bundles", bundles_dir)->required();
  collect->add_option("--out", out_path)->required();
  collect->add_option("--max-steps", max_steps);

  auto* emit = app.add_subcommand("emit-sft", "emit step-balanced SFT records");
  emit->add_option("--traj", traj_path)->required();
  emit->add_option("--ratio", ratio, "M:O target or 'vanilla'");
  emit->add_option("--n", n, "w_bal for b=true steps");
  emit->add_option("--out", out_path)->required();

  auto* rollout = app.add_subcommand("rollout", "roll out groups and score advantages");
  rollout->add_option("--bundles", bundles_dir)->required();
  rollout->add_option("--group-size", group_size);
  rollout->add_option("--mode", mode)->check(CLI::IsMember({"last_step", "each_step"}));
  rollout->add_option("--beta", beta);
  rollout->add_option("--out", out_path)->required();
  rollout->add_option("--max-steps", max_steps);

  auto* bench = app.add_subcommand("bench", "run the benchmark suite");
  bench->add_option("--suite", suite_dir)->required();
  bench->add_option("--agent", agent)
      ->check(CLI::IsMember({"scripted", "scripted_nomem", "noop", "service"}));
  bench->add_option("--k", k);
  bench->add_option("--variant", variant)->check(CLI::IsMember({"guided", "natural"}));
  bench->add_option("--report", report_path);
  bench->add_option("--max-steps", max_steps);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(master_seed, count, out_dir, noise, external);
    if (*verify) return cmd_verify(verify_paths);
    if (*run) return cmd_run(bundle_path, planner_kind, max_steps);
    if (*collect) return cmd_collect(bundles_dir, out_path, max_steps);
    if (*emit) return cmd_emit_sft(traj_path, ratio, n, out_path);
    if (*rollout) return cmd_rollout(bundles_dir, group_size, mode, beta, out_path, max_steps);
    if (*bench) return cmd_bench(suite_dir, agent, k, variant, report_path, max_steps);
  } catch (const TransportError& e) {
    std::cerr << "transport failure: " << e.what() << "\n";
    return 2;
  } catch (const ExternalGenerationError& e) {
    std::cerr << "transport failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
