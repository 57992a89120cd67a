#include "hlsgo/commands.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "hlsgo/agent.hpp"
#include "hlsgo/decompose.hpp"
#include "hlsgo/stats.hpp"

namespace hlsgo::commands {

namespace fs = std::filesystem;
using nlohmann::json;

int worker_count() {
  if (const char* env = std::getenv("HLSGO_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

void run_jobs(int job_count, const std::function<void(int)>& job) {
  const int workers = std::min(worker_count(), job_count);
  if (workers <= 1) {
    for (int i = 0; i < job_count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= job_count) return;
        job(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

pool::PoolConfig make_pool(const std::string& spec, int high_count) {
  if (spec.empty()) return pool::PoolConfig::default_pool();
  return pool::PoolConfig::parse(spec, high_count);
}

DecompositionResult decompose_instance(const ProblemInstance& instance,
                                       DecompositionMode mode) {
  if (mode == DecompositionMode::kGroundTruth) {
    return ground_truth_decompose(instance);
  }
  // Probe a scratch copy so detection cost is not charged to the episodes;
  // detection results are precomputed once per instance.
  ProblemInstance scratch = instance;
  scratch.reset_fe_count();
  const long long dim = scratch.effective_dim();
  const long long budget = 1 + dim + dim * (dim - 1) / 2 + 16;
  return differential_grouping_decompose(scratch, 10.0, 0.0, budget);
}

std::string sanitize_name(std::string name) {
  for (char& c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) c = '_';
  }
  return name;
}

}  // namespace

DecompositionMode decomposition_mode_from_name(const std::string& name) {
  if (name == "ground-truth") return DecompositionMode::kGroundTruth;
  if (name == "detected") return DecompositionMode::kDetected;
  throw ConfigError("unknown decomposition mode: " + name);
}

runner::PolicyMode parse_policy_mode(const std::string& mode, int* fixed_action) {
  *fixed_action = 0;
  if (mode == "learned") return runner::PolicyMode::kLearnedSample;
  if (mode == "greedy") return runner::PolicyMode::kLearnedGreedy;
  if (mode == "random") return runner::PolicyMode::kRandom;
  if (mode.rfind("fixed:", 0) == 0) {
    const int l = std::atoi(mode.c_str() + 6);
    if (l < 1) throw ConfigError("fixed policy index must be >= 1: " + mode);
    *fixed_action = l - 1;
    return runner::PolicyMode::kFixed;
  }
  throw ConfigError("unknown mode '" + mode + "' (learned|greedy|random|fixed:<l>)");
}

std::vector<std::string> cmd_gen(const GenOptions& options) {
  fs::create_directories(options.out_dir);
  std::vector<NamedConfig> configs;
  if (!options.preset.empty()) {
    if (options.preset != "appendix-b") {
      throw ConfigError("unknown preset: " + options.preset);
    }
    if (!options.dims.empty() || !options.functions.empty()) {
      throw ConfigError("a preset and explicit dims/functions are mutually exclusive");
    }
    configs = appendix_b_preset(options.seed, options.scale);
  } else {
    if (options.dims.empty() || options.functions.empty()) {
      throw ConfigError("gen requires either --preset or --dims and --functions");
    }
    InstanceConfig cfg;
    for (int d : options.dims) {
      cfg.subproblem_dims.push_back(std::max(1, d / options.scale));
    }
    for (int f : options.functions) cfg.function_map.push_back(bench::function_from_id(f));
    cfg.total_dim = 0;
    for (int d : cfg.subproblem_dims) cfg.total_dim += d;
    cfg.separability_degree = options.degree;
    cfg.weights = options.weights;
    cfg.seed = options.seed;
    configs.push_back({options.name, cfg});
  }

  std::vector<std::string> paths;
  for (const auto& named : configs) {
    ProblemInstance instance = build_instance(named.config);
    instance.set_name(named.name);
    const std::string doc = export_instance_json(instance);
    const fs::path path = fs::path(options.out_dir) / (sanitize_name(named.name) + ".json");
    {
      std::ofstream out(path, std::ios::binary);
      if (!out.good()) throw std::runtime_error("cannot write " + path.string());
      out << doc << "\n";
    }
    // checksum plus timestamp live in the sidecar so the document itself is
    // byte-stable across reruns
    json meta;
    char checksum[24];
    std::snprintf(checksum, sizeof(checksum), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(doc.data(), doc.size())));
    meta["checksum_fnv1a64"] = checksum;
    meta["generated_at"] = timestamp_utc();
    std::ofstream meta_out(path.string() + ".meta");
    meta_out << meta.dump(2) << "\n";
    paths.push_back(path.string());
  }
  return paths;
}

void write_trace(const std::string& path, const runner::EpisodeResult& result,
                 int pool_size) {
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write trace: " + path);
  out << "t,k,action,reward,fes,c_star";
  const int feature_count = 12 + 2 * pool_size;
  for (int f = 0; f < feature_count; ++f) out << ",f" << f;
  out << "\n";
  for (std::size_t t = 0; t < result.trajectory.size(); ++t) {
    const auto& tr = result.trajectory[t];
    out << t << ',' << tr.k << ',' << tr.action << ',' << fmt_double(tr.reward) << ','
        << tr.fes_after << ',' << fmt_double(tr.c_star_after);
    for (Eigen::Index f = 0; f < tr.state.size(); ++f) out << ',' << fmt_double(tr.state[f]);
    out << "\n";
  }
}

namespace {

struct RunJob {
  int instance_index;
  std::uint64_t seed;
  std::string policy_name;
  runner::Policy policy;
};

struct LoadedInstances {
  std::vector<ProblemInstance> instances;
  std::vector<DecompositionResult> decompositions;
};

LoadedInstances load_instances(const std::vector<std::string>& paths,
                               DecompositionMode mode) {
  if (paths.empty()) throw ConfigError("no instance documents given");
  LoadedInstances out;
  for (const auto& path : paths) {
    out.instances.push_back(load_instance(path));
    if (out.instances.back().name().empty()) {
      out.instances.back().set_name(fs::path(path).stem().string());
    }
    out.decompositions.push_back(decompose_instance(out.instances.back(), mode));
  }
  return out;
}

std::vector<report::ResultRow> execute_jobs(
    const LoadedInstances& loaded, const pool::PoolConfig& pool_cfg,
    const std::vector<RunJob>& jobs, const runner::EpisodeConfig& episode,
    const std::string& out_dir, bool write_traces,
    std::vector<std::pair<std::string, double>>* timings) {
  std::vector<report::ResultRow> rows(jobs.size());
  std::vector<std::pair<std::string, double>> local_timings(jobs.size());
  run_jobs(static_cast<int>(jobs.size()), [&](int i) {
    const RunJob& job = jobs[static_cast<std::size_t>(i)];
    const auto& instance = loaded.instances[static_cast<std::size_t>(job.instance_index)];
    const auto& decomposition =
        loaded.decompositions[static_cast<std::size_t>(job.instance_index)];
    const auto started = std::chrono::steady_clock::now();
    auto result = runner::run_episode(instance, decomposition, pool_cfg, job.policy,
                                      episode, job.seed);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (result.ledger.total() != result.fe_count) {
      throw std::logic_error("FE ledger mismatch on " + instance.name());
    }
    report::ResultRow row;
    row.instance = instance.name();
    row.algorithm = job.policy_name;
    row.seed = job.seed;
    row.final_cost = result.best_cost;
    row.fes = result.fe_count;
    rows[static_cast<std::size_t>(i)] = row;
    local_timings[static_cast<std::size_t>(i)] = {
        instance.name() + "," + job.policy_name + "," + std::to_string(job.seed), seconds};
    if (write_traces) {
      const std::string trace_name = "trace_" + sanitize_name(instance.name()) + "_" +
                                     sanitize_name(job.policy_name) + "_s" +
                                     std::to_string(job.seed) + ".csv";
      write_trace((fs::path(out_dir) / trace_name).string(), result, pool_cfg.size());
    }
  });
  if (timings) *timings = std::move(local_timings);
  return rows;
}

void write_timings(const std::string& path,
                   const std::vector<std::pair<std::string, double>>& timings) {
  std::ofstream out(path);
  out << "instance,algorithm,seed,seconds\n";
  for (const auto& [key, seconds] : timings) {
    out << key << ',' << fmt_double(seconds) << '\n';
  }
}

}  // namespace

std::vector<report::ResultRow> cmd_run(const RunOptions& options) {
  options.episode.validate();
  fs::create_directories(options.out_dir);
  auto pool_cfg = make_pool(options.pool_spec, options.pool_high_count);
  auto loaded = load_instances(options.instance_paths, options.decomposition);

  std::set<std::uint64_t> distinct(options.seeds.begin(), options.seeds.end());
  if (distinct.size() != options.seeds.size()) {
    throw ConfigError("run: seeds must be distinct");
  }

  int fixed_action = 0;
  const auto mode = parse_policy_mode(options.mode, &fixed_action);
  std::optional<agent::AgentParameters> params;
  if (mode == runner::PolicyMode::kLearnedSample ||
      mode == runner::PolicyMode::kLearnedGreedy) {
    if (options.checkpoint.empty()) {
      throw agent::CheckpointError("mode '" + options.mode + "' requires --checkpoint");
    }
    params = agent::load_checkpoint(options.checkpoint, pool_cfg.size());
  }
  runner::Policy policy;
  policy.mode = mode;
  policy.fixed_action = fixed_action;
  policy.params = params ? &*params : nullptr;

  std::vector<RunJob> jobs;
  for (int i = 0; i < static_cast<int>(loaded.instances.size()); ++i) {
    for (std::uint64_t seed : options.seeds) {
      jobs.push_back({i, seed, options.mode, policy});
    }
  }
  std::vector<std::pair<std::string, double>> timings;
  auto rows = execute_jobs(loaded, pool_cfg, jobs, options.episode, options.out_dir,
                           options.write_traces, &timings);
  report::write_result_table((fs::path(options.out_dir) / "results.csv").string(), rows);
  write_timings((fs::path(options.out_dir) / "timings.csv").string(), timings);
  return rows;
}

std::string cmd_train(const TrainOptions& options) {
  options.train.validate();
  fs::create_directories(options.out_dir);
  auto pool_cfg = make_pool(options.pool_spec, options.pool_high_count);
  auto loaded = load_instances(options.instance_paths, options.decomposition);

  agent::AgentParameters params =
      options.init_checkpoint.empty()
          ? agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count,
                                         derive_seed(options.seed, "agent"))
          : agent::load_checkpoint(options.init_checkpoint, pool_cfg.size());

  auto result = runner::train(loaded.instances, loaded.decompositions, pool_cfg,
                              std::move(params), options.train, options.seed);

  const std::string checkpoint_path =
      (fs::path(options.out_dir) / "checkpoint.bin").string();
  agent::save_checkpoint(result.params, checkpoint_path);

  std::ofstream log((fs::path(options.out_dir) / "train_log.csv").string());
  log << "iteration,transitions,k_epochs,mean_reward,policy_loss,value_loss,"
         "entropy,grad_norm,learning_rate,episodes_completed,mean_episode_best_log10,"
         "lr_halved\n";
  for (const auto& e : result.log) {
    log << e.iteration << ',' << e.transitions << ',' << e.k_epochs << ','
        << fmt_double(e.mean_reward) << ',' << fmt_double(e.policy_loss) << ','
        << fmt_double(e.value_loss) << ',' << fmt_double(e.entropy) << ','
        << fmt_double(e.grad_norm) << ',' << fmt_double(e.learning_rate) << ','
        << e.episodes_completed << ',' << fmt_double(e.mean_episode_best) << ','
        << (e.lr_halved ? 1 : 0) << '\n';
  }
  return checkpoint_path;
}

report::Aggregate cmd_ablate(const AblateOptions& options) {
  options.episode.validate();
  fs::create_directories(options.out_dir);
  auto pool_cfg = make_pool(options.pool_spec, options.pool_high_count);
  auto loaded = load_instances(options.instance_paths, options.decomposition);

  if (options.checkpoint.empty()) {
    throw agent::CheckpointError("ablate requires --checkpoint for the learned column");
  }
  auto params = agent::load_checkpoint(options.checkpoint, pool_cfg.size());

  std::vector<std::pair<std::string, runner::Policy>> policies;
  policies.emplace_back("learned",
                        runner::Policy{runner::PolicyMode::kLearnedSample, 0, &params});
  policies.emplace_back("random", runner::Policy{runner::PolicyMode::kRandom, 0, nullptr});
  for (int l = 0; l < pool_cfg.size(); ++l) {
    policies.emplace_back("fixed_" + std::to_string(l + 1),
                          runner::Policy{runner::PolicyMode::kFixed, l, nullptr});
  }

  std::vector<RunJob> jobs;
  for (int i = 0; i < static_cast<int>(loaded.instances.size()); ++i) {
    for (std::uint64_t seed : options.seeds) {
      for (const auto& [name, policy] : policies) {
        jobs.push_back({i, seed, name, policy});
      }
    }
  }
  std::vector<std::pair<std::string, double>> timings;
  auto rows = execute_jobs(loaded, pool_cfg, jobs, options.episode, options.out_dir,
                           /*write_traces=*/false, &timings);
  report::write_result_table(
      (fs::path(options.out_dir) / "ablation_results.csv").string(), rows);
  write_timings((fs::path(options.out_dir) / "timings.csv").string(), timings);

  auto aggregate = report::aggregate_results(rows, "learned", options.alpha);
  report::write_aggregate(
      (fs::path(options.out_dir) / "ablation_summary.csv").string(), aggregate);
  return aggregate;
}

report::Aggregate cmd_report(const ReportOptions& options) {
  fs::create_directories(options.out_dir);
  std::vector<report::ResultRow> rows;
  for (const auto& table : options.result_tables) {
    auto part = report::read_result_table(table);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw ConfigError("report: no result rows found");
  auto aggregate = report::aggregate_results(rows, options.reference, options.alpha);
  report::write_aggregate((fs::path(options.out_dir) / "aggregate.csv").string(),
                          aggregate);
  for (const auto& trace : options.traces) {
    const std::string curve_name = "curve_" + fs::path(trace).stem().string() + ".csv";
    report::write_curve_from_trace(trace,
                                   (fs::path(options.out_dir) / curve_name).string());
  }
  return aggregate;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open manifest: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest: invalid JSON: ") + e.what());
  }
  Manifest manifest;
  if (doc.contains("experiment")) manifest.experiment = doc["experiment"].get<std::string>();
  if (!doc.contains("instances") || !doc["instances"].is_array() ||
      doc["instances"].empty()) {
    throw ParseError("manifest: field 'instances' must be a non-empty array");
  }
  for (const auto& entry : doc["instances"]) {
    manifest.instance_paths.push_back(entry.get<std::string>());
    if (!fs::exists(manifest.instance_paths.back())) {
      throw ParseError("manifest: instance path not resolvable: " +
                       manifest.instance_paths.back());
    }
  }
  if (doc.contains("decomposition")) {
    manifest.decomposition =
        decomposition_mode_from_name(doc["decomposition"].get<std::string>());
  }
  if (doc.contains("pool")) {
    manifest.pool_spec = doc["pool"].value("kinds", std::string());
    manifest.pool_high_count = doc["pool"].value("high_count", 2);
  }
  if (doc.contains("checkpoint")) manifest.checkpoint = doc["checkpoint"].get<std::string>();
  if (doc.contains("episode")) {
    const auto& e = doc["episode"];
    manifest.episode.max_fes = e.value("max_fes", manifest.episode.max_fes);
    manifest.episode.step_fes = e.value("step_fes", manifest.episode.step_fes);
    manifest.episode.target_cost = e.value("target_cost", manifest.episode.target_cost);
    manifest.episode.init_pop_size = e.value("init_pop_size", manifest.episode.init_pop_size);
    manifest.episode.probe_samples = e.value("probe_samples", manifest.episode.probe_samples);
  }
  manifest.train.episode = manifest.episode;
  if (doc.contains("train")) {
    const auto& t = doc["train"];
    manifest.train.n_step = t.value("n_step", manifest.train.n_step);
    manifest.train.k_epoch = t.value("k_epoch", manifest.train.k_epoch);
    manifest.train.learning_rate = t.value("learning_rate", manifest.train.learning_rate);
    manifest.train.lr_decay = t.value("lr_decay", manifest.train.lr_decay);
    manifest.train.clip_epsilon = t.value("clip_epsilon", manifest.train.clip_epsilon);
    manifest.train.value_coef = t.value("value_coef", manifest.train.value_coef);
    manifest.train.entropy_coef = t.value("entropy_coef", manifest.train.entropy_coef);
    manifest.train.gae_lambda = t.value("gae_lambda", manifest.train.gae_lambda);
    manifest.train.grad_norm_clip = t.value("grad_norm_clip", manifest.train.grad_norm_clip);
    manifest.train.gamma = t.value("gamma", manifest.train.gamma);
    manifest.train.num_envs = t.value("num_envs", manifest.train.num_envs);
    manifest.train.iterations = t.value("iterations", manifest.train.iterations);
  }
  if (doc.contains("seeds")) {
    for (const auto& s : doc["seeds"]) manifest.seeds.push_back(s.get<std::uint64_t>());
    std::set<std::uint64_t> distinct(manifest.seeds.begin(), manifest.seeds.end());
    if (distinct.size() != manifest.seeds.size()) {
      throw ParseError("manifest: seeds must be distinct");
    }
  }
  if (doc.contains("mode")) manifest.mode = doc["mode"].get<std::string>();
  if (doc.contains("out_dir")) manifest.out_dir = doc["out_dir"].get<std::string>();
  return manifest;
}

}  // namespace hlsgo::commands
