#include <CLI11.hpp>
#include <iostream>

#include "hlsgo/agent.hpp"
#include "hlsgo/commands.hpp"

using namespace hlsgo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitRuntime = 4;

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    std::string token =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!token.empty()) seeds.push_back(std::stoull(token));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

void add_episode_flags(CLI::App* cmd, runner::EpisodeConfig* episode) {
  cmd->add_option("--max-fes", episode->max_fes, "evaluation budget per episode");
  cmd->add_option("--step-fes", episode->step_fes, "evaluations per decision step");
  cmd->add_option("--target-cost", episode->target_cost, "stop below this cost");
  cmd->add_option("--init-pop", episode->init_pop_size, "initial global sample size");
  cmd->add_option("--probe-samples", episode->probe_samples,
                  "population probes per decision");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Workbench for heterogeneous large-scale global optimization: instance "
      "generation, a learning-based cooperative-coevolution solver, and "
      "reporting. Set HLSGO_WORKERS to bound the worker threads."};
  app.require_subcommand(1);

  // gen ----------------------------------------------------------------
  commands::GenOptions gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate problem instance documents");
  cmd_gen->add_option("--preset", gen.preset, "named preset (appendix-b)");
  cmd_gen->add_option("--dims", gen.dims, "subproblem dimensions")->delimiter(',');
  cmd_gen->add_option("--functions", gen.functions, "basic function ids (1..7)")->delimiter(',');
  cmd_gen->add_option("--degree", gen.degree, "separability degree 1..5");
  cmd_gen->add_option("--weights", gen.weights, "explicit subproblem weights")->delimiter(',');
  cmd_gen->add_option("--seed", gen.seed, "generation seed");
  cmd_gen->add_option("--scale", gen.scale, "divide every dimension by this");
  cmd_gen->add_option("--out", gen.out_dir, "output directory");
  cmd_gen->add_option("--name", gen.name, "document name for explicit configs");

  // train --------------------------------------------------------------
  commands::TrainOptions train;
  std::string train_manifest;
  std::string train_decomposition = "ground-truth";
  auto* cmd_train = app.add_subcommand("train", "train the optimizer-selection agent");
  cmd_train->add_option("--manifest", train_manifest, "experiment manifest (overrides flags)");
  cmd_train->add_option("--instances", train.instance_paths, "instance documents")->delimiter(',');
  cmd_train->add_option("--seed", train.seed, "training seed");
  cmd_train->add_option("--out", train.out_dir, "output directory");
  cmd_train->add_option("--pool", train.pool_spec, "optimizer pool, high tier first");
  cmd_train->add_option("--high-count", train.pool_high_count, "high-tier size");
  cmd_train->add_option("--iterations", train.train.iterations, "training iterations");
  cmd_train->add_option("--envs", train.train.num_envs, "parallel environments");
  cmd_train->add_option("--n-step", train.train.n_step, "transitions per env per iteration");
  cmd_train->add_option("--k-epoch", train.train.k_epoch, "optimization epochs per batch");
  cmd_train->add_option("--lr", train.train.learning_rate, "learning rate");
  cmd_train->add_option("--lr-decay", train.train.lr_decay, "per-iteration decay factor");
  cmd_train->add_option("--gamma", train.train.gamma, "discount factor");
  cmd_train->add_option("--gae-lambda", train.train.gae_lambda, "advantage estimator lambda");
  cmd_train->add_option("--clip", train.train.clip_epsilon, "surrogate clip epsilon");
  cmd_train->add_option("--entropy-coef", train.train.entropy_coef, "entropy bonus weight");
  cmd_train->add_option("--value-coef", train.train.value_coef, "value loss weight");
  cmd_train->add_option("--decomposition", train_decomposition, "ground-truth|detected");
  cmd_train->add_option("--init-checkpoint", train.init_checkpoint, "resume from checkpoint");
  add_episode_flags(cmd_train, &train.train.episode);

  // run ----------------------------------------------------------------
  commands::RunOptions run;
  std::string run_manifest;
  std::string run_seeds = "1";
  std::string run_decomposition = "ground-truth";
  auto* cmd_run = app.add_subcommand("run", "solve instances and emit results + traces");
  cmd_run->add_option("--manifest", run_manifest, "experiment manifest (overrides flags)");
  cmd_run->add_option("--instances", run.instance_paths, "instance documents")->delimiter(',');
  cmd_run->add_option("--checkpoint", run.checkpoint, "agent checkpoint");
  cmd_run->add_option("--mode", run.mode, "learned|greedy|random|fixed:<l>");
  cmd_run->add_option("--seeds", run_seeds, "comma-separated run seeds");
  cmd_run->add_option("--out", run.out_dir, "output directory");
  cmd_run->add_option("--pool", run.pool_spec, "optimizer pool, high tier first");
  cmd_run->add_option("--high-count", run.pool_high_count, "high-tier size");
  cmd_run->add_option("--decomposition", run_decomposition, "ground-truth|detected");
  cmd_run->add_flag("--no-traces", [&run](std::int64_t) { run.write_traces = false; },
                    "skip per-run trace files");
  add_episode_flags(cmd_run, &run.episode);

  // ablate ---------------------------------------------------------------
  commands::AblateOptions ablate;
  std::string ablate_manifest;
  std::string ablate_seeds = "1";
  std::string ablate_decomposition = "ground-truth";
  auto* cmd_ablate = app.add_subcommand(
      "ablate", "compare learned vs random and fixed selection policies");
  cmd_ablate->add_option("--manifest", ablate_manifest, "experiment manifest");
  cmd_ablate->add_option("--instances", ablate.instance_paths, "instance documents")->delimiter(',');
  cmd_ablate->add_option("--checkpoint", ablate.checkpoint, "agent checkpoint");
  cmd_ablate->add_option("--seeds", ablate_seeds, "comma-separated run seeds");
  cmd_ablate->add_option("--out", ablate.out_dir, "output directory");
  cmd_ablate->add_option("--pool", ablate.pool_spec, "optimizer pool, high tier first");
  cmd_ablate->add_option("--high-count", ablate.pool_high_count, "high-tier size");
  cmd_ablate->add_option("--alpha", ablate.alpha, "rank-sum significance level");
  cmd_ablate->add_option("--decomposition", ablate_decomposition, "ground-truth|detected");
  add_episode_flags(cmd_ablate, &ablate.episode);

  // report ---------------------------------------------------------------
  commands::ReportOptions rep;
  auto* cmd_report = app.add_subcommand("report", "aggregate result tables and curves");
  cmd_report->add_option("--results", rep.result_tables, "result table files")->required()->delimiter(',');
  cmd_report->add_option("--traces", rep.traces, "trace files for convergence curves")->delimiter(',');
  cmd_report->add_option("--reference", rep.reference, "reference algorithm column");
  cmd_report->add_option("--alpha", rep.alpha, "rank-sum significance level");
  cmd_report->add_option("--out", rep.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (cmd_gen->parsed()) {
      auto paths = commands::cmd_gen(gen);
      for (const auto& p : paths) std::cout << p << "\n";
      std::cout << paths.size() << " instance document(s) written\n";
    } else if (cmd_train->parsed()) {
      if (!train_manifest.empty()) {
        auto m = commands::load_manifest(train_manifest);
        train.instance_paths = m.instance_paths;
        train.train = m.train;
        train.pool_spec = m.pool_spec;
        train.pool_high_count = m.pool_high_count;
        train.decomposition = m.decomposition;
        train.out_dir = m.out_dir;
        if (!m.seeds.empty()) train.seed = m.seeds.front();
        train.init_checkpoint = m.checkpoint;
      } else {
        train.decomposition = commands::decomposition_mode_from_name(train_decomposition);
      }
      std::cout << "checkpoint written: " << commands::cmd_train(train) << "\n";
    } else if (cmd_run->parsed()) {
      if (!run_manifest.empty()) {
        auto m = commands::load_manifest(run_manifest);
        run.instance_paths = m.instance_paths;
        run.checkpoint = m.checkpoint;
        run.mode = m.mode;
        run.episode = m.episode;
        run.pool_spec = m.pool_spec;
        run.pool_high_count = m.pool_high_count;
        run.decomposition = m.decomposition;
        run.out_dir = m.out_dir;
        if (!m.seeds.empty()) run.seeds = m.seeds;
      } else {
        run.seeds = parse_seeds(run_seeds);
        run.decomposition = commands::decomposition_mode_from_name(run_decomposition);
      }
      auto rows = commands::cmd_run(run);
      std::cout << rows.size() << " run(s) completed; results in " << run.out_dir << "\n";
    } else if (cmd_ablate->parsed()) {
      if (!ablate_manifest.empty()) {
        auto m = commands::load_manifest(ablate_manifest);
        ablate.instance_paths = m.instance_paths;
        ablate.checkpoint = m.checkpoint;
        ablate.episode = m.episode;
        ablate.pool_spec = m.pool_spec;
        ablate.pool_high_count = m.pool_high_count;
        ablate.decomposition = m.decomposition;
        ablate.out_dir = m.out_dir;
        if (!m.seeds.empty()) ablate.seeds = m.seeds;
      } else {
        ablate.seeds = parse_seeds(ablate_seeds);
        ablate.decomposition = commands::decomposition_mode_from_name(ablate_decomposition);
      }
      auto aggregate = commands::cmd_ablate(ablate);
      std::cout << "ablation over " << aggregate.instances.size() << " instance(s), "
                << aggregate.algorithms.size() << " polic(ies); summary in "
                << ablate.out_dir << "\n";
    } else if (cmd_report->parsed()) {
      auto aggregate = commands::cmd_report(rep);
      std::cout << "aggregated " << aggregate.instances.size() << " instance(s) into "
                << rep.out_dir << "\n";
    }
  } catch (const agent::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
