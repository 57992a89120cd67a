#ifndef HLSGO_COMMANDS_HPP
#define HLSGO_COMMANDS_HPP

#include <optional>
#include <string>
#include <vector>

#include "hlsgo/report.hpp"
#include "hlsgo/runner.hpp"

namespace hlsgo::commands {

// Worker count for parallel runs; HLSGO_WORKERS overrides.
int worker_count();

struct GenOptions {
  std::string preset;          // "appendix-b" or empty for explicit configs
  std::vector<int> dims;
  std::vector<int> functions;
  int degree = 1;
  std::vector<double> weights;
  std::uint64_t seed = 1;
  int scale = 1;
  std::string out_dir = ".";
  std::string name = "instance";
};

// Writes instance documents plus checksum sidecars; returns the paths.
std::vector<std::string> cmd_gen(const GenOptions& options);

enum class DecompositionMode { kGroundTruth, kDetected };
DecompositionMode decomposition_mode_from_name(const std::string& name);

struct RunOptions {
  std::vector<std::string> instance_paths;
  std::string checkpoint;       // required for learned/greedy modes
  std::string mode = "learned"; // learned | greedy | random | fixed:<l>
  std::vector<std::uint64_t> seeds{1};
  runner::EpisodeConfig episode;
  std::string pool_spec;        // empty = default pool
  int pool_high_count = 2;
  DecompositionMode decomposition = DecompositionMode::kGroundTruth;
  std::string out_dir = "out";
  bool write_traces = true;
};

std::vector<report::ResultRow> cmd_run(const RunOptions& options);

struct TrainOptions {
  std::vector<std::string> instance_paths;
  runner::TrainConfig train;
  std::string pool_spec;
  int pool_high_count = 2;
  DecompositionMode decomposition = DecompositionMode::kGroundTruth;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string init_checkpoint;  // optional warm start
};

std::string cmd_train(const TrainOptions& options);  // returns checkpoint path

struct AblateOptions {
  std::vector<std::string> instance_paths;
  std::string checkpoint;
  std::vector<std::uint64_t> seeds{1};
  runner::EpisodeConfig episode;
  std::string pool_spec;
  int pool_high_count = 2;
  DecompositionMode decomposition = DecompositionMode::kGroundTruth;
  std::string out_dir = "out";
  double alpha = 0.05;
};

// learned / random / fixed_1..L columns with rank-sum marks against learned.
report::Aggregate cmd_ablate(const AblateOptions& options);

struct ReportOptions {
  std::vector<std::string> result_tables;
  std::vector<std::string> traces;
  std::string reference = "learned";
  double alpha = 0.05;
  std::string out_dir = "out";
};

report::Aggregate cmd_report(const ReportOptions& options);

// Experiment manifest: one JSON document driving train/run/ablate.
struct Manifest {
  std::string experiment;
  std::vector<std::string> instance_paths;
  DecompositionMode decomposition = DecompositionMode::kGroundTruth;
  std::string pool_spec;
  int pool_high_count = 2;
  std::string checkpoint;
  runner::EpisodeConfig episode;
  runner::TrainConfig train;
  std::vector<std::uint64_t> seeds;
  std::string mode = "learned";
  std::string out_dir = "out";
};

Manifest load_manifest(const std::string& path);

// Policy string parsing ("fixed:<l>" is 1-based).
runner::PolicyMode parse_policy_mode(const std::string& mode, int* fixed_action);

void write_trace(const std::string& path, const runner::EpisodeResult& result,
                 int pool_size);

}  // namespace hlsgo::commands

#endif  // HLSGO_COMMANDS_HPP
