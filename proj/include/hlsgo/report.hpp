#ifndef HLSGO_REPORT_HPP
#define HLSGO_REPORT_HPP

#include <map>
#include <string>
#include <vector>

namespace hlsgo::report {

// One completed run (instance x algorithm x seed).
struct ResultRow {
  std::string instance;
  std::string algorithm;
  std::uint64_t seed = 0;
  double final_cost = 0.0;
  long long fes = 0;
};

void write_result_table(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_result_table(const std::string& path);

struct AggregateCell {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  int n = 0;
  std::string mark;  // vs the reference algorithm; empty for the reference
};

struct Aggregate {
  std::vector<std::string> instances;   // deterministic order of appearance
  std::vector<std::string> algorithms;  // reference first
  std::map<std::pair<std::string, std::string>, AggregateCell> cells;
  std::map<std::string, int> wins, ties, losses;       // per algorithm
  std::map<std::string, double> delta_sum_log10;       // vs reference
};

// Mean/std/median per (instance, algorithm), rank-sum marks against the
// reference algorithm, win/tie/loss counts, and the summed order-of-magnitude
// gap (log10 of the reference mean minus log10 of the algorithm mean).
Aggregate aggregate_results(const std::vector<ResultRow>& rows,
                            const std::string& reference_algorithm,
                            double alpha = 0.05);

void write_aggregate(const std::string& path, const Aggregate& aggregate);

// Convergence curve extraction: (step, fes, best cost) series from a run
// trace file, written as plot-ready delimited text.
void write_curve_from_trace(const std::string& trace_path,
                            const std::string& out_path);

}  // namespace hlsgo::report

#endif  // HLSGO_REPORT_HPP
