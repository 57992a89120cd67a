#include "hlsgo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hlsgo/stats.hpp"

namespace hlsgo::report {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void write_result_table(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write result table: " + path);
  out << "instance,algorithm,seed,final_cost,fes\n";
  for (const auto& row : rows) {
    out << row.instance << ',' << row.algorithm << ',' << row.seed << ','
        << fmt_double(row.final_cost) << ',' << row.fes << '\n';
  }
}

std::vector<ResultRow> read_result_table(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open result table: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "instance,algorithm,seed,final_cost,fes") {
    throw std::runtime_error("result table header mismatch: " + path);
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 5) throw std::runtime_error("malformed result row: " + line);
    ResultRow row;
    row.instance = fields[0];
    row.algorithm = fields[1];
    row.seed = std::stoull(fields[2]);
    row.final_cost = std::stod(fields[3]);
    row.fes = std::stoll(fields[4]);
    rows.push_back(std::move(row));
  }
  return rows;
}

Aggregate aggregate_results(const std::vector<ResultRow>& rows,
                            const std::string& reference_algorithm, double alpha) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no result rows");
  Aggregate agg;
  std::map<std::pair<std::string, std::string>, std::vector<double>> samples;
  for (const auto& row : rows) {
    if (std::find(agg.instances.begin(), agg.instances.end(), row.instance) ==
        agg.instances.end()) {
      agg.instances.push_back(row.instance);
    }
    if (std::find(agg.algorithms.begin(), agg.algorithms.end(), row.algorithm) ==
        agg.algorithms.end()) {
      agg.algorithms.push_back(row.algorithm);
    }
    samples[{row.instance, row.algorithm}].push_back(row.final_cost);
  }
  auto ref_it = std::find(agg.algorithms.begin(), agg.algorithms.end(),
                          reference_algorithm);
  if (ref_it == agg.algorithms.end()) {
    throw std::invalid_argument("aggregate: reference algorithm '" +
                                reference_algorithm + "' not present");
  }
  std::rotate(agg.algorithms.begin(), ref_it, ref_it + 1);

  for (const auto& instance : agg.instances) {
    auto ref_samples_it = samples.find({instance, reference_algorithm});
    for (const auto& algorithm : agg.algorithms) {
      auto it = samples.find({instance, algorithm});
      if (it == samples.end()) continue;
      AggregateCell cell;
      cell.mean = stats::mean(it->second);
      cell.stddev = stats::stddev(it->second);
      cell.median = stats::median(it->second);
      cell.n = static_cast<int>(it->second.size());
      if (algorithm != reference_algorithm && ref_samples_it != samples.end()) {
        cell.mark = stats::significance_mark(it->second, ref_samples_it->second, alpha);
        if (cell.mark == "+") agg.wins[algorithm]++;
        else if (cell.mark == "-") agg.losses[algorithm]++;
        else agg.ties[algorithm]++;

        const double ref_mean = std::max(stats::mean(ref_samples_it->second), 1e-20);
        const double alg_mean = std::max(cell.mean, 1e-20);
        agg.delta_sum_log10[algorithm] += std::log10(ref_mean) - std::log10(alg_mean);
      }
      agg.cells[{instance, algorithm}] = std::move(cell);
    }
  }
  return agg;
}

void write_aggregate(const std::string& path, const Aggregate& agg) {
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write aggregate: " + path);
  out << "instance,algorithm,mean,stddev,median,n,mark\n";
  for (const auto& instance : agg.instances) {
    for (const auto& algorithm : agg.algorithms) {
      auto it = agg.cells.find({instance, algorithm});
      if (it == agg.cells.end()) continue;
      const auto& cell = it->second;
      out << instance << ',' << algorithm << ',' << fmt_double(cell.mean) << ','
          << fmt_double(cell.stddev) << ',' << fmt_double(cell.median) << ','
          << cell.n << ',' << cell.mark << '\n';
    }
  }
  out << '\n';
  out << "algorithm,wins,ties,losses,delta_sum_log10\n";
  for (const auto& algorithm : agg.algorithms) {
    if (algorithm == agg.algorithms.front()) continue;
    auto get = [&](const std::map<std::string, int>& m) {
      auto it = m.find(algorithm);
      return it == m.end() ? 0 : it->second;
    };
    double delta = 0.0;
    if (auto it = agg.delta_sum_log10.find(algorithm); it != agg.delta_sum_log10.end()) {
      delta = it->second;
    }
    out << algorithm << ',' << get(agg.wins) << ',' << get(agg.ties) << ','
        << get(agg.losses) << ',' << fmt_double(delta) << '\n';
  }
}

void write_curve_from_trace(const std::string& trace_path, const std::string& out_path) {
  std::ifstream in(trace_path);
  if (!in.good()) throw std::runtime_error("cannot open trace: " + trace_path);
  std::ofstream out(out_path);
  if (!out.good()) throw std::runtime_error("cannot write curve: " + out_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace: " + trace_path);
  auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::runtime_error("trace missing column '" + name + "': " + trace_path);
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t t_col = col("t");
  const std::size_t fes_col = col("fes");
  const std::size_t cost_col = col("c_star");
  out << "step,fes,cost\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv(line);
    out << fields[t_col] << ',' << fields[fes_col] << ',' << fields[cost_col] << '\n';
  }
}

}  // namespace hlsgo::report
