#pragma once

#include "tsdbg/isa.hpp"
#include "tsdbg/records.hpp"

#include <string>
#include <vector>

namespace tsdbg {

struct BenchEntry {
  std::string name;
  /// Assembly or image path, relative to the suite file.
  std::string program;
  std::vector<Value> input;
  int runs = 7;
};

struct BenchResult {
  std::string name;
  int runs = 0;
  double seconds_original = 0;
  double seconds_instrumented = 0;
  double ratio = 0;
  /// Final ts of the instrumented run.
  std::uint64_t increments = 0;
  std::uint64_t instructions_original = 0;
  std::uint64_t instructions_instrumented = 0;
  std::size_t size_original = 0;
  std::size_t size_instrumented = 0;
  double size_ratio = 0;
};

/// Parses a suite file:
///
///   [[benchmark]]
///   name = "empty-loop"
///   program = "empty_loop.tsasm"
///   input = [1000000]      # or input_file = "tape.txt"
///   runs = 7
///
/// Paths are resolved against the suite's directory.
std::vector<BenchEntry> load_suite(const std::string &path);

/// Mean after dropping the best and the worst sample; a plain mean for
/// fewer than three samples.
double trimmed_mean(std::vector<double> samples);

BenchResult run_bench(const BenchEntry &entry);

std::string render_table(const std::vector<BenchResult> &results);
Json to_json(const BenchResult &result);

} // namespace tsdbg
