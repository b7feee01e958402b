#include "tsdbg/bench.hpp"

#include "tsdbg/error.hpp"
#include "tsdbg/image.hpp"
#include "tsdbg/instrument.hpp"
#include "tsdbg/vm.hpp"

#include <toml.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

namespace tsdbg {

namespace fs = std::filesystem;

std::vector<BenchEntry> load_suite(const std::string &path) {
  toml::table suite;
  try {
    suite = toml::parse_file(path);
  } catch (const toml::parse_error &e) {
    throw Error(ErrorCode::BadArguments, "bad suite file '" + path + "': " +
                                             std::string(e.description()));
  }
  const auto base = fs::path(path).parent_path();
  auto *list = suite["benchmark"].as_array();
  if (!list)
    throw Error(ErrorCode::BadArguments, "suite '" + path + "' has no [[benchmark]] entries");

  std::vector<BenchEntry> out;
  for (auto &node : *list) {
    auto *t = node.as_table();
    if (!t)
      throw Error(ErrorCode::BadArguments, "[[benchmark]] entries must be tables");
    BenchEntry e;
    auto name = (*t)["name"].value<std::string>();
    auto program = (*t)["program"].value<std::string>();
    if (!name || !program)
      throw Error(ErrorCode::BadArguments, "every benchmark needs 'name' and 'program'");
    e.name = *name;
    e.program = (base / *program).string();
    e.runs = static_cast<int>((*t)["runs"].value_or<std::int64_t>(7));
    if (e.runs < 1)
      throw Error(ErrorCode::BadArguments, "'runs' must be positive in '" + e.name + "'");
    if (auto *input = (*t)["input"].as_array()) {
      for (auto &v : *input) {
        auto x = v.value<std::int64_t>();
        if (!x)
          throw Error(ErrorCode::BadArguments, "'input' must hold integers in '" + e.name + "'");
        e.input.push_back(*x);
      }
    } else if (auto file = (*t)["input_file"].value<std::string>()) {
      std::ifstream in(base / *file);
      if (!in)
        throw Error(ErrorCode::Io, "cannot open input '" + *file + "'");
      e.input = parse_tape(in);
    }
    out.push_back(std::move(e));
  }
  return out;
}

double trimmed_mean(std::vector<double> samples) {
  if (samples.empty())
    return 0;
  std::sort(samples.begin(), samples.end());
  auto first = samples.begin();
  auto last = samples.end();
  if (samples.size() >= 3) {
    ++first;
    --last;
  }
  return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

namespace {

struct Timed {
  double seconds = 0;
  MachineState state;
};

Timed timed_run(const std::shared_ptr<const Program> &program, const std::vector<Value> &input) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = run(program, input);
  auto t1 = std::chrono::steady_clock::now();
  if (r.budget_exhausted)
    throw Error(ErrorCode::BudgetExhausted, "benchmark did not finish within the step budget");
  return {std::chrono::duration<double>(t1 - t0).count(), std::move(r.state)};
}

} // namespace

BenchResult run_bench(const BenchEntry &entry) {
  auto original = std::make_shared<const Program>(load_program(entry.program));
  if (has_timestamps(*original))
    throw Error(ErrorCode::AlreadyInstrumented,
                "benchmark '" + entry.name + "' must be an uninstrumented program");
  auto inst = instrument(*original);
  auto instrumented = std::make_shared<const Program>(std::move(inst.program));

  BenchResult r;
  r.name = entry.name;
  r.runs = entry.runs;
  std::vector<double> t_orig, t_inst;
  for (int i = 0; i < entry.runs; ++i) {
    auto a = timed_run(original, entry.input);
    auto b = timed_run(instrumented, entry.input);
    t_orig.push_back(a.seconds);
    t_inst.push_back(b.seconds);
    r.instructions_original = a.state.executed;
    r.instructions_instrumented = b.state.executed;
    r.increments = b.state.tsstate.ts;
  }
  r.seconds_original = trimmed_mean(t_orig);
  r.seconds_instrumented = trimmed_mean(t_inst);
  r.ratio = r.seconds_original > 0 ? r.seconds_instrumented / r.seconds_original : 0;
  r.size_original = serialize(*original).size();
  r.size_instrumented = serialize(*instrumented).size();
  r.size_ratio = static_cast<double>(r.size_instrumented) / static_cast<double>(r.size_original);
  return r;
}

std::string render_table(const std::vector<BenchResult> &results) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-16s %4s %11s %11s %6s %12s %12s %12s %7s %7s %6s\n", "name",
                "runs", "orig(s)", "inst(s)", "ratio", "increments", "insns-orig", "insns-inst",
                "size", "size'", "ratio");
  out += buf;
  for (const auto &r : results) {
    std::snprintf(buf, sizeof buf,
                  "%-16s %4d %11.6f %11.6f %6.2f %12llu %12llu %12llu %7zu %7zu %6.3f\n",
                  r.name.c_str(), r.runs, r.seconds_original, r.seconds_instrumented, r.ratio,
                  static_cast<unsigned long long>(r.increments),
                  static_cast<unsigned long long>(r.instructions_original),
                  static_cast<unsigned long long>(r.instructions_instrumented), r.size_original,
                  r.size_instrumented, r.size_ratio);
    out += buf;
  }
  return out;
}

Json to_json(const BenchResult &r) {
  return Json{{"name", r.name},
              {"runs", r.runs},
              {"seconds_original", r.seconds_original},
              {"seconds_instrumented", r.seconds_instrumented},
              {"ratio", r.ratio},
              {"increments", r.increments},
              {"instructions_original", r.instructions_original},
              {"instructions_instrumented", r.instructions_instrumented},
              {"size_original", r.size_original},
              {"size_instrumented", r.size_instrumented},
              {"size_ratio", r.size_ratio}};
}

} // namespace tsdbg
