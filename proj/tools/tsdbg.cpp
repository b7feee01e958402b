// tsdbg: assembler, instrumenter, runner, debugger and protocol server.

#include "tsdbg/assembler.hpp"
#include "tsdbg/bench.hpp"
#include "tsdbg/error.hpp"
#include "tsdbg/image.hpp"
#include "tsdbg/instrument.hpp"
#include "tsdbg/protocol.hpp"
#include "tsdbg/records.hpp"
#include "tsdbg/repl.hpp"

#include <CLI11.hpp>

#include <unistd.h>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace {

enum Exit { kOk = 0, kUsage = 1, kGuestFault = 2, kInternal = 3 };

using namespace tsdbg;

std::vector<Value> read_input(const std::string &path) {
  if (path.empty())
    return {};
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open input tape '" + path + "'");
  return parse_tape(in);
}

// Debugging needs timestamps; plain programs are instrumented on load.
std::shared_ptr<const Program> debuggee(const std::string &path, bool raw) {
  auto program = load_program(path);
  if (!raw && !has_timestamps(program))
    program = instrument(program).program;
  return std::make_shared<const Program>(std::move(program));
}

std::set<std::string> split_names(const std::string &list) {
  std::set<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.insert(item);
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Timestamp-based execution control for a deterministic mini-VM"};
  app.require_subcommand(1);

  std::string in_path, out_path, input_path, trace_path, only;
  bool show_ts = false, json = false, raw = false, add_ts = false;
  std::uint64_t budget = kDefaultBudget;
  int port = -1;

  auto *asm_cmd = app.add_subcommand("asm", "Assemble text into a binary image");
  asm_cmd->add_option("input", in_path, "assembly file")->required();
  asm_cmd->add_option("output", out_path, "image file")->required();

  auto *dis_cmd = app.add_subcommand("dis", "Disassemble an image or assembly file");
  dis_cmd->add_option("input", in_path, "program file")->required();
  dis_cmd->add_option("-o,--output", out_path, "write to a file instead of stdout");

  auto *inst_cmd = app.add_subcommand("instrument", "Insert timestamp increments");
  inst_cmd->add_option("input", in_path, "program file")->required();
  inst_cmd->add_option("output", out_path, "image file")->required();
  inst_cmd->add_option("--only", only, "comma-separated functions to instrument");
  inst_cmd->add_flag("--json", json, "print the report as JSON");

  auto *run_cmd = app.add_subcommand("run", "Run a program to completion");
  run_cmd->add_option("program", in_path, "program file")->required();
  run_cmd->add_option("--input", input_path, "input tape, one integer per line");
  run_cmd->add_option("--trace", trace_path, "write a JSON-lines trace");
  run_cmd->add_flag("--show-ts", show_ts, "print ts=<final> after the output");
  run_cmd->add_option("--budget", budget, "instruction budget");
  run_cmd->add_flag("--instrument", add_ts, "instrument before running");

  auto *debug_cmd = app.add_subcommand("debug", "Interactive debugger");
  debug_cmd->add_option("program", in_path, "program file")->required();
  debug_cmd->add_option("--input", input_path, "input tape");
  debug_cmd->add_option("--budget", budget, "instruction budget per command");
  debug_cmd->add_flag("--raw", raw, "do not instrument a program without timestamps");

  auto *serve_cmd = app.add_subcommand("serve", "Speak the debug protocol");
  serve_cmd->add_option("program", in_path, "program file")->required();
  serve_cmd->add_option("--input", input_path, "input tape");
  serve_cmd->add_option("--port", port, "listen on 127.0.0.1:PORT instead of stdio");
  serve_cmd->add_option("--budget", budget, "instruction budget per command");
  serve_cmd->add_flag("--raw", raw, "do not instrument a program without timestamps");

  auto *bench_cmd = app.add_subcommand("bench", "Measure instrumentation overhead");
  bench_cmd->add_option("suite", in_path, "suite file (TOML)")->required();
  bench_cmd->add_flag("--json", json, "one JSON record per benchmark");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (asm_cmd->parsed()) {
      save_image(out_path, load_program(in_path));
      return kOk;
    }
    if (dis_cmd->parsed()) {
      auto text = disassemble(load_program(in_path));
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_path);
        if (!out)
          throw Error(ErrorCode::Io, "cannot write '" + out_path + "'");
        out << text;
      }
      return kOk;
    }
    if (inst_cmd->parsed()) {
      FunctionSelection selection;
      if (!only.empty())
        selection = split_names(only);
      auto result = instrument(load_program(in_path), selection);
      save_image(out_path, result.program);
      if (json) {
        std::cout << to_json(result.report).dump() << '\n';
      } else {
        for (const auto &s : result.report.sites)
          std::cout << s.function << "\t" << s.original_pc << "\t" << site_kind_name(s.kind)
                    << '\n';
        std::cout << "inserted " << result.report.inserted_count << " incts, "
                  << result.report.size_before << " -> " << result.report.size_after
                  << " bytes\n";
      }
      return kOk;
    }
    if (run_cmd->parsed()) {
      RunOptions opts;
      opts.budget = budget;
      opts.trace = !trace_path.empty();
      auto program = load_program(in_path);
      if (add_ts)
        program = instrument(program).program;
      auto r = run(program, read_input(input_path), opts);
      for (auto v : r.state.output)
        std::cout << v << '\n';
      if (show_ts)
        std::cout << "ts=" << r.state.tsstate.ts << '\n';
      if (opts.trace) {
        std::ofstream out(trace_path);
        if (!out)
          throw Error(ErrorCode::Io, "cannot write '" + trace_path + "'");
        write_trace(out, *r.trace);
      }
      if (r.budget_exhausted) {
        std::cerr << "error: instruction budget of " << budget << " exhausted\n";
        return kGuestFault;
      }
      if (r.state.status.kind == RunStatus::Faulted) {
        const auto &f = *r.state.status.fault;
        std::cerr << "fault: " << fault_name(f.kind) << " at instruction " << f.seq;
        if (!f.detail.empty())
          std::cerr << ": " << f.detail;
        std::cerr << '\n';
        return kGuestFault;
      }
      return kOk;
    }
    if (debug_cmd->parsed()) {
      Session session(debuggee(in_path, raw), read_input(input_path), SessionOptions{budget});
      Repl repl(session, std::cout);
      repl.run(std::cin, !::isatty(STDIN_FILENO));
      return kOk;
    }
    if (serve_cmd->parsed()) {
      Session session(debuggee(in_path, raw), read_input(input_path), SessionOptions{budget});
      if (port >= 0)
        serve_tcp(session, port, 0, [](int actual) {
          std::cerr << "listening on 127.0.0.1:" << actual << std::endl;
        });
      else
        serve_stream(session, std::cin, std::cout);
      return kOk;
    }
    if (bench_cmd->parsed()) {
      std::vector<BenchResult> results;
      for (const auto &entry : load_suite(in_path)) {
        results.push_back(run_bench(entry));
        if (json)
          std::cout << to_json(results.back()).dump() << std::endl;
      }
      if (!json)
        std::cout << render_table(results);
      return kOk;
    }
  } catch (const Error &e) {
    std::cerr << "error [" << code_name(e.code()) << "]: " << e.what() << '\n';
    switch (e.code()) {
    case ErrorCode::BudgetExhausted: return kGuestFault;
    case ErrorCode::Io:
    case ErrorCode::BadArguments:
    case ErrorCode::UnknownFunction:
    case ErrorCode::SyntaxError:
    case ErrorCode::UnresolvedLabel:
    case ErrorCode::UnresolvedCall:
    case ErrorCode::UnknownGlobal:
    case ErrorCode::DuplicateFunction:
    case ErrorCode::InvalidProgram:
    case ErrorCode::MalformedImage:
    case ErrorCode::AlreadyInstrumented: return kUsage;
    default: return kInternal;
    }
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
