#include "helpers.hpp"

#include "tsdbg/bench.hpp"
#include "tsdbg/error.hpp"
#include "tsdbg/records.hpp"
#include "tsdbg/repl.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tsdbg;

TEST_CASE("trace round trip") {
  RunOptions o;
  o.trace = true;
  auto r = run(unit::instrumented("list.tsasm"), {3}, o);
  std::stringstream ss;
  write_trace(ss, *r.trace);
  auto back = read_trace(ss);
  CHECK(back == *r.trace);
  bool field = false;
  for (const auto &e : back)
    field = field || (e.write && e.write->target.kind == WriteTarget::Kind::Field);
  CHECK(field);
}

TEST_CASE("stop report JSON keeps a stable key order") {
  Session s(unit::instrumented("writes_135.tsasm"), {});
  s.set_watchpoint("x");
  auto j = to_json(s.resume());
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it)
    keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"status", "reason", "position", "seq", "breakpoint",
                                         "write", "stack", "watched"});
  CHECK(j["write"]["target"]["kind"] == "global");
  CHECK(j["watched"][0]["value"] == 10);
}

TEST_CASE("tape parsing") {
  std::istringstream ok("1\n\n-2\n  3  \n");
  CHECK(parse_tape(ok) == std::vector<Value>{1, -2, 3});
  std::istringstream bad("1\nx\n");
  CHECK_ERROR_CODE(parse_tape(bad), ErrorCode::BadArguments);
}

TEST_CASE("trimmed mean drops the extremes") {
  CHECK(trimmed_mean({5, 1, 100, 6, 7}) == doctest::Approx(6));
  CHECK(trimmed_mean({2, 4}) == doctest::Approx(3));
  CHECK(trimmed_mean({9}) == doctest::Approx(9));
}

TEST_CASE("bench suite parsing and a small run") {
  auto suite = load_suite(unit::corpus("bench.toml"));
  REQUIRE(suite.size() == 4);
  CHECK(suite[0].name == "empty-loop");
  CHECK(suite[0].input == std::vector<Value>{1'000'000});
  CHECK(suite[0].runs == 7);

  auto entry = suite[0];
  entry.input = {1000};
  entry.runs = 3;
  auto r = run_bench(entry);
  CHECK(r.increments == 1002);
  CHECK(r.instructions_instrumented == r.instructions_original + r.increments);
  CHECK(r.size_instrumented == r.size_original + 3 * kEncodedIncTsSize);
  CHECK(render_table({r}).find("empty-loop") != std::string::npos);
  CHECK(to_json(r)["increments"] == 1002);

  auto dir = std::filesystem::temp_directory_path() / "tsdbg_bench_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "tape.txt") << "7\n";
  std::ofstream(dir / "suite.toml") << "[[benchmark]]\nname = \"t\"\nprogram = \""
                                    << unit::corpus("empty_loop.tsasm")
                                    << "\"\ninput_file = \"tape.txt\"\n";
  auto custom = load_suite((dir / "suite.toml").string());
  REQUIRE(custom.size() == 1);
  CHECK(custom[0].input == std::vector<Value>{7});
  std::filesystem::remove_all(dir);
}

TEST_CASE("repl reports errors with their code") {
  Session s(unit::instrumented("loop10.tsasm"), {});
  std::ostringstream out;
  Repl repl(s, out);
  CHECK(repl.execute("frobnicate"));
  CHECK(repl.execute("b nowhere:3"));
  CHECK(repl.execute("gotots 99"));
  CHECK(repl.execute("help"));
  CHECK_FALSE(repl.execute("quit"));
  auto text = out.str();
  CHECK(text.find("error [unknown-command]") != std::string::npos);
  CHECK(text.find("error [unresolvable-location]") != std::string::npos);
  CHECK(text.find("error [timestamp-unreachable]") != std::string::npos);
  for (const auto &c : Repl::commands())
    CHECK(text.find(c) != std::string::npos);
}
