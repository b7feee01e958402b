#include "checks.hpp"

#include "tsdbg/assembler.hpp"
#include "tsdbg/autodebug.hpp"
#include "tsdbg/control.hpp"
#include "tsdbg/error.hpp"
#include "tsdbg/expr.hpp"
#include "tsdbg/image.hpp"
#include "tsdbg/protocol.hpp"
#include "tsdbg/repl.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace tsdbg::testing {

namespace fs = std::filesystem;

std::uint64_t ceil_log2(std::uint64_t n) {
  std::uint64_t k = 0;
  while ((std::uint64_t{1} << k) < n)
    ++k;
  return k;
}

namespace {

std::string seed_tag(const CorpusProgram &p) { return "seed " + std::to_string(p.gen.seed) + ": "; }

std::shared_ptr<Session> session_for(const CorpusProgram &p) {
  return std::make_shared<Session>(p.instrumented, p.gen.input, SessionOptions{kCorpusBudget});
}

// Trace events that a breakpoint at their own location would stop at.
std::vector<const TraceEvent *> breakable_events(const CorpusProgram &p) {
  std::vector<const TraceEvent *> out;
  for (const auto &e : p.trace) {
    const auto *fn = p.instrumented->find_function(e.function);
    auto pc = resolve_line(*fn, e.line);
    if (pc && *pc == e.pc)
      out.push_back(&e);
  }
  return out;
}

} // namespace

CheckResult check_transparency(const std::vector<CorpusProgram> &corpus) {
  CheckResult r;
  RunOptions opts;
  opts.budget = kCorpusBudget * 4;
  for (const auto &p : corpus) {
    ++r.checked;
    auto a = run(p.original, p.gen.input, opts);
    const auto &b = p.final_state;
    const auto &sa = a.state.status;
    const auto &sb = b.status;
    std::string what;
    if (a.state.output != b.output)
      what = "outputs differ";
    else if (sa.kind != sb.kind)
      what = "termination differs";
    else if (sa.exit_code != sb.exit_code)
      what = "exit codes differ";
    else if (sa.fault.has_value() != sb.fault.has_value() ||
             (sa.fault && (sa.fault->kind != sb.fault->kind || sa.fault->detail != sb.fault->detail)))
      what = "faults differ";
    else if (a.state.globals != b.globals)
      what = "final globals differ";
    else if (a.state.heap != b.heap)
      what = "final heaps differ";
    else if (a.state.input_cursor != b.input_cursor)
      what = "input consumption differs";
    if (!what.empty())
      r.fail(seed_tag(p) + what);
  }
  return r;
}

CheckResult check_uniqueness(const std::vector<CorpusProgram> &corpus) {
  CheckResult r;
  for (const auto &p : corpus) {
    ++r.checked;
    std::set<std::tuple<std::string, std::size_t, Timestamp>> seen;
    for (std::size_t i = 0; i < p.trace.size(); ++i) {
      const auto &e = p.trace[i];
      if (!seen.emplace(e.function, e.pc, e.ts).second) {
        r.fail(seed_tag(p) + "position " + e.function + " pc " + std::to_string(e.pc) + " ts " +
               std::to_string(e.ts) + " repeats");
        break;
      }
      const auto &ins = p.instrumented->find_function(e.function)->body[e.pc];
      const Timestamp next =
          i + 1 < p.trace.size() ? p.trace[i + 1].ts : p.final_state.tsstate.ts;
      const Timestamp want = e.ts + (ins.op == Op::IncTs ? 1 : 0);
      if (next != want) {
        r.fail(seed_tag(p) + "ts moved from " + std::to_string(e.ts) + " to " +
               std::to_string(next) + " across seq " + std::to_string(e.seq));
        break;
      }
    }
  }
  return r;
}

CheckResult check_fast_equals_slow(const std::vector<CorpusProgram> &corpus,
                                   std::size_t per_program) {
  CheckResult r;
  for (const auto &p : corpus) {
    auto events = breakable_events(p);
    if (events.empty())
      continue;
    const std::size_t stride = std::max<std::size_t>(1, events.size() / per_program);
    auto s = session_for(p);
    for (std::size_t i = 0, taken = 0; i < events.size() && taken < per_program;
         i += stride, ++taken) {
      const auto &e = *events[i];
      const Position pos{location_of(e), e.ts};
      ++r.checked;
      try {
        auto fast = s->goto_position_fast(pos);
        const auto acts = s->trap_activations();
        const auto fast_state = s->machine().state();
        auto slow = s->goto_position_slow(pos);
        const auto &slow_state = s->machine().state();
        if (acts != 2)
          r.fail(seed_tag(p) + "fast goto to " + to_string(pos) + " took " +
                 std::to_string(acts) + " trap activations");
        else if (!same_execution_point(fast_state, slow_state))
          r.fail(seed_tag(p) + "fast and slow goto to " + to_string(pos) + " disagree");
        else if (fast_state.executed != e.seq)
          r.fail(seed_tag(p) + "goto " + to_string(pos) + " stopped at seq " +
                 std::to_string(fast_state.executed) + ", trace says " + std::to_string(e.seq));
        else if (fast.position != pos || slow.position != pos || fast.stack != slow.stack)
          r.fail(seed_tag(p) + "stop reports for " + to_string(pos) + " differ");
      } catch (const Error &err) {
        r.fail(seed_tag(p) + "goto " + to_string(pos) + " threw " + err.what());
      }
    }
  }
  return r;
}

CheckResult check_reverse_watchpoint(const std::vector<CorpusProgram> &corpus) {
  CheckResult r;
  std::size_t index = 0;
  for (const auto &p : corpus) {
    ++index;
    if (p.trace.empty())
      continue;
    auto s = session_for(p);

    // Pick S: a breakable position, a mid-trace replay, or the final state.
    std::uint64_t s_seq = 0;
    switch (index % 3) {
    case 0: {
      auto events = breakable_events(p);
      if (!events.empty()) {
        const auto &e = *events[(events.size() * 2) / 3];
        s->goto_position_fast(Position{location_of(e), e.ts});
        break;
      }
      [[fallthrough]];
    }
    case 1: s->replay_to(p.trace.size() * ((index % 7) + 1) / 8); break;
    default: s->replay_to(p.trace.size()); break;
    }
    s_seq = s->machine().state().executed;
    const auto s_state = s->machine().state();

    std::string label = "w";
    WriteTarget target = WriteTarget::global("w");
    if (index % 4 == 1) {
      auto h = s->machine().global("h0");
      if (h && *h != 0) {
        label = "h0.f0";
        target = WriteTarget::field(*h, "f0");
      }
    }

    // User traps must survive the procedure untouched.
    s->set_watchpoint("s0");
    const auto traps_before = s->watchpoints().size();

    auto expected = writes_before(p.trace, target, s_seq);
    try {
      auto result = reverse_watchpoint(*s, label);
      if (expected.empty()) {
        r.fail(seed_tag(p) + "expected no writes before seq " + std::to_string(s_seq));
        continue;
      }
      ++r.checked;
      if (result.writes.size() != expected.size()) {
        r.fail(seed_tag(p) + "pass 1 collected " + std::to_string(result.writes.size()) +
               " writes, oracle has " + std::to_string(expected.size()));
        continue;
      }
      for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto &w = result.writes[i];
        const auto &e = expected[i];
        if (w.ordinal != i + 1 || w.seq != e.seq + 1 || w.value != e.write->value ||
            w.position != Position{location_of(e), e.ts}) {
          r.fail(seed_tag(p) + "write record " + std::to_string(i + 1) + " differs from oracle");
          break;
        }
      }
      const auto &last = expected.back();
      if (result.stop.seq != last.seq + 1 || s->machine().state().executed != last.seq + 1 ||
          result.stop.position.ts != last.ts)
        r.fail(seed_tag(p) + "landed at seq " + std::to_string(result.stop.seq) +
               ", oracle's last write is seq " + std::to_string(last.seq));
    } catch (const Error &err) {
      if (err.code() == ErrorCode::NoWritesBeforeS && expected.empty()) {
        if (!same_execution_point(s->machine().state(), s_state))
          r.fail(seed_tag(p) + "NoWritesBeforeS did not return to S");
      } else {
        r.fail(seed_tag(p) + "reverse watchpoint threw " + err.what());
      }
    }
    if (s->watchpoints().size() != traps_before || s->watchpoints().back().expression != "s0")
      r.fail(seed_tag(p) + "user watchpoints were not restored");
  }
  return r;
}

CheckResult check_binary_search(const std::vector<CorpusProgram> &corpus) {
  CheckResult r;
  for (const auto &p : corpus) {
    const Timestamp hi = p.final_state.tsstate.ts;
    if (hi < 2)
      continue;
    std::vector<std::string> candidates = {"ts < " + std::to_string(hi / 2 + 1),
                                           "ts <= " + std::to_string(hi / 3)};
    // cnt never decreases, so `cnt < k` is monotone whenever cnt grows.
    Machine m(p.instrumented, p.gen.input);
    std::vector<Value> cnt_at_epoch;
    {
      auto e = Expr::parse("cnt");
      cnt_at_epoch.push_back(e.evaluate(m));
      while (!m.finished()) {
        auto ts = m.state().tsstate.ts;
        m.step();
        if (m.state().tsstate.ts != ts)
          cnt_at_epoch.push_back(e.evaluate(m));
      }
    }
    if (cnt_at_epoch.size() > 2)
      candidates.push_back("cnt < " + std::to_string(cnt_at_epoch[cnt_at_epoch.size() / 2] + 1));
    candidates.push_back("w < 3 || ts < 2");

    auto s = session_for(p);
    for (const auto &pred : candidates) {
      auto scan = scan_predicate(p, pred);
      if (!is_monotone(scan, 0, hi))
        continue;
      ++r.checked;
      const auto want = linear_boundary(scan, 0, hi);
      try {
        auto out = binary_search(*s, pred, 0, hi);
        if (!want || out.boundary_ts != *want)
          r.fail(seed_tag(p) + "'" + pred + "' boundary " + std::to_string(out.boundary_ts) +
                 ", linear scan says " + (want ? std::to_string(*want) : "none"));
        else if (out.probes.size() > ceil_log2(hi) + 2)
          r.fail(seed_tag(p) + "'" + pred + "' took " + std::to_string(out.probes.size()) +
                 " probes over [0, " + std::to_string(hi) + "]");
        else if (!out.verified)
          r.fail(seed_tag(p) + "'" + pred + "' boundary not verified");
        else if (s->machine().state().executed != scan.seq[*want])
          r.fail(seed_tag(p) + "'" + pred + "' left the session at the wrong point");
      } catch (const Error &err) {
        r.fail(seed_tag(p) + "'" + pred + "' threw " + err.what());
      }
    }
  }
  return r;
}

CheckResult check_empty_loop(const std::string &corpus_dir, const std::vector<Value> &ns) {
  CheckResult r;
  auto original = load_program(corpus_dir + "/empty_loop.tsasm");
  auto inst = instrument(original);
  RunOptions opts;
  opts.budget = 100'000'000;
  for (auto n : ns) {
    ++r.checked;
    auto a = run(original, {n}, opts);
    auto b = run(inst.program, {n}, opts);
    const auto want = static_cast<Timestamp>(n + 2);
    if (b.state.tsstate.ts != want)
      r.fail("N = " + std::to_string(n) + ": " + std::to_string(b.state.tsstate.ts) +
             " increments, expected " + std::to_string(want));
    else if (b.state.executed < a.state.executed)
      r.fail("N = " + std::to_string(n) + ": instrumented run executed fewer instructions");
    else if (b.state.executed - a.state.executed != want)
      r.fail("N = " + std::to_string(n) + ": instruction delta is not the increment count");
  }
  return r;
}

CheckResult check_size_increase(const std::vector<CorpusProgram> &corpus,
                                const std::string &corpus_dir) {
  CheckResult r;
  auto check = [&](const std::string &name, const Program &original) {
    auto inst = instrument(original);
    const auto before = serialize(original).size();
    const auto after = serialize(inst.program).size();
    ++r.checked;
    if (inst.report.inserted_count == 0)
      return;
    if (after <= before)
      r.fail(name + ": instrumented image is not larger");
    else if (after - before != inst.report.inserted_count * kEncodedIncTsSize)
      r.fail(name + ": size delta " + std::to_string(after - before) + " != " +
             std::to_string(inst.report.inserted_count) + " x " +
             std::to_string(kEncodedIncTsSize));
    else if (inst.report.size_before != before || inst.report.size_after != after)
      r.fail(name + ": report sizes disagree with the serialized images");
  };
  for (const auto &p : corpus)
    check("seed " + std::to_string(p.gen.seed), *p.original);
  for (const auto &entry : fs::directory_iterator(corpus_dir))
    if (entry.path().extension() == ".tsasm")
      check(entry.path().filename().string(), load_program(entry.path().string()));
  return r;
}

std::string run_script(const std::string &script_path, const std::string &root) {
  std::ifstream in(script_path);
  if (!in)
    throw std::runtime_error("cannot read " + script_path);
  std::string program;
  std::vector<Value> input;
  std::vector<std::string> body;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# program:", 0) == 0) {
      program = line.substr(10);
      program.erase(0, program.find_first_not_of(' '));
    } else if (line.rfind("# input:", 0) == 0) {
      std::istringstream ss(line.substr(8));
      Value v = 0;
      while (ss >> v)
        input.push_back(v);
    } else {
      body.push_back(line);
    }
  }
  auto loaded = load_program((fs::path(root) / program).string());
  if (!has_timestamps(loaded))
    loaded = instrument(loaded).program;
  Session session(std::make_shared<const Program>(std::move(loaded)), input);

  std::ostringstream out;
  if (fs::path(script_path).extension() == ".repl") {
    std::ostringstream script;
    for (const auto &l : body)
      script << l << '\n';
    std::istringstream cmds(script.str());
    Repl repl(session, out);
    repl.run(cmds, true);
  } else {
    ProtocolServer server(session, [&out](const std::string &msg) { out << "< " << msg << '\n'; });
    for (const auto &l : body) {
      if (l.empty() || l.front() == '#')
        continue;
      out << "> " << l << '\n';
      server.handle_line(l);
      if (server.closed())
        break;
    }
  }
  return out.str();
}

CheckResult check_goldens(const std::string &golden_dir, const std::string &root, bool update) {
  CheckResult r;
  std::vector<fs::path> scripts;
  for (const auto &entry : fs::directory_iterator(golden_dir)) {
    auto ext = entry.path().extension();
    if (ext == ".repl" || ext == ".proto")
      scripts.push_back(entry.path());
  }
  std::sort(scripts.begin(), scripts.end());
  for (const auto &script : scripts) {
    ++r.checked;
    auto golden = script;
    golden += ".golden";
    std::string actual;
    try {
      actual = run_script(script.string(), root);
    } catch (const std::exception &e) {
      r.fail(script.filename().string() + ": " + e.what());
      continue;
    }
    if (update) {
      std::ofstream(golden, std::ios::binary) << actual;
      continue;
    }
    std::string expected;
    try {
      expected = slurp(golden.string());
    } catch (const std::exception &) {
      r.fail(golden.filename().string() + " is missing");
      continue;
    }
    if (actual != expected) {
      std::size_t at = 0;
      while (at < actual.size() && at < expected.size() && actual[at] == expected[at])
        ++at;
      r.fail(script.filename().string() + " differs from its golden file at byte " +
             std::to_string(at));
    }
  }
  if (r.checked == 0)
    r.fail("no golden scripts found in " + golden_dir);
  return r;
}

} // namespace tsdbg::testing
