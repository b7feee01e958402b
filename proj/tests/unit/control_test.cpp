#include "helpers.hpp"

#include "tsdbg/control.hpp"
#include "tsdbg/error.hpp"

using namespace tsdbg;

namespace {

Session loop10() { return Session(unit::instrumented("loop10.tsasm"), {}); }

} // namespace

TEST_CASE("a fresh session is stopped at entry") {
  auto s = loop10();
  const auto &r = s.last_stop();
  CHECK(r.status == RunStatus::Stopped);
  CHECK(r.reason == TrapKind::Entry);
  CHECK(to_string(r.position) == "main:1@0");
  CHECK(r.seq == 0);
}

TEST_CASE("conditional breakpoint ts == 8 stops exactly once") {
  auto s = loop10();
  int id = s.set_breakpoint({"main", 2}, "ts == 8");
  auto r = s.resume();
  CHECK(r.reason == TrapKind::ConditionalBreakpoint);
  CHECK(r.breakpoint == id);
  CHECK(to_string(r.position) == "main:2@8");
  CHECK(r.seq == 75);
  CHECK(s.evaluate("i") == 7);
  CHECK(describe(r) == "stopped (conditional-breakpoint 1) at main:2@8");
  // The condition was evaluated once per pass over line 2 so far.
  CHECK(s.predicate_evaluations() == 8);

  auto end = s.resume();
  CHECK(end.status == RunStatus::Exited);
  CHECK(end.exit_code == 0);
  CHECK(s.machine().state().output == std::vector<Value>{10});
  CHECK(to_string(end.position) == "main:3@12");
  CHECK_ERROR_CODE(s.resume(), ErrorCode::NotRunning);
}

TEST_CASE("a breakpoint does not re-fire on resume from itself") {
  auto s = loop10();
  s.set_breakpoint({"main", 2});
  std::vector<Timestamp> seen;
  for (auto r = s.resume(); r.status == RunStatus::Stopped; r = s.resume())
    seen.push_back(r.position.ts);
  CHECK(seen == std::vector<Timestamp>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
}

TEST_CASE("watchpoints stop after the write") {
  Session s(unit::instrumented("writes_135.tsasm"), {});
  int id = s.set_watchpoint("x");
  auto r = s.resume();
  CHECK(r.reason == TrapKind::Watchpoint);
  CHECK(r.breakpoint == id);
  REQUIRE(r.write);
  CHECK(r.write->value == 10);
  CHECK(s.evaluate("x") == 10);
  REQUIRE(r.watched.size() == 1);
  CHECK(r.watched[0].value == 10);
  // Stopped on the instruction after the store.
  CHECK(r.seq == 3);
  CHECK(to_string(r.position) == "main:2@1");
  CHECK(s.resume().write->value == 20);
  CHECK(s.resume().write->value == 30);
  CHECK(s.resume().status == RunStatus::Exited);
}

TEST_CASE("field watchpoints") {
  Session s(unit::instrumented("list.tsasm"), {3});
  s.set_breakpoint({"main", 4});
  s.resume();
  s.clear_all();
  int id = s.set_watchpoint("head.val");
  auto wp = s.watchpoints();
  REQUIRE(wp.size() == 1);
  CHECK(wp[0].id == id);
  CHECK(wp[0].target.kind == WriteTarget::Kind::Field);
  // The list is never written after construction.
  CHECK(s.resume().status == RunStatus::Exited);
  CHECK_ERROR_CODE(s.set_watchpoint("nothing"), ErrorCode::UnknownTarget);
  CHECK_ERROR_CODE(s.set_watchpoint("1 + 2"), ErrorCode::UnknownTarget);
}

TEST_CASE("trap table management") {
  auto s = loop10();
  int a = s.set_breakpoint({"main", 2});
  int b = s.set_watchpoint("i");
  CHECK(a != b);
  CHECK(s.breakpoints().size() == 1);
  CHECK(s.breakpoints()[0].pc == 5);
  s.clear(a);
  CHECK(s.breakpoints().empty());
  CHECK_ERROR_CODE(s.clear(a), ErrorCode::UnknownBreakpoint);
  CHECK_ERROR_CODE(s.set_breakpoint({"main", 99}), ErrorCode::UnresolvableLocation);
  CHECK_ERROR_CODE(s.set_breakpoint({"nope", 1}), ErrorCode::UnresolvableLocation);
  CHECK_ERROR_CODE(s.set_breakpoint({"main", 2}, "i +"), ErrorCode::BadExpression);
  CHECK_ERROR_CODE(s.set_breakpoint({"main", 2}, "zz == 1"), ErrorCode::BadExpression);
  s.clear_all();
  CHECK(s.traps().empty());
}

TEST_CASE("stepping") {
  auto s = loop10();
  auto r = s.step_instruction();
  CHECK(r.reason == TrapKind::Step);
  CHECK(r.seq == 1);
  CHECK(r.position.ts == 1);

  r = s.step_line();
  CHECK(r.reason == TrapKind::Step);
  CHECK(r.position.location.line == 2);
  CHECK(r.seq == 5);
  r = s.step_line();
  CHECK(r.position.location.line == 1);
  CHECK(r.position.ts == 2);
}

TEST_CASE("step_line returns from a callee") {
  Session s(unit::instrumented("writes_135.tsasm"), {});
  s.set_breakpoint({"tick", 20});
  s.resume();
  s.clear_all();
  auto r = s.step_line();
  CHECK(r.position.location.function == "main");
  CHECK(r.position.location.line == 2);
}

TEST_CASE("a predicate error stops the machine and does not retrigger") {
  auto s = loop10();
  s.set_breakpoint({"main", 2}, "1 / (i - 3) == 5");
  auto r = s.resume();
  // i == 3 on the fourth pass.
  CHECK(r.reason == TrapKind::PredicateError);
  CHECK(r.position.ts == 4);
  CHECK_FALSE(r.message.empty());
  CHECK(s.predicate_evaluations() == 4);
  CHECK(s.resume().status == RunStatus::Exited);
  CHECK(s.predicate_evaluations() == 10);
}

TEST_CASE("restart keeps traps and bookmarks") {
  auto s = loop10();
  s.set_breakpoint({"main", 2});
  s.resume();
  s.bookmark("first");
  auto r = s.restart();
  CHECK(r.reason == TrapKind::Entry);
  CHECK(r.seq == 0);
  CHECK(s.breakpoints().size() == 1);
  CHECK(s.bookmarks().size() == 1);
  CHECK(s.machine().state().tsstate.ts == 0);
  CHECK_FALSE(s.machine().state().tsstate.ref);
}

TEST_CASE("fast and slow goto agree and cost what they should") {
  auto s = loop10();
  s.set_breakpoint({"main", 3});
  s.reset_counters();
  auto fast = s.goto_position_fast({{"main", 2}, 8});
  CHECK(s.trap_activations() == 2);
  CHECK(s.predicate_evaluations() == 0);
  auto fast_state = s.machine().state();

  s.reset_counters();
  auto slow = s.goto_position_slow({{"main", 2}, 8});
  CHECK(s.trap_activations() == 1);
  CHECK(s.predicate_evaluations() == 8);

  CHECK(same_execution_point(fast_state, s.machine().state()));
  CHECK(fast.position == slow.position);
  CHECK(fast.seq == 75);
  CHECK(slow.seq == 75);
  // The user's breakpoint survives both procedures.
  REQUIRE(s.breakpoints().size() == 1);
  CHECK(s.breakpoints()[0].location.line == 3);
  CHECK_FALSE(s.machine().state().tsstate.ref);
}

TEST_CASE("goto to a position that never occurs") {
  auto s = loop10();
  CHECK_ERROR_CODE(s.goto_position_fast({{"main", 2}, 11}), ErrorCode::PositionNotReached);
  CHECK_ERROR_CODE(s.goto_position_slow({{"main", 2}, 11}), ErrorCode::PositionNotReached);
  // Line 3 does not run at ts 4.
  CHECK_ERROR_CODE(s.goto_position_fast({{"main", 3}, 4}), ErrorCode::PositionNotReached);
  CHECK_ERROR_CODE(s.goto_position_fast({{"main", 77}, 4}), ErrorCode::UnresolvableLocation);
  CHECK(s.traps().empty());
}

TEST_CASE("goto timestamp zero is the entry state") {
  auto s = loop10();
  s.reset_counters();
  auto r = s.goto_timestamp(0);
  CHECK(r.seq == 0);
  CHECK(r.position.ts == 0);
  CHECK(s.trap_activations() == 1);
}

TEST_CASE("bookmarks return to the same execution point") {
  auto s = loop10();
  s.set_breakpoint({"main", 2}, "ts == 6");
  s.resume();
  const auto saved = s.machine().state();
  const auto &mark = s.bookmark("six");
  CHECK(mark.id == 1);
  CHECK(to_string(mark.position) == "main:2@6");
  s.resume();
  auto r = s.goto_bookmark(1);
  CHECK(same_execution_point(saved, s.machine().state()));
  CHECK(r.position == mark.position);
  CHECK_ERROR_CODE(s.goto_bookmark(9), ErrorCode::UnknownBookmark);
}

TEST_CASE("replay_to reaches an exact instruction count") {
  auto s = loop10();
  auto r = s.replay_to(75);
  CHECK(r.seq == 75);
  CHECK(to_string(r.position) == "main:2@8");
}

TEST_CASE("budget exhaustion leaves the session usable") {
  Session s(unit::instrumented("loop10.tsasm"), {}, SessionOptions{20});
  CHECK_ERROR_CODE(s.resume(), ErrorCode::BudgetExhausted);
  CHECK(s.machine().state().executed == 20);
  CHECK(s.restart().seq == 0);
}

TEST_CASE("pause interrupts a running command") {
  auto s = loop10();
  s.request_pause();
  auto r = s.resume();
  CHECK(r.reason == TrapKind::Pause);
  CHECK(r.seq == 0);
  CHECK(s.resume().status == RunStatus::Exited);
}

TEST_CASE("faults end the session until restart") {
  Session s(unit::instrumented("late_crash.tsasm"), {});
  auto r = s.resume();
  CHECK(r.status == RunStatus::Faulted);
  REQUIRE(r.fault);
  CHECK(r.fault->kind == FaultKind::DivideByZero);
  CHECK(r.position.ts == 41);
  CHECK_ERROR_CODE(s.step_line(), ErrorCode::NotRunning);
}
