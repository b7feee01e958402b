#pragma once

#include "tsdbg/expr.hpp"
#include "tsdbg/vm.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace tsdbg {

struct StackEntry {
  std::string function;
  std::size_t pc = 0;
  int line = 0;

  bool operator==(const StackEntry &) const = default;
};

struct WatchedValue {
  int id = 0;
  std::string expression;
  std::optional<Value> value;

  bool operator==(const WatchedValue &) const = default;
};

/// Result of every execution-control command.
struct StopReport {
  RunStatus status = RunStatus::Stopped;
  TrapKind reason = TrapKind::Entry;
  Position position;
  /// Instructions executed so far; orders stops within one replay.
  std::uint64_t seq = 0;
  std::optional<int> breakpoint;
  std::optional<WriteEvent> write;
  Value exit_code = 0;
  std::optional<Fault> fault;
  /// Predicate failure text for PredicateError stops.
  std::string message;
  /// Innermost frame first.
  std::vector<StackEntry> stack;
  std::vector<WatchedValue> watched;

  bool operator==(const StopReport &) const = default;
};

/// One-line human rendering, e.g. "stopped (breakpoint 1) at main:2@8".
std::string describe(const StopReport &report);

struct BreakpointInfo {
  int id = 0;
  Location location;
  std::size_t pc = 0;
  std::optional<std::string> condition;
};

struct WatchpointInfo {
  int id = 0;
  std::string expression;
  WriteTarget target;
};

struct Bookmark {
  int id = 0;
  Position position;
  std::string annotation;
};

struct SessionOptions {
  std::uint64_t budget = kDefaultBudget;
};

/// Breakpoint and watchpoint tables. Copyable so procedures can swap in a
/// private table and put the user's back afterwards.
class TrapTable {
public:
  struct BreakEntry {
    BreakpointInfo info;
    std::size_t function = 0;
    std::optional<Expr> condition;
  };
  struct WatchEntry {
    WatchpointInfo info;
  };

  void add_breakpoint(BreakEntry entry);
  void add_watchpoint(WatchEntry entry) { watches_.push_back(std::move(entry)); }
  bool remove(int id);
  void clear();

  [[nodiscard]] const std::vector<BreakEntry> &breakpoints() const { return breaks_; }
  [[nodiscard]] const std::vector<WatchEntry> &watchpoints() const { return watches_; }
  [[nodiscard]] const std::vector<std::size_t> *breaks_at(std::size_t function, std::size_t pc) const;
  [[nodiscard]] const WatchEntry *watch_for(const WriteTarget &target) const;
  [[nodiscard]] bool empty() const { return breaks_.empty() && watches_.empty(); }

private:
  void reindex();

  std::vector<BreakEntry> breaks_;
  std::vector<WatchEntry> watches_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> index_;
};

/// A debugging session over one program and input tape. Every command
/// leaves the machine at a deterministic prefix of the canonical trace.
/// Single owner; only request_pause() may be called from another thread.
class Session {
public:
  Session(std::shared_ptr<const Program> program, std::vector<Value> input,
          SessionOptions options = {});

  [[nodiscard]] const Machine &machine() const { return machine_; }
  [[nodiscard]] const Program &program() const { return machine_.program(); }
  [[nodiscard]] const SessionOptions &options() const { return options_; }

  /// Machine back to entry (ts = 0, ref unset). Traps and bookmarks stay.
  StopReport restart();

  int set_breakpoint(const Location &location, std::optional<std::string> condition = {});
  /// `target` is a global name or a field chain evaluated now to a handle.
  int set_watchpoint(std::string_view target);
  int set_watchpoint(const WriteTarget &target, std::string label);
  void clear(int id);
  void clear_all();
  [[nodiscard]] std::vector<BreakpointInfo> breakpoints() const;
  [[nodiscard]] std::vector<WatchpointInfo> watchpoints() const;

  [[nodiscard]] const TrapTable &traps() const { return traps_; }
  void set_traps(TrapTable table) { traps_ = std::move(table); }

  /// Runs until a trap fires or the guest finishes.
  StopReport resume();
  /// Runs until the attributed line or the frame changes.
  StopReport step_line();
  /// Executes exactly one instruction.
  StopReport step_instruction();

  /// Restart plus a conditional breakpoint `ts == T` at the location.
  StopReport goto_position_slow(const Position &position);
  /// Restart, brake at ts == T, then a static breakpoint at the location:
  /// two trap activations in total.
  StopReport goto_position_fast(const Position &position);
  /// Restart, brake at ts == T. T = 0 is the entry stop.
  StopReport goto_timestamp(Timestamp ts);
  /// Restart and replay exactly `seq` instructions with no traps armed.
  StopReport replay_to(std::uint64_t seq);

  const Bookmark &bookmark(std::string annotation);
  [[nodiscard]] const std::vector<Bookmark> &bookmarks() const { return bookmarks_; }
  StopReport goto_bookmark(int id);

  [[nodiscard]] Position current_position() const { return tsdbg::current_position(machine_); }
  [[nodiscard]] const StopReport &last_stop() const { return last_stop_; }

  /// Honoured between two instructions of a running command.
  void request_pause() { pause_requested_.store(true); }
  void clear_pause() { pause_requested_.store(false); }

  /// Trap stops since the last reset_counters(): brake, breakpoint,
  /// conditional breakpoint, watchpoint, and the pre-execution stop used
  /// for a ts = 0 target.
  [[nodiscard]] std::uint64_t trap_activations() const { return trap_activations_; }
  [[nodiscard]] std::uint64_t predicate_evaluations() const { return predicate_evaluations_; }
  void reset_counters() {
    trap_activations_ = 0;
    predicate_evaluations_ = 0;
  }

  /// Evaluates an expression against the current state.
  [[nodiscard]] Value evaluate(std::string_view expression) const;

  /// Arms or clears the brake threshold directly; used by drivers.
  void set_ref(std::optional<Timestamp> ref) { machine_.set_ref(ref); }

  /// Core loop: runs under the current trap table until a stop, the guest
  /// finishes, or `until_seq` instructions have executed.
  StopReport drive(std::optional<std::uint64_t> until_seq = std::nullopt);

  /// Builds a report for the current state without executing anything.
  StopReport snapshot(TrapKind reason) const;
  /// Replaces the report returned by last_stop(); used by drivers that
  /// refine the raw stop they ended on.
  void set_last_stop(StopReport report) { last_stop_ = std::move(report); }

private:
  enum class Mode { Continue, StepLine, StepInstruction };

  StopReport run(Mode mode, std::optional<std::uint64_t> until_seq);
  StopReport stop(TrapKind reason);
  StopReport finish_report();
  void require_running() const;
  std::size_t resolve(const Location &location) const;
  TrapTable::BreakEntry make_break(const Location &location, std::optional<std::string> condition,
                                   int id) const;
  StopReport with_private_traps(const std::function<StopReport()> &procedure);

  Machine machine_;
  SessionOptions options_;
  TrapTable traps_;
  std::vector<Bookmark> bookmarks_;
  int next_trap_id_ = 1;
  int next_bookmark_id_ = 1;
  std::optional<std::uint64_t> skip_break_seq_;
  StopReport last_stop_;
  std::atomic<bool> pause_requested_{false};
  std::uint64_t trap_activations_ = 0;
  std::uint64_t predicate_evaluations_ = 0;
};

/// Swaps an empty trap table into a session for the lifetime of the scope.
class TrapScope {
public:
  explicit TrapScope(Session &session) : session_(session), saved_(session.traps()) {
    session_.set_traps({});
  }
  ~TrapScope() {
    session_.set_traps(std::move(saved_));
    session_.set_ref(std::nullopt);
  }
  TrapScope(const TrapScope &) = delete;
  TrapScope &operator=(const TrapScope &) = delete;

private:
  Session &session_;
  TrapTable saved_;
};

} // namespace tsdbg
