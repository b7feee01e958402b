#pragma once

#include "tsdbg/isa.hpp"
#include "tsdbg/position.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tsdbg {

inline constexpr std::uint64_t kDefaultBudget = 100'000'000;
inline constexpr std::size_t kMaxFrames = 10'000;
inline constexpr std::size_t kMaxOperandStack = 1u << 20;

struct TimestampState {
  Timestamp ts = 0;
  /// Brake threshold; unset means `incts` never traps.
  std::optional<Timestamp> ref;

  bool operator==(const TimestampState &) const = default;
};

enum class FaultKind {
  DivideByZero,
  NilHandle,
  StackOverflow,
  StackUnderflow,
  UnhandledThrow,
  InputExhausted,
  PcOutOfRange,
};

std::string_view fault_name(FaultKind kind);

struct Fault {
  FaultKind kind = FaultKind::DivideByZero;
  /// Ordinal of the instruction that faulted.
  std::uint64_t seq = 0;
  std::string detail;

  bool operator==(const Fault &) const = default;
};

/// Why a machine is stopped. Entry is the pre-execution stop after a
/// restart; Pause and PredicateError are debugger-side stops.
enum class TrapKind {
  Entry,
  Brake,
  Breakpoint,
  ConditionalBreakpoint,
  Watchpoint,
  Step,
  Pause,
  PredicateError,
};

std::string_view trap_name(TrapKind kind);

enum class RunStatus { Running, Stopped, Exited, Faulted };

std::string_view status_name(RunStatus status);

struct MachineStatus {
  RunStatus kind = RunStatus::Running;
  TrapKind trap = TrapKind::Entry;
  Value exit_code = 0;
  std::optional<Fault> fault;

  bool operator==(const MachineStatus &) const = default;
};

struct Frame {
  std::size_t function = 0;
  /// Next instruction to execute; a suspended caller keeps the index of its
  /// `call` until the callee returns.
  std::size_t pc = 0;
  std::vector<Value> locals;
  std::vector<Value> stack;

  bool operator==(const Frame &) const = default;
};

using Record = std::map<std::string, Value>;

struct CodePoint {
  std::size_t function = 0;
  std::size_t pc = 0;

  bool operator==(const CodePoint &) const = default;
};

struct MachineState {
  std::vector<Frame> frames;
  std::vector<Value> globals;
  /// Handle h names heap[h - 1]; handle 0 is nil.
  std::vector<Record> heap;
  std::size_t input_cursor = 0;
  std::vector<Value> output;
  TimestampState tsstate;
  /// Instructions executed so far, i.e. the seq of the next one.
  std::uint64_t executed = 0;
  std::optional<CodePoint> last_executed;
  MachineStatus status;

  bool operator==(const MachineState &) const = default;
};

/// Equality of everything the guest can observe plus ts and the instruction
/// count. Ignores the stop reason and `ref`, which belong to the debugger.
bool same_execution_point(const MachineState &a, const MachineState &b);

/// Destination of a committed write.
struct WriteTarget {
  enum class Kind { Global, Field, Local };

  Kind kind = Kind::Global;
  /// Global name, or field name for Kind::Field, or function for Kind::Local.
  std::string name;
  Value handle = 0;
  std::size_t slot = 0;
  std::size_t depth = 0;

  static WriteTarget global(std::string name) { return {Kind::Global, std::move(name), 0, 0, 0}; }
  static WriteTarget field(Value handle, std::string field) {
    return {Kind::Field, std::move(field), handle, 0, 0};
  }

  bool operator==(const WriteTarget &) const = default;
};

/// "x", "#3.next" or "main[0]$1" (function, frame depth, slot).
std::string to_string(const WriteTarget &target);

struct WriteEvent {
  WriteTarget target;
  Value value = 0;

  bool operator==(const WriteEvent &) const = default;
};

/// One executed instruction, as recorded by the tracing oracle.
struct TraceEvent {
  std::uint64_t seq = 0;
  std::string function;
  std::size_t pc = 0;
  int line = 0;
  /// ts in effect when the instruction started executing.
  Timestamp ts = 0;
  std::optional<WriteEvent> write;

  bool operator==(const TraceEvent &) const = default;
};

struct StepResult {
  bool executed = false;
  std::optional<WriteEvent> write;
  /// An `incts` made ts equal ref.
  bool brake = false;
};

/// Deterministic interpreter over one Program and input tape.
class Machine {
public:
  Machine(std::shared_ptr<const Program> program, std::vector<Value> input);

  /// Back to the entry of `main` with ts = 0 and ref unset.
  void reset();

  /// Executes one instruction. A no-op when the machine has exited or
  /// faulted. Brake sets status to stopped(Brake) after the increment.
  StepResult step();

  [[nodiscard]] bool finished() const {
    return state_.status.kind == RunStatus::Exited || state_.status.kind == RunStatus::Faulted;
  }

  [[nodiscard]] const MachineState &state() const { return state_; }
  [[nodiscard]] const Program &program() const { return *program_; }
  [[nodiscard]] const std::shared_ptr<const Program> &program_ptr() const { return program_; }
  [[nodiscard]] const std::vector<Value> &input() const { return input_; }

  void set_ref(std::optional<Timestamp> ref) { state_.tsstate.ref = ref; }
  void set_status(MachineStatus status) { state_.status = std::move(status); }

  /// Code point of the next instruction, or of the last executed one once
  /// the machine has finished.
  [[nodiscard]] std::optional<CodePoint> current_point() const;
  [[nodiscard]] const Instruction *current_instruction() const;

  [[nodiscard]] std::optional<Value> global(std::string_view name) const;
  [[nodiscard]] const Record *record(Value handle) const;

private:
  void fault(FaultKind kind, std::string detail);
  bool pop(Frame &f, Value &out);
  bool unwind(Value thrown);

  std::shared_ptr<const Program> program_;
  std::vector<Value> input_;
  // Per function, per pc: resolved global or callee index.
  std::vector<std::vector<std::size_t>> links_;
  std::size_t main_index_ = 0;
  MachineState state_;
};

/// ((function, line of the current pc), ts). After exit this is the position
/// of the last executed instruction.
Position current_position(const Machine &machine);

struct RunOptions {
  std::uint64_t budget = kDefaultBudget;
  bool trace = false;
};

struct RunResult {
  MachineState state;
  std::optional<std::vector<TraceEvent>> trace;
  bool budget_exhausted = false;
};

/// Runs from `main` entry until exit, fault, or budget exhaustion. `ref` is
/// left unset, so no brake trap interrupts the run.
RunResult run(std::shared_ptr<const Program> program, std::vector<Value> input,
              const RunOptions &options = {});
RunResult run(const Program &program, std::vector<Value> input, const RunOptions &options = {});

} // namespace tsdbg
