#include "tsdbg/vm.hpp"

#include "tsdbg/error.hpp"

#include <charconv>
#include <limits>

namespace tsdbg {

namespace {

Value wrap_add(Value a, Value b) {
  return static_cast<Value>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
Value wrap_sub(Value a, Value b) {
  return static_cast<Value>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
Value wrap_mul(Value a, Value b) {
  return static_cast<Value>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

} // namespace

std::string to_string(const Location &loc) { return loc.function + ":" + std::to_string(loc.line); }

std::string to_string(const Position &pos) {
  return to_string(pos.location) + "@" + std::to_string(pos.ts);
}

std::optional<Location> parse_location(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0)
    return std::nullopt;
  int line = 0;
  auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), line);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || line <= 0)
    return std::nullopt;
  return Location{std::string(text.substr(0, colon)), line};
}

std::optional<Position> parse_position(std::string_view text) {
  auto at = text.rfind('@');
  if (at == std::string_view::npos)
    return std::nullopt;
  auto loc = parse_location(text.substr(0, at));
  if (!loc)
    return std::nullopt;
  Timestamp ts = 0;
  auto digits = text.substr(at + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), ts);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty())
    return std::nullopt;
  return Position{*loc, ts};
}

std::string_view fault_name(FaultKind kind) {
  switch (kind) {
  case FaultKind::DivideByZero: return "DivideByZero";
  case FaultKind::NilHandle: return "NilHandle";
  case FaultKind::StackOverflow: return "StackOverflow";
  case FaultKind::StackUnderflow: return "StackUnderflow";
  case FaultKind::UnhandledThrow: return "UnhandledThrow";
  case FaultKind::InputExhausted: return "InputExhausted";
  case FaultKind::PcOutOfRange: return "PcOutOfRange";
  }
  return "?";
}

std::string_view trap_name(TrapKind kind) {
  switch (kind) {
  case TrapKind::Entry: return "entry";
  case TrapKind::Brake: return "brake";
  case TrapKind::Breakpoint: return "breakpoint";
  case TrapKind::ConditionalBreakpoint: return "conditional-breakpoint";
  case TrapKind::Watchpoint: return "watchpoint";
  case TrapKind::Step: return "step";
  case TrapKind::Pause: return "pause";
  case TrapKind::PredicateError: return "predicate-error";
  }
  return "?";
}

std::string_view status_name(RunStatus status) {
  switch (status) {
  case RunStatus::Running: return "running";
  case RunStatus::Stopped: return "stopped";
  case RunStatus::Exited: return "exited";
  case RunStatus::Faulted: return "faulted";
  }
  return "?";
}

std::string to_string(const WriteTarget &target) {
  switch (target.kind) {
  case WriteTarget::Kind::Global: return target.name;
  case WriteTarget::Kind::Field: return "#" + std::to_string(target.handle) + "." + target.name;
  case WriteTarget::Kind::Local:
    return target.name + "[" + std::to_string(target.depth) + "]$" + std::to_string(target.slot);
  }
  return "?";
}

bool same_execution_point(const MachineState &a, const MachineState &b) {
  return a.frames == b.frames && a.globals == b.globals && a.heap == b.heap &&
         a.input_cursor == b.input_cursor && a.output == b.output &&
         a.tsstate.ts == b.tsstate.ts && a.executed == b.executed &&
         a.last_executed == b.last_executed;
}

Machine::Machine(std::shared_ptr<const Program> program, std::vector<Value> input)
    : program_(std::move(program)), input_(std::move(input)) {
  validate(*program_);
  const auto &p = *program_;
  main_index_ = *p.function_index("main");
  links_.resize(p.functions.size());
  for (std::size_t f = 0; f < p.functions.size(); ++f) {
    const auto &body = p.functions[f].body;
    links_[f].resize(body.size(), 0);
    for (std::size_t pc = 0; pc < body.size(); ++pc) {
      const auto &ins = body[pc];
      if (operand_kind(ins.op) == OperandKind::Global)
        links_[f][pc] = *p.global_index(ins.sym);
      else if (ins.op == Op::Call)
        links_[f][pc] = *p.function_index(ins.sym);
    }
  }
  reset();
}

void Machine::reset() {
  state_ = MachineState{};
  for (const auto &g : program_->globals)
    state_.globals.push_back(g.init);
  Frame entry;
  entry.function = main_index_;
  entry.locals.assign(program_->functions[main_index_].nlocals, 0);
  state_.frames.push_back(std::move(entry));
  state_.status = {RunStatus::Stopped, TrapKind::Entry, 0, std::nullopt};
}

void Machine::fault(FaultKind kind, std::string detail) {
  state_.status.kind = RunStatus::Faulted;
  state_.status.fault = Fault{kind, state_.executed - 1, std::move(detail)};
}

bool Machine::pop(Frame &f, Value &out) {
  if (f.stack.empty()) {
    fault(FaultKind::StackUnderflow, "operand stack underflow");
    return false;
  }
  out = f.stack.back();
  f.stack.pop_back();
  return true;
}

bool Machine::unwind(Value thrown) {
  auto &frames = state_.frames;
  while (!frames.empty()) {
    auto &f = frames.back();
    const auto &fn = program_->functions[f.function];
    for (const auto &h : fn.handlers) {
      if (h.start <= f.pc && f.pc <= h.end) {
        f.stack.clear();
        f.stack.push_back(thrown);
        f.pc = h.target;
        return true;
      }
    }
    frames.pop_back();
  }
  return false;
}

std::optional<CodePoint> Machine::current_point() const {
  if (!finished() && !state_.frames.empty()) {
    const auto &f = state_.frames.back();
    return CodePoint{f.function, f.pc};
  }
  return state_.last_executed;
}

const Instruction *Machine::current_instruction() const {
  auto cp = current_point();
  if (!cp)
    return nullptr;
  const auto &body = program_->functions[cp->function].body;
  return cp->pc < body.size() ? &body[cp->pc] : nullptr;
}

std::optional<Value> Machine::global(std::string_view name) const {
  auto idx = program_->global_index(name);
  if (!idx)
    return std::nullopt;
  return state_.globals[*idx];
}

const Record *Machine::record(Value handle) const {
  if (handle <= 0 || static_cast<std::uint64_t>(handle) > state_.heap.size())
    return nullptr;
  return &state_.heap[static_cast<std::size_t>(handle - 1)];
}

StepResult Machine::step() {
  StepResult result;
  if (finished())
    return result;
  state_.status.kind = RunStatus::Running;

  auto &frame = state_.frames.back();
  const auto &fn = program_->functions[frame.function];
  const auto fidx = frame.function;
  const auto pc = frame.pc;
  state_.last_executed = CodePoint{fidx, pc};
  ++state_.executed;
  result.executed = true;

  if (pc >= fn.body.size()) {
    fault(FaultKind::PcOutOfRange, "fell off the end of '" + fn.name + "'");
    return result;
  }
  const auto &ins = fn.body[pc];

  auto binary = [&](auto op) {
    Value b = 0, a = 0;
    if (!pop(frame, b) || !pop(frame, a))
      return;
    frame.stack.push_back(op(a, b));
    ++frame.pc;
  };

  switch (ins.op) {
  case Op::Const:
    frame.stack.push_back(ins.arg);
    ++frame.pc;
    break;
  case Op::Load:
    frame.stack.push_back(frame.locals[static_cast<std::size_t>(ins.arg)]);
    ++frame.pc;
    break;
  case Op::Store: {
    Value v = 0;
    if (!pop(frame, v))
      break;
    const auto slot = static_cast<std::size_t>(ins.arg);
    frame.locals[slot] = v;
    result.write = WriteEvent{
        {WriteTarget::Kind::Local, fn.name, 0, slot, state_.frames.size() - 1}, v};
    ++frame.pc;
    break;
  }
  case Op::GLoad:
    frame.stack.push_back(state_.globals[links_[fidx][pc]]);
    ++frame.pc;
    break;
  case Op::GStore: {
    Value v = 0;
    if (!pop(frame, v))
      break;
    state_.globals[links_[fidx][pc]] = v;
    result.write = WriteEvent{WriteTarget::global(ins.sym), v};
    ++frame.pc;
    break;
  }
  case Op::New:
    state_.heap.emplace_back();
    frame.stack.push_back(static_cast<Value>(state_.heap.size()));
    ++frame.pc;
    break;
  case Op::GetF: {
    Value h = 0;
    if (!pop(frame, h))
      break;
    const auto *rec = record(h);
    if (!rec) {
      fault(FaultKind::NilHandle, "getf " + ins.sym + " on handle " + std::to_string(h));
      break;
    }
    auto it = rec->find(ins.sym);
    frame.stack.push_back(it == rec->end() ? 0 : it->second);
    ++frame.pc;
    break;
  }
  case Op::SetF: {
    Value v = 0, h = 0;
    if (!pop(frame, v) || !pop(frame, h))
      break;
    if (!record(h)) {
      fault(FaultKind::NilHandle, "setf " + ins.sym + " on handle " + std::to_string(h));
      break;
    }
    state_.heap[static_cast<std::size_t>(h - 1)][ins.sym] = v;
    result.write = WriteEvent{WriteTarget::field(h, ins.sym), v};
    ++frame.pc;
    break;
  }
  case Op::Add: binary(wrap_add); break;
  case Op::Sub: binary(wrap_sub); break;
  case Op::Mul: binary(wrap_mul); break;
  case Op::Div:
  case Op::Mod: {
    Value b = 0, a = 0;
    if (!pop(frame, b) || !pop(frame, a))
      break;
    if (b == 0) {
      fault(FaultKind::DivideByZero, std::string(op_name(ins.op)) + " by zero");
      break;
    }
    Value r = 0;
    if (a == std::numeric_limits<Value>::min() && b == -1)
      r = ins.op == Op::Div ? a : 0;
    else
      r = ins.op == Op::Div ? a / b : a % b;
    frame.stack.push_back(r);
    ++frame.pc;
    break;
  }
  case Op::Lt: binary([](Value a, Value b) -> Value { return a < b ? 1 : 0; }); break;
  case Op::Eq: binary([](Value a, Value b) -> Value { return a == b ? 1 : 0; }); break;
  case Op::Br: frame.pc = static_cast<std::size_t>(ins.arg); break;
  case Op::Brz: {
    Value v = 0;
    if (!pop(frame, v))
      break;
    frame.pc = v == 0 ? static_cast<std::size_t>(ins.arg) : pc + 1;
    break;
  }
  case Op::Call: {
    const auto argc = static_cast<std::size_t>(ins.arg);
    if (frame.stack.size() < argc) {
      fault(FaultKind::StackUnderflow, "call " + ins.sym + " missing arguments");
      break;
    }
    if (state_.frames.size() >= kMaxFrames) {
      fault(FaultKind::StackOverflow, "call depth limit reached");
      break;
    }
    const auto callee = links_[fidx][pc];
    Frame next;
    next.function = callee;
    next.locals.assign(program_->functions[callee].nlocals, 0);
    std::copy(frame.stack.end() - static_cast<std::ptrdiff_t>(argc), frame.stack.end(),
              next.locals.begin());
    frame.stack.resize(frame.stack.size() - argc);
    // `frame` is invalidated by the push below.
    state_.frames.push_back(std::move(next));
    break;
  }
  case Op::Ret: {
    Value v = 0;
    if (!pop(frame, v))
      break;
    state_.frames.pop_back();
    if (state_.frames.empty()) {
      state_.status.kind = RunStatus::Exited;
      state_.status.exit_code = v;
      break;
    }
    auto &caller = state_.frames.back();
    ++caller.pc;
    caller.stack.push_back(v);
    break;
  }
  case Op::Throw: {
    Value v = 0;
    if (!pop(frame, v))
      break;
    if (!unwind(v))
      fault(FaultKind::UnhandledThrow, "unhandled throw of " + std::to_string(v));
    break;
  }
  case Op::Read:
    if (state_.input_cursor >= input_.size()) {
      fault(FaultKind::InputExhausted, "read past end of input");
      break;
    }
    frame.stack.push_back(input_[state_.input_cursor++]);
    ++frame.pc;
    break;
  case Op::Print: {
    Value v = 0;
    if (!pop(frame, v))
      break;
    state_.output.push_back(v);
    ++frame.pc;
    break;
  }
  case Op::IncTs:
    ++state_.tsstate.ts;
    ++frame.pc;
    if (state_.tsstate.ref && state_.tsstate.ts == *state_.tsstate.ref) {
      result.brake = true;
      state_.status.kind = RunStatus::Stopped;
      state_.status.trap = TrapKind::Brake;
    }
    break;
  case Op::Halt:
    state_.status.kind = RunStatus::Exited;
    state_.status.exit_code = 0;
    break;
  }

  if (state_.status.kind == RunStatus::Running && !state_.frames.empty() &&
      state_.frames.back().stack.size() > kMaxOperandStack)
    fault(FaultKind::StackOverflow, "operand stack limit reached");
  return result;
}

Position current_position(const Machine &machine) {
  auto cp = machine.current_point();
  const auto &p = machine.program();
  if (!cp)
    return {{"main", 0}, machine.state().tsstate.ts};
  const auto &fn = p.functions[cp->function];
  const int line = cp->pc < fn.body.size() ? fn.body[cp->pc].line : fn.body.back().line;
  return {{fn.name, line}, machine.state().tsstate.ts};
}

RunResult run(std::shared_ptr<const Program> program, std::vector<Value> input,
              const RunOptions &options) {
  Machine m(std::move(program), std::move(input));
  RunResult result;
  if (options.trace)
    result.trace.emplace();
  const auto &p = m.program();
  while (!m.finished()) {
    if (m.state().executed >= options.budget) {
      result.budget_exhausted = true;
      break;
    }
    if (options.trace) {
      const auto &f = m.state().frames.back();
      const auto &fn = p.functions[f.function];
      TraceEvent ev;
      ev.seq = m.state().executed;
      ev.function = fn.name;
      ev.pc = f.pc;
      ev.line = f.pc < fn.body.size() ? fn.body[f.pc].line : 0;
      ev.ts = m.state().tsstate.ts;
      ev.write = m.step().write;
      result.trace->push_back(std::move(ev));
    } else {
      m.step();
    }
  }
  result.state = m.state();
  return result;
}

RunResult run(const Program &program, std::vector<Value> input, const RunOptions &options) {
  return run(std::make_shared<const Program>(program), std::move(input), options);
}

} // namespace tsdbg
