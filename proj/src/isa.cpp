#include "tsdbg/isa.hpp"

#include "tsdbg/error.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace tsdbg {

namespace {

constexpr std::array<std::string_view, kOpCount> kOpNames = {
    "const", "load", "store", "gload", "gstore", "new",   "getf",  "setf",
    "add",   "sub",  "mul",   "div",   "mod",    "lt",    "eq",    "br",
    "brz",   "call", "ret",   "throw", "read",   "print", "incts", "halt",
};

} // namespace

std::string_view code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::SyntaxError: return "syntax-error";
  case ErrorCode::UnresolvedLabel: return "unresolved-label";
  case ErrorCode::UnresolvedCall: return "unresolved-call";
  case ErrorCode::UnknownGlobal: return "unknown-global";
  case ErrorCode::DuplicateFunction: return "duplicate-function";
  case ErrorCode::InvalidProgram: return "invalid-program";
  case ErrorCode::MalformedImage: return "malformed-image";
  case ErrorCode::AlreadyInstrumented: return "already-instrumented";
  case ErrorCode::UnknownFunction: return "unknown-function";
  case ErrorCode::UnresolvableLocation: return "unresolvable-location";
  case ErrorCode::UnknownTarget: return "unknown-target";
  case ErrorCode::PositionNotReached: return "position-not-reached";
  case ErrorCode::UnknownBookmark: return "unknown-bookmark";
  case ErrorCode::UnknownBreakpoint: return "unknown-breakpoint";
  case ErrorCode::BudgetExhausted: return "budget-exhausted";
  case ErrorCode::NotRunning: return "not-running";
  case ErrorCode::NoWritesBeforeS: return "no-writes-before-s";
  case ErrorCode::NotMonotoneAtEndpoints: return "not-monotone-at-endpoints";
  case ErrorCode::TimestampUnreachable: return "timestamp-unreachable";
  case ErrorCode::BadExpression: return "bad-expression";
  case ErrorCode::BadMessage: return "bad-message";
  case ErrorCode::UnknownCommand: return "unknown-command";
  case ErrorCode::BadArguments: return "bad-arguments";
  case ErrorCode::Io: return "io";
  }
  return "unknown";
}

std::string_view op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(std::string_view name) {
  auto it = std::find(kOpNames.begin(), kOpNames.end(), name);
  if (it == kOpNames.end())
    return std::nullopt;
  return static_cast<Op>(it - kOpNames.begin());
}

OperandKind operand_kind(Op op) {
  switch (op) {
  case Op::Const: return OperandKind::Literal;
  case Op::Load:
  case Op::Store: return OperandKind::Slot;
  case Op::GLoad:
  case Op::GStore: return OperandKind::Global;
  case Op::GetF:
  case Op::SetF: return OperandKind::Field;
  case Op::Br:
  case Op::Brz: return OperandKind::Target;
  case Op::Call: return OperandKind::Callee;
  default: return OperandKind::None;
  }
}

const Function *Program::find_function(std::string_view name) const {
  auto idx = function_index(name);
  return idx ? &functions[*idx] : nullptr;
}

Function *Program::find_function(std::string_view name) {
  auto idx = function_index(name);
  return idx ? &functions[*idx] : nullptr;
}

std::optional<std::size_t> Program::function_index(std::string_view name) const {
  auto it = std::lower_bound(functions.begin(), functions.end(), name,
                             [](const Function &f, std::string_view n) { return f.name < n; });
  if (it == functions.end() || it->name != name)
    return std::nullopt;
  return static_cast<std::size_t>(it - functions.begin());
}

std::optional<std::size_t> Program::global_index(std::string_view name) const {
  for (std::size_t i = 0; i < globals.size(); ++i)
    if (globals[i].name == name)
      return i;
  return std::nullopt;
}

void Program::add_function(Function fn) {
  auto it = std::lower_bound(functions.begin(), functions.end(), fn.name,
                             [](const Function &f, const std::string &n) { return f.name < n; });
  if (it != functions.end() && it->name == fn.name)
    throw Error(ErrorCode::DuplicateFunction, "duplicate function '" + fn.name + "'");
  functions.insert(it, std::move(fn));
}

void validate(const Program &program) {
  auto fail = [](ErrorCode code, const std::string &msg) { throw Error(code, msg); };

  if (!program.find_function("main"))
    fail(ErrorCode::InvalidProgram, "program has no 'main' function");

  std::set<std::string> seen_globals;
  for (const auto &g : program.globals)
    if (!seen_globals.insert(g.name).second)
      fail(ErrorCode::InvalidProgram, "duplicate global '" + g.name + "'");

  for (std::size_t i = 1; i < program.functions.size(); ++i)
    if (!(program.functions[i - 1].name < program.functions[i].name))
      fail(ErrorCode::DuplicateFunction, "functions not unique or not sorted at '" +
                                             program.functions[i].name + "'");

  for (const auto &fn : program.functions) {
    const std::string where = "in '" + fn.name + "'";
    if (fn.body.empty())
      fail(ErrorCode::InvalidProgram, "empty body " + where);
    const auto size = fn.body.size();
    for (std::size_t pc = 0; pc < size; ++pc) {
      const auto &ins = fn.body[pc];
      const std::string at = where + " at " + std::to_string(pc);
      if (static_cast<int>(ins.op) >= kOpCount)
        fail(ErrorCode::InvalidProgram, "bad opcode " + at);
      if (ins.line <= 0)
        fail(ErrorCode::InvalidProgram, "missing line attribution " + at);
      switch (operand_kind(ins.op)) {
      case OperandKind::Slot:
        if (ins.arg < 0 || static_cast<std::size_t>(ins.arg) >= fn.nlocals)
          fail(ErrorCode::InvalidProgram, "local slot out of range " + at);
        break;
      case OperandKind::Target:
        if (ins.arg < 0 || static_cast<std::size_t>(ins.arg) >= size)
          fail(ErrorCode::InvalidProgram, "branch target out of range " + at);
        break;
      case OperandKind::Global:
        if (!program.global_index(ins.sym))
          fail(ErrorCode::UnknownGlobal, "unknown global '" + ins.sym + "' " + at);
        break;
      case OperandKind::Field:
        if (ins.sym.empty())
          fail(ErrorCode::InvalidProgram, "empty field name " + at);
        break;
      case OperandKind::Callee: {
        const auto *callee = program.find_function(ins.sym);
        if (!callee)
          fail(ErrorCode::UnresolvedCall, "unresolved call '" + ins.sym + "' " + at);
        if (ins.arg < 0 || static_cast<std::size_t>(ins.arg) > callee->nlocals)
          fail(ErrorCode::InvalidProgram, "call arity exceeds callee locals " + at);
        break;
      }
      default:
        break;
      }
    }
    for (const auto &h : fn.handlers)
      if (h.start > h.end || h.end >= size || h.target >= size)
        fail(ErrorCode::InvalidProgram, "handler range out of bounds " + where);
  }
}

std::optional<std::size_t> resolve_line(const Function &fn, int line) {
  for (std::size_t pc = 0; pc < fn.body.size(); ++pc)
    if (fn.body[pc].line == line && fn.body[pc].op != Op::IncTs)
      return pc;
  return std::nullopt;
}

} // namespace tsdbg
