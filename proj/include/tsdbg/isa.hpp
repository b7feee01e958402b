#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsdbg {

using Value = std::int64_t;

/// Opcodes of the mini-ISA. Stack effects use `a b -- r` notation, the
/// rightmost item being the top of the operand stack.
enum class Op : std::uint8_t {
  Const,  ///< `const k`      -- k
  Load,   ///< `load s`       -- locals[s]
  Store,  ///< `store s`    v --            locals[s] = v
  GLoad,  ///< `gload g`      -- g
  GStore, ///< `gstore g`   v --            g = v
  New,    ///< `new`          -- h          fresh heap record
  GetF,   ///< `getf f`     h -- h.f        missing field reads 0
  SetF,   ///< `setf f`   h v --            h.f = v
  Add,    ///< `add`      a b -- a+b        (likewise sub mul div mod)
  Sub,
  Mul,
  Div,
  Mod,
  Lt,     ///< `lt`       a b -- (a<b)
  Eq,     ///< `eq`       a b -- (a==b)
  Br,     ///< `br t`         --            jump
  Brz,    ///< `brz t`      v --            jump if v == 0
  Call,   ///< `call f n` a1..an -- r       callee locals[0..n) = args
  Ret,    ///< `ret`        v --            to caller's stack, or exit code
  Throw,  ///< `throw`      v --            unwind to nearest handler
  Read,   ///< `read`         -- x          next integer of the input tape
  Print,  ///< `print`      v --            append to output log
  IncTs,  ///< `incts`        --            ++ts; brake trap when ts == ref
  Halt,   ///< `halt`         --            exit with code 0
};

inline constexpr int kOpCount = static_cast<int>(Op::Halt) + 1;

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

enum class OperandKind { None, Literal, Slot, Global, Field, Target, Callee };

/// Operand shape of an opcode. `call` is the only opcode carrying two
/// operands (callee name plus argument count).
OperandKind operand_kind(Op op);

[[nodiscard]] inline bool is_branch(Op op) { return op == Op::Br || op == Op::Brz; }

struct Instruction {
  Op op = Op::Halt;
  /// Literal, local slot, resolved branch target, or call argument count.
  Value arg = 0;
  /// Global, field, or callee name.
  std::string sym;
  int line = 0;

  bool operator==(const Instruction &) const = default;
};

/// Exception range; `start` and `end` are inclusive instruction indices.
struct Handler {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t target = 0;

  bool operator==(const Handler &) const = default;
};

struct Function {
  std::string name;
  std::size_t nlocals = 0;
  std::vector<Instruction> body;
  std::vector<Handler> handlers;

  bool operator==(const Function &) const = default;
};

struct Global {
  std::string name;
  Value init = 0;

  bool operator==(const Global &) const = default;
};

/// A loadable unit. Functions are kept sorted by name, which fixes both the
/// lookup order and the serialized layout.
struct Program {
  std::vector<Function> functions;
  std::vector<Global> globals;

  [[nodiscard]] const Function *find_function(std::string_view name) const;
  [[nodiscard]] Function *find_function(std::string_view name);
  [[nodiscard]] std::optional<std::size_t> function_index(std::string_view name) const;
  [[nodiscard]] std::optional<std::size_t> global_index(std::string_view name) const;

  /// Inserts keeping name order; throws DuplicateFunction.
  void add_function(Function fn);

  bool operator==(const Program &) const = default;
};

/// Checks every structural invariant: one `main`, in-range branch targets and
/// handler tables, resolvable calls and globals, local slots below nlocals,
/// call arity within the callee's locals, nonzero line attribution.
/// Throws Error on the first violation.
void validate(const Program &program);

/// Index of the first non-`incts` instruction of `fn` attributed to `line`.
std::optional<std::size_t> resolve_line(const Function &fn, int line);

} // namespace tsdbg
