#include "tsdbg/assembler.hpp"

#include "tsdbg/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace tsdbg {

namespace {

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '.' || c == '$';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front()))
    return false;
  for (char c : s)
    if (!is_ident_char(c))
      return false;
  return true;
}

std::optional<Value> parse_int(std::string_view s) {
  Value v = 0;
  if (s.empty())
    return std::nullopt;
  const char *first = s.data();
  if (*first == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
      ++j;
    if (j > i)
      out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// A branch or handler operand that is either an index or a label name.
struct PendingRef {
  std::string label;
  std::size_t index = 0;
  bool is_label = false;
};

struct PendingFunction {
  Function fn;
  std::map<std::string, std::size_t> labels;
  std::vector<std::pair<std::size_t, PendingRef>> branch_refs;
  std::vector<std::array<PendingRef, 3>> handler_refs;
  std::vector<std::string> pending_labels;
  int current_line = 0;
};

class Assembler {
public:
  explicit Assembler(std::string_view source) : source_(source) {}

  Program run() {
    std::size_t pos = 0;
    while (pos <= source_.size()) {
      auto nl = source_.find('\n', pos);
      if (nl == std::string_view::npos)
        nl = source_.size();
      ++lineno_;
      parse_line(source_.substr(pos, nl - pos));
      pos = nl + 1;
    }
    finish_function();
    validate(program_);
    return std::move(program_);
  }

private:
  [[noreturn]] void syntax(const std::string &msg) const {
    throw Error(ErrorCode::SyntaxError, "line " + std::to_string(lineno_) + ": " + msg);
  }

  PendingRef parse_ref(std::string_view tok) const {
    PendingRef ref;
    if (auto v = parse_int(tok)) {
      if (*v < 0)
        syntax("negative instruction index");
      ref.index = static_cast<std::size_t>(*v);
    } else if (is_identifier(tok)) {
      ref.is_label = true;
      ref.label = std::string(tok);
    } else {
      syntax("bad label or index '" + std::string(tok) + "'");
    }
    return ref;
  }

  std::size_t resolve(const PendingFunction &pf, const PendingRef &ref) const {
    if (!ref.is_label)
      return ref.index;
    auto it = pf.labels.find(ref.label);
    if (it == pf.labels.end())
      throw Error(ErrorCode::UnresolvedLabel,
                  "unresolved label '" + ref.label + "' in '" + pf.fn.name + "'");
    return it->second;
  }

  void finish_function() {
    if (!current_)
      return;
    auto &pf = *current_;
    if (!pf.pending_labels.empty())
      syntax("label '" + pf.pending_labels.front() + "' at end of function '" + pf.fn.name +
             "' marks no instruction");
    for (auto &[pc, ref] : pf.branch_refs)
      pf.fn.body[pc].arg = static_cast<Value>(resolve(pf, ref));
    for (auto &refs : pf.handler_refs)
      pf.fn.handlers.push_back({resolve(pf, refs[0]), resolve(pf, refs[1]), resolve(pf, refs[2])});
    program_.add_function(std::move(pf.fn));
    current_.reset();
  }

  void parse_line(std::string_view raw) {
    if (auto hash = raw.find('#'); hash != std::string_view::npos)
      raw = raw.substr(0, hash);
    auto toks = split_ws(raw);
    if (toks.empty())
      return;

    // Leading "label:" tokens.
    while (!toks.empty() && toks.front().size() > 1 && toks.front().back() == ':') {
      auto name = toks.front().substr(0, toks.front().size() - 1);
      if (!is_identifier(name))
        syntax("bad label '" + std::string(name) + "'");
      if (!current_)
        syntax("label outside of .func");
      auto &pf = *current_;
      std::string key(name);
      if (pf.labels.count(key) || std::find(pf.pending_labels.begin(), pf.pending_labels.end(),
                                            key) != pf.pending_labels.end())
        syntax("duplicate label '" + key + "'");
      pf.pending_labels.push_back(std::move(key));
      toks.erase(toks.begin());
    }
    if (toks.empty())
      return;

    const auto head = toks.front();
    if (head.front() == '.')
      directive(head, toks);
    else
      instruction(head, toks);
  }

  void expect_args(const std::vector<std::string_view> &toks, std::size_t n) const {
    if (toks.size() != n + 1)
      syntax("'" + std::string(toks.front()) + "' expects " + std::to_string(n) + " operand(s)");
  }

  void directive(std::string_view head, const std::vector<std::string_view> &toks) {
    if (head == ".global") {
      expect_args(toks, 2);
      if (!is_identifier(toks[1]))
        syntax("bad global name");
      auto init = parse_int(toks[2]);
      if (!init)
        syntax("bad global initial value");
      if (program_.global_index(toks[1]))
        syntax("duplicate global '" + std::string(toks[1]) + "'");
      program_.globals.push_back({std::string(toks[1]), *init});
    } else if (head == ".func") {
      expect_args(toks, 2);
      finish_function();
      if (!is_identifier(toks[1]))
        syntax("bad function name");
      if (program_.find_function(toks[1]) || seen_functions_.count(std::string(toks[1])))
        throw Error(ErrorCode::DuplicateFunction,
                    "duplicate function '" + std::string(toks[1]) + "'");
      seen_functions_.insert(std::string(toks[1]));
      auto n = parse_int(toks[2]);
      if (!n || *n < 0)
        syntax("bad local count");
      current_.emplace();
      current_->fn.name = std::string(toks[1]);
      current_->fn.nlocals = static_cast<std::size_t>(*n);
    } else if (head == ".line") {
      expect_args(toks, 1);
      if (!current_)
        syntax(".line outside of .func");
      auto n = parse_int(toks[1]);
      if (!n || *n <= 0 || *n > std::numeric_limits<int>::max())
        syntax("line numbers must be positive");
      current_->current_line = static_cast<int>(*n);
    } else if (head == ".handler") {
      expect_args(toks, 3);
      if (!current_)
        syntax(".handler outside of .func");
      current_->handler_refs.push_back({parse_ref(toks[1]), parse_ref(toks[2]), parse_ref(toks[3])});
    } else {
      syntax("unknown directive '" + std::string(head) + "'");
    }
  }

  void instruction(std::string_view head, const std::vector<std::string_view> &toks) {
    if (!current_)
      syntax("instruction outside of .func");
    auto &pf = *current_;
    auto op = op_from_name(head);
    if (!op)
      syntax("unknown mnemonic '" + std::string(head) + "'");
    if (pf.current_line == 0)
      syntax("instruction before any .line directive");

    Instruction ins;
    ins.op = *op;
    ins.line = pf.current_line;
    const auto pc = pf.fn.body.size();

    switch (operand_kind(*op)) {
    case OperandKind::None:
      expect_args(toks, 0);
      break;
    case OperandKind::Literal: {
      expect_args(toks, 1);
      auto v = parse_int(toks[1]);
      if (!v)
        syntax("bad integer literal '" + std::string(toks[1]) + "'");
      ins.arg = *v;
      break;
    }
    case OperandKind::Slot: {
      expect_args(toks, 1);
      auto v = parse_int(toks[1]);
      if (!v || *v < 0)
        syntax("bad local slot '" + std::string(toks[1]) + "'");
      ins.arg = *v;
      break;
    }
    case OperandKind::Global:
    case OperandKind::Field:
      expect_args(toks, 1);
      if (!is_identifier(toks[1]))
        syntax("bad name '" + std::string(toks[1]) + "'");
      ins.sym = std::string(toks[1]);
      break;
    case OperandKind::Target:
      expect_args(toks, 1);
      pf.branch_refs.emplace_back(pc, parse_ref(toks[1]));
      break;
    case OperandKind::Callee: {
      expect_args(toks, 2);
      if (!is_identifier(toks[1]))
        syntax("bad function name '" + std::string(toks[1]) + "'");
      auto n = parse_int(toks[2]);
      if (!n || *n < 0)
        syntax("bad argument count");
      ins.sym = std::string(toks[1]);
      ins.arg = *n;
      break;
    }
    }

    for (auto &label : pf.pending_labels)
      pf.labels.emplace(std::move(label), pc);
    pf.pending_labels.clear();
    pf.fn.body.push_back(std::move(ins));
  }

  std::string_view source_;
  std::size_t lineno_ = 0;
  Program program_;
  std::optional<PendingFunction> current_;
  std::set<std::string> seen_functions_;
};

} // namespace

Program assemble(std::string_view source) { return Assembler(source).run(); }

std::string disassemble(const Program &program) {
  std::ostringstream out;
  for (const auto &g : program.globals)
    out << ".global " << g.name << ' ' << g.init << '\n';
  for (const auto &fn : program.functions) {
    std::set<std::size_t> labelled;
    for (const auto &ins : fn.body)
      if (is_branch(ins.op))
        labelled.insert(static_cast<std::size_t>(ins.arg));
    for (const auto &h : fn.handlers) {
      labelled.insert(h.start);
      labelled.insert(h.end);
      labelled.insert(h.target);
    }

    out << "\n.func " << fn.name << ' ' << fn.nlocals << '\n';
    int line = 0;
    for (std::size_t pc = 0; pc < fn.body.size(); ++pc) {
      const auto &ins = fn.body[pc];
      if (ins.line != line) {
        line = ins.line;
        out << ".line " << line << '\n';
      }
      if (labelled.count(pc))
        out << 'L' << pc << ":\n";
      out << "  " << op_name(ins.op);
      switch (operand_kind(ins.op)) {
      case OperandKind::Literal:
      case OperandKind::Slot: out << ' ' << ins.arg; break;
      case OperandKind::Global:
      case OperandKind::Field: out << ' ' << ins.sym; break;
      case OperandKind::Target: out << " L" << ins.arg; break;
      case OperandKind::Callee: out << ' ' << ins.sym << ' ' << ins.arg; break;
      case OperandKind::None: break;
      }
      out << '\n';
    }
    for (const auto &h : fn.handlers)
      out << ".handler L" << h.start << " L" << h.end << " L" << h.target << '\n';
  }
  return out.str();
}

} // namespace tsdbg
