#include "tsdbg/instrument.hpp"

#include "tsdbg/error.hpp"
#include "tsdbg/image.hpp"

#include <algorithm>

namespace tsdbg {

namespace {

bool selected(const FunctionSelection &only, const std::string &name) {
  return !only || only->count(name) > 0;
}

void check_selection(const Program &program, const FunctionSelection &only) {
  if (!only)
    return;
  for (const auto &name : *only)
    if (!program.find_function(name))
      throw Error(ErrorCode::UnknownFunction, "unknown function '" + name + "'");
}

struct Layout {
  // new index of the first incts inserted before original i (or of i itself)
  std::vector<std::size_t> block_start;
  // where jumps to original i land: first non-entry incts, else i itself
  std::vector<std::size_t> jump_target;
  std::vector<std::size_t> new_index;
};

Function instrument_function(const Function &fn, std::vector<InstrumentationSite> &sites) {
  const auto n = fn.body.size();
  Layout layout;
  layout.block_start.resize(n);
  layout.jump_target.resize(n);
  layout.new_index.resize(n);

  Function out;
  out.name = fn.name;
  out.nlocals = fn.nlocals;
  out.body.reserve(n + n / 4 + 2);

  for (std::size_t i = 0; i < n; ++i) {
    const auto &ins = fn.body[i];
    layout.block_start[i] = out.body.size();
    layout.jump_target[i] = out.body.size();
    for (auto kind : sites_before(fn, i)) {
      if (kind == SiteKind::Entry)
        layout.jump_target[i] = out.body.size() + 1;
      out.body.push_back(Instruction{Op::IncTs, 0, {}, ins.line});
      sites.push_back({fn.name, i, kind});
    }
    layout.new_index[i] = out.body.size();
    out.body.push_back(ins);
  }

  for (auto &ins : out.body)
    if (is_branch(ins.op))
      ins.arg = static_cast<Value>(layout.jump_target[static_cast<std::size_t>(ins.arg)]);
  for (const auto &h : fn.handlers)
    out.handlers.push_back(
        {layout.block_start[h.start], layout.new_index[h.end], layout.jump_target[h.target]});
  return out;
}

} // namespace

std::string_view site_kind_name(SiteKind kind) {
  switch (kind) {
  case SiteKind::Entry: return "entry";
  case SiteKind::HandlerEntry: return "handler-entry";
  case SiteKind::Ret: return "ret";
  case SiteKind::BackwardBranch: return "backward-branch";
  }
  return "?";
}

std::vector<SiteKind> sites_before(const Function &fn, std::size_t pc) {
  std::vector<SiteKind> kinds;
  const auto &ins = fn.body[pc];
  if (pc == 0)
    kinds.push_back(SiteKind::Entry);
  if (std::any_of(fn.handlers.begin(), fn.handlers.end(),
                  [&](const Handler &h) { return h.target == pc; }))
    kinds.push_back(SiteKind::HandlerEntry);
  if (ins.op == Op::Ret)
    kinds.push_back(SiteKind::Ret);
  else if (is_backward(ins, pc))
    kinds.push_back(SiteKind::BackwardBranch);
  return kinds;
}

Instrumented instrument(const Program &program, const FunctionSelection &only) {
  check_selection(program, only);
  for (const auto &fn : program.functions)
    for (const auto &ins : fn.body)
      if (ins.op == Op::IncTs)
        throw Error(ErrorCode::AlreadyInstrumented,
                    "function '" + fn.name + "' already contains incts");

  Instrumented result;
  result.program.globals = program.globals;
  for (const auto &fn : program.functions) {
    if (selected(only, fn.name))
      result.program.functions.push_back(instrument_function(fn, result.report.sites));
    else
      result.program.functions.push_back(fn);
  }
  result.report.inserted_count = result.report.sites.size();
  result.report.size_before = serialize(program).size();
  result.report.size_after = serialize(result.program).size();
  return result;
}

VerificationReport verify_instrumentation(const Program &original, const Program &instrumented,
                                          const FunctionSelection &only) {
  VerificationReport report;
  auto violation = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (original.globals != instrumented.globals)
    violation("global tables differ");
  if (original.functions.size() != instrumented.functions.size()) {
    violation("function count differs");
    return report;
  }

  for (std::size_t f = 0; f < original.functions.size(); ++f) {
    const auto &orig = original.functions[f];
    const auto &inst = instrumented.functions[f];
    const std::string where = "'" + orig.name + "'";
    if (orig.name != inst.name || orig.nlocals != inst.nlocals) {
      violation("function header differs at " + where);
      continue;
    }

    // Strip incts; old_of[j] is the original index that instrumented j maps
    // back to (an incts maps to the instruction it precedes).
    std::vector<std::size_t> old_of(inst.body.size(), 0);
    std::vector<std::size_t> preceding(orig.body.size() + 1, 0);
    Function stripped;
    stripped.name = inst.name;
    stripped.nlocals = inst.nlocals;
    std::size_t pending = 0;
    for (std::size_t j = 0; j < inst.body.size(); ++j) {
      if (inst.body[j].op == Op::IncTs) {
        ++pending;
        continue;
      }
      const auto k = stripped.body.size();
      for (std::size_t back = 0; back <= pending; ++back)
        old_of[j - back] = k;
      if (k < preceding.size())
        preceding[k] = pending;
      pending = 0;
      stripped.body.push_back(inst.body[j]);
    }
    if (pending > 0)
      violation("trailing incts at end of " + where);

    bool shape_ok = stripped.body.size() == orig.body.size();
    if (shape_ok) {
      for (auto &ins : stripped.body)
        if (is_branch(ins.op)) {
          auto t = static_cast<std::size_t>(ins.arg);
          ins.arg = t < old_of.size() ? static_cast<Value>(old_of[t]) : -1;
        }
      for (const auto &h : inst.handlers) {
        if (h.start >= old_of.size() || h.end >= old_of.size() || h.target >= old_of.size()) {
          shape_ok = false;
          break;
        }
        stripped.handlers.push_back({old_of[h.start], old_of[h.end], old_of[h.target]});
      }
    }
    if (!shape_ok || stripped.body != orig.body || stripped.handlers != orig.handlers)
      violation("stripping incts does not recover the original body of " + where);

    // A jump to original i must land on the first increment preceding i,
    // skipping only the entry increment.
    if (shape_ok && stripped.body == orig.body) {
      const bool entry_site = selected(only, orig.name);
      std::vector<std::size_t> landing(orig.body.size(), 0);
      for (std::size_t j = inst.body.size(); j-- > 0;)
        landing[old_of[j]] = j;
      if (entry_site && !landing.empty())
        ++landing[0];
      for (std::size_t j = 0; j < inst.body.size(); ++j) {
        const auto &ins = inst.body[j];
        if (is_branch(ins.op) && static_cast<std::size_t>(ins.arg) != landing[old_of[ins.arg]])
          violation("branch at " + std::to_string(j) + " in " + where +
                    " does not land on the increments of its target");
      }
      for (const auto &h : inst.handlers)
        if (h.target != landing[old_of[h.target]])
          violation("handler target " + std::to_string(h.target) + " in " + where +
                    " skips increments");
    }

    for (std::size_t j = 0; j < inst.body.size(); ++j)
      if (is_backward(inst.body[j], j) && (j == 0 || inst.body[j - 1].op != Op::IncTs))
        violation("backward branch at " + std::to_string(j) + " in " + where +
                  " is not preceded by incts");

    if (stripped.body.size() == orig.body.size()) {
      const bool expect_sites = selected(only, orig.name);
      for (std::size_t i = 0; i < orig.body.size(); ++i) {
        const auto expected = expect_sites ? sites_before(orig, i).size() : 0;
        if (preceding[i] != expected)
          violation("instruction " + std::to_string(i) + " of " + where + " has " +
                    std::to_string(preceding[i]) + " incts, expected " + std::to_string(expected));
      }
    }
  }
  return report;
}

} // namespace tsdbg
