#pragma once

#include "tsdbg/isa.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tsdbg {

enum class SiteKind { Entry, HandlerEntry, Ret, BackwardBranch };

std::string_view site_kind_name(SiteKind kind);

struct InstrumentationSite {
  std::string function;
  /// Index in the original body of the instruction the `incts` precedes.
  std::size_t original_pc = 0;
  SiteKind kind = SiteKind::Entry;

  bool operator==(const InstrumentationSite &) const = default;
};

struct InstrumentationReport {
  std::vector<InstrumentationSite> sites;
  std::size_t inserted_count = 0;
  std::size_t size_before = 0;
  std::size_t size_after = 0;
};

struct Instrumented {
  Program program;
  InstrumentationReport report;
};

using FunctionSelection = std::optional<std::set<std::string>>;

/// A branch at index i to target t is backward when t <= i. A self-loop is
/// counted, so every loop has an increment on its back edge.
[[nodiscard]] inline bool is_backward(const Instruction &ins, std::size_t index) {
  return is_branch(ins.op) && static_cast<std::size_t>(ins.arg) <= index;
}

/// Sites an `incts` must precede for original instruction `pc` of `fn`, in
/// insertion order: entry, handler entry, then ret or backward branch.
std::vector<SiteKind> sites_before(const Function &fn, std::size_t pc);

/// Inserts `incts` at function entry, before every `ret`, before every
/// backward branch and as the first instruction of every handler, in each
/// selected function (all when `only` is empty). Branch targets and handler
/// tables are remapped so any jump to an instrumented instruction runs its
/// non-entry increments first.
///
/// Throws AlreadyInstrumented if the input contains `incts` and
/// UnknownFunction for an unknown selection name.
Instrumented instrument(const Program &program, const FunctionSelection &only = std::nullopt);

struct VerificationReport {
  std::vector<std::string> violations;

  [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Differential check of an instrumented program against its original:
/// stripping every `incts` and mapping indices back recovers the original,
/// every backward branch is immediately preceded by `incts`, and each
/// instruction is preceded by exactly as many `incts` as it has sites.
VerificationReport verify_instrumentation(const Program &original, const Program &instrumented,
                                          const FunctionSelection &only = std::nullopt);

} // namespace tsdbg
