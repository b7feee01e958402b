#pragma once

#include "tsdbg/control.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tsdbg {

/// Progress notifications streamed by the drivers, on the driver's thread.
struct Progress {
  enum class Kind { PassStarted, WriteRecorded, Probe, Diagnostic };

  Kind kind = Kind::PassStarted;
  int pass = 0;
  std::size_t writes = 0;
  Timestamp ts = 0;
  bool value = false;
  std::string message;
};

using ProgressFn = std::function<void(const Progress &)>;

/// One watch stop collected by the first pass of a reverse watchpoint.
struct WriteRecord {
  Position position;
  WriteTarget target;
  Value value = 0;
  /// 1-based, in trace order.
  std::size_t ordinal = 0;
  /// Instructions executed when the watch stop was reported.
  std::uint64_t seq = 0;
};

struct ReverseWatchResult {
  StopReport stop;
  std::vector<WriteRecord> writes;
};

/// From the current stop S: replays with a watchpoint on `target` collecting
/// every write that commits strictly before S, then replays again to just
/// after the last of them. `target` is a global or a field chain evaluated
/// at S.
///
/// Throws NoWritesBeforeS (after returning the session to S) or
/// PositionNotReached when a replay diverges.
ReverseWatchResult reverse_watchpoint(Session &session, std::string_view target,
                                      const ProgressFn &progress = {});

struct Probe {
  Timestamp ts = 0;
  bool value = false;
  /// False when the probed ts never occurs; the probe then counts as false.
  bool reachable = true;
};

struct SearchOutcome {
  /// Smallest ts in (lo, hi] at which the predicate is false.
  Timestamp boundary_ts = 0;
  std::vector<Probe> probes;
  /// The predicate was observed true at boundary_ts - 1.
  bool verified = false;
  StopReport stop;
};

/// Bisection over timestamps. The predicate is evaluated at the first
/// instruction of each probed ts, i.e. where goto_timestamp stops.
///
/// Throws BadArguments when lo >= hi, NotMonotoneAtEndpoints when the
/// predicate is not true at lo and false at hi, BadExpression when the
/// predicate does not parse or fails to evaluate.
SearchOutcome binary_search(Session &session, std::string_view predicate, Timestamp lo,
                            Timestamp hi, const ProgressFn &progress = {});

/// Restart and stop at the instruction following the `incts` that set ts to
/// `ts`. Throws TimestampUnreachable if the run ends first.
StopReport goto_timestamp(Session &session, Timestamp ts);

} // namespace tsdbg
