#pragma once

#include "tsdbg/autodebug.hpp"
#include "tsdbg/control.hpp"
#include "tsdbg/instrument.hpp"
#include "tsdbg/vm.hpp"

#include "json.hpp"

#include <iosfwd>
#include <vector>

namespace tsdbg {

// Machine-readable records shared by the protocol, the CLI and the trace
// dump. Keys keep insertion order so dumps are byte-stable.
using Json = nlohmann::ordered_json;

Json to_json(const Location &loc);
Json to_json(const Position &pos);
Json to_json(const WriteTarget &target);
Json to_json(const WriteEvent &write);
Json to_json(const TraceEvent &event);
Json to_json(const StopReport &report);
Json to_json(const Bookmark &bookmark);
Json to_json(const WriteRecord &record);
Json to_json(const SearchOutcome &outcome);
Json to_json(const InstrumentationReport &report);

TraceEvent trace_event_from_json(const Json &j);

/// One compact JSON record per line.
void write_trace(std::ostream &out, const std::vector<TraceEvent> &trace);
std::vector<TraceEvent> read_trace(std::istream &in);

/// Newline-separated integers; blank lines are skipped.
std::vector<Value> parse_tape(std::istream &in);

} // namespace tsdbg
