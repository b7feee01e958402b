#include "tsdbg/records.hpp"

#include "tsdbg/error.hpp"

#include <istream>
#include <ostream>
#include <string>

namespace tsdbg {

Json to_json(const Location &loc) { return Json{{"function", loc.function}, {"line", loc.line}}; }

Json to_json(const Position &pos) {
  return Json{{"function", pos.location.function}, {"line", pos.location.line}, {"ts", pos.ts}};
}

Json to_json(const WriteTarget &t) {
  switch (t.kind) {
  case WriteTarget::Kind::Global: return Json{{"kind", "global"}, {"name", t.name}};
  case WriteTarget::Kind::Field:
    return Json{{"kind", "field"}, {"handle", t.handle}, {"field", t.name}};
  case WriteTarget::Kind::Local:
    return Json{{"kind", "local"}, {"function", t.name}, {"depth", t.depth}, {"slot", t.slot}};
  }
  return {};
}

Json to_json(const WriteEvent &w) { return Json{{"target", to_json(w.target)}, {"value", w.value}}; }

Json to_json(const TraceEvent &e) {
  Json j{{"seq", e.seq}, {"function", e.function}, {"pc", e.pc}, {"line", e.line}, {"ts", e.ts}};
  if (e.write)
    j["write"] = to_json(*e.write);
  return j;
}

Json to_json(const StopReport &r) {
  Json j{{"status", status_name(r.status)}};
  if (r.status == RunStatus::Stopped)
    j["reason"] = trap_name(r.reason);
  j["position"] = to_json(r.position);
  j["seq"] = r.seq;
  if (r.breakpoint)
    j["breakpoint"] = *r.breakpoint;
  if (r.write)
    j["write"] = to_json(*r.write);
  if (r.status == RunStatus::Exited)
    j["exit_code"] = r.exit_code;
  if (r.fault)
    j["fault"] = Json{{"kind", fault_name(r.fault->kind)},
                      {"seq", r.fault->seq},
                      {"detail", r.fault->detail}};
  if (!r.message.empty())
    j["message"] = r.message;
  Json stack = Json::array();
  for (const auto &s : r.stack)
    stack.push_back(Json{{"function", s.function}, {"pc", s.pc}, {"line", s.line}});
  j["stack"] = std::move(stack);
  Json watched = Json::array();
  for (const auto &w : r.watched) {
    Json v{{"id", w.id}, {"expression", w.expression}};
    v["value"] = w.value ? Json(*w.value) : Json(nullptr);
    watched.push_back(std::move(v));
  }
  j["watched"] = std::move(watched);
  return j;
}

Json to_json(const Bookmark &b) {
  return Json{{"id", b.id}, {"position", to_json(b.position)}, {"annotation", b.annotation}};
}

Json to_json(const WriteRecord &w) {
  return Json{{"ordinal", w.ordinal},
              {"position", to_json(w.position)},
              {"target", to_json(w.target)},
              {"value", w.value},
              {"seq", w.seq}};
}

Json to_json(const SearchOutcome &o) {
  Json probes = Json::array();
  for (const auto &p : o.probes)
    probes.push_back(Json{{"ts", p.ts}, {"value", p.value}, {"reachable", p.reachable}});
  return Json{{"boundary_ts", o.boundary_ts}, {"verified", o.verified}, {"probes", probes}};
}

Json to_json(const InstrumentationReport &r) {
  Json sites = Json::array();
  for (const auto &s : r.sites)
    sites.push_back(
        Json{{"function", s.function}, {"pc", s.original_pc}, {"kind", site_kind_name(s.kind)}});
  return Json{{"inserted_count", r.inserted_count},
              {"size_before", r.size_before},
              {"size_after", r.size_after},
              {"sites", sites}};
}

TraceEvent trace_event_from_json(const Json &j) {
  TraceEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.function = j.at("function").get<std::string>();
  e.pc = j.at("pc").get<std::size_t>();
  e.line = j.at("line").get<int>();
  e.ts = j.at("ts").get<Timestamp>();
  if (j.contains("write")) {
    const auto &w = j.at("write");
    const auto &t = w.at("target");
    WriteEvent ev;
    const auto kind = t.at("kind").get<std::string>();
    if (kind == "global") {
      ev.target = WriteTarget::global(t.at("name").get<std::string>());
    } else if (kind == "field") {
      ev.target = WriteTarget::field(t.at("handle").get<Value>(), t.at("field").get<std::string>());
    } else {
      ev.target.kind = WriteTarget::Kind::Local;
      ev.target.name = t.at("function").get<std::string>();
      ev.target.depth = t.at("depth").get<std::size_t>();
      ev.target.slot = t.at("slot").get<std::size_t>();
    }
    ev.value = w.at("value").get<Value>();
    e.write = std::move(ev);
  }
  return e;
}

void write_trace(std::ostream &out, const std::vector<TraceEvent> &trace) {
  for (const auto &e : trace)
    out << to_json(e).dump() << '\n';
}

std::vector<TraceEvent> read_trace(std::istream &in) {
  std::vector<TraceEvent> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty())
      out.push_back(trace_event_from_json(Json::parse(line)));
  return out;
}

std::vector<Value> parse_tape(std::istream &in) {
  std::vector<Value> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos)
      continue;
    auto last = line.find_last_not_of(" \t\r");
    auto text = line.substr(first, last - first + 1);
    try {
      std::size_t used = 0;
      auto v = std::stoll(text, &used);
      if (used != text.size())
        throw std::invalid_argument(text);
      out.push_back(v);
    } catch (const std::exception &) {
      throw Error(ErrorCode::BadArguments,
                  "input tape line " + std::to_string(lineno) + " is not an integer: " + text);
    }
  }
  return out;
}

} // namespace tsdbg
