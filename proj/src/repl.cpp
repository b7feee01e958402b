#include "tsdbg/repl.hpp"

#include "tsdbg/autodebug.hpp"
#include "tsdbg/error.hpp"

#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace tsdbg {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Splits off the first word; `rest` keeps the remainder verbatim.
std::string head(const std::string &line, std::string &rest) {
  auto sp = line.find_first_of(" \t");
  if (sp == std::string::npos) {
    rest.clear();
    return line;
  }
  rest = trim(std::string_view(line).substr(sp));
  return line.substr(0, sp);
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    return std::nullopt;
  return v;
}

[[noreturn]] void usage(const std::string &text) {
  throw Error(ErrorCode::BadArguments, "usage: " + text);
}

Location location_arg(const std::string &text) {
  auto loc = parse_location(text);
  if (!loc)
    throw Error(ErrorCode::BadArguments, "expected function:line, got '" + text + "'");
  return *loc;
}

int id_arg(const std::string &text, const char *what) {
  auto v = parse_u64(text);
  if (!v || *v > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
    usage(std::string(what) + " <id>");
  return static_cast<int>(*v);
}

} // namespace

const std::vector<std::string> &Repl::commands() {
  static const std::vector<std::string> names = {
      "b", "watch", "delete", "info", "c", "s", "si", "restart", "pos", "mark", "marks",
      "goto", "gotots", "rwatch", "bsearch", "p", "bt", "out", "help", "quit"};
  return names;
}

Repl::Repl(Session &session, std::ostream &out) : session_(session), out_(out) {}

void Repl::flush_output() {
  const auto &cur = session_.machine().state().output;
  const bool extends = cur.size() >= reported_output_.size() &&
                       std::equal(reported_output_.begin(), reported_output_.end(), cur.begin());
  std::size_t from = reported_output_.size();
  if (!extends) {
    out_ << "(output rewound)\n";
    from = 0;
  }
  for (std::size_t i = from; i < cur.size(); ++i)
    out_ << "output: " << cur[i] << '\n';
  reported_output_ = cur;
}

void Repl::report(const StopReport &r) {
  flush_output();
  out_ << describe(r) << '\n';
  for (const auto &w : r.watched) {
    out_ << "  " << w.id << ": " << w.expression << " = ";
    if (w.value)
      out_ << *w.value;
    else
      out_ << "<unavailable>";
    out_ << '\n';
  }
}

bool Repl::execute(const std::string &raw) {
  auto line = trim(raw);
  if (line.empty() || line.front() == '#')
    return true;
  std::string rest;
  const auto cmd = head(line, rest);
  auto &s = session_;
  try {
    if (cmd == "q" || cmd == "quit") {
      return false;
    } else if (cmd == "help") {
      out_ << "b LOC [if EXPR] | watch TARGET | delete [ID] | info [marks]\n"
              "c | s | si | restart | pos | bt | out | p EXPR\n"
              "mark [NOTE] | marks | goto ID | goto FN:LINE@TS [slow] | gotots TS\n"
              "rwatch TARGET | bsearch [LO HI] EXPR | quit\n";
    } else if (cmd == "b" || cmd == "break") {
      std::string loc_text = rest;
      std::optional<std::string> cond;
      if (auto pos = rest.find(" if "); pos != std::string::npos) {
        loc_text = trim(std::string_view(rest).substr(0, pos));
        cond = trim(std::string_view(rest).substr(pos + 4));
      }
      if (loc_text.empty())
        usage("b FN:LINE [if EXPR]");
      auto loc = location_arg(loc_text);
      auto id = s.set_breakpoint(loc, cond);
      out_ << "Breakpoint " << id << " at " << to_string(loc);
      if (cond)
        out_ << " if " << *cond;
      out_ << '\n';
    } else if (cmd == "watch") {
      if (rest.empty())
        usage("watch TARGET");
      auto id = s.set_watchpoint(rest);
      out_ << "Watchpoint " << id << ": " << rest << '\n';
    } else if (cmd == "d" || cmd == "delete") {
      if (rest.empty()) {
        s.clear_all();
        out_ << "Deleted all breakpoints and watchpoints\n";
      } else {
        s.clear(id_arg(rest, "delete"));
        out_ << "Deleted " << rest << '\n';
      }
    } else if (cmd == "info") {
      if (rest == "marks") {
        return execute("marks");
      }
      if (s.breakpoints().empty() && s.watchpoints().empty())
        out_ << "No breakpoints or watchpoints\n";
      for (const auto &b : s.breakpoints()) {
        out_ << b.id << ": breakpoint at " << to_string(b.location) << " (pc " << b.pc << ")";
        if (b.condition)
          out_ << " if " << *b.condition;
        out_ << '\n';
      }
      for (const auto &w : s.watchpoints())
        out_ << w.id << ": watchpoint on " << w.expression << " (" << to_string(w.target) << ")\n";
    } else if (cmd == "c" || cmd == "continue") {
      report(s.resume());
    } else if (cmd == "s" || cmd == "step") {
      report(s.step_line());
    } else if (cmd == "si" || cmd == "stepi") {
      report(s.step_instruction());
    } else if (cmd == "r" || cmd == "restart") {
      report(s.restart());
    } else if (cmd == "pos") {
      const auto &st = s.machine().state();
      out_ << to_string(s.current_position()) << " (seq " << st.executed << ", "
           << status_name(st.status.kind) << ")\n";
    } else if (cmd == "bt") {
      std::size_t depth = 0;
      for (const auto &e : s.last_stop().stack)
        out_ << "#" << depth++ << " " << e.function << ":" << e.line << " (pc " << e.pc << ")\n";
    } else if (cmd == "out") {
      for (auto v : s.machine().state().output)
        out_ << v << '\n';
    } else if (cmd == "p" || cmd == "print") {
      if (rest.empty())
        usage("p EXPR");
      out_ << "= " << s.evaluate(rest) << '\n';
    } else if (cmd == "mark") {
      const auto &b = s.bookmark(rest);
      out_ << "Bookmark " << b.id << " at " << to_string(b.position);
      if (!b.annotation.empty())
        out_ << ": " << b.annotation;
      out_ << '\n';
    } else if (cmd == "marks") {
      if (s.bookmarks().empty())
        out_ << "No bookmarks\n";
      for (const auto &b : s.bookmarks()) {
        out_ << b.id << ": " << to_string(b.position);
        if (!b.annotation.empty())
          out_ << "  " << b.annotation;
        out_ << '\n';
      }
    } else if (cmd == "goto") {
      std::string mode;
      std::string target = head(rest, mode);
      if (target.empty())
        usage("goto ID | goto FN:LINE@TS [slow]");
      if (target.find(':') == std::string::npos) {
        report(s.goto_bookmark(id_arg(target, "goto")));
      } else {
        auto pos = parse_position(target);
        if (!pos)
          throw Error(ErrorCode::BadArguments, "expected FN:LINE@TS, got '" + target + "'");
        if (mode == "slow")
          report(s.goto_position_slow(*pos));
        else if (mode.empty() || mode == "fast")
          report(s.goto_position_fast(*pos));
        else
          usage("goto FN:LINE@TS [slow]");
      }
      out_ << "(trap activations: " << s.trap_activations()
           << ", predicate evaluations: " << s.predicate_evaluations() << ")\n";
    } else if (cmd == "gotots") {
      auto ts = parse_u64(rest);
      if (!ts)
        usage("gotots TS");
      report(goto_timestamp(s, *ts));
    } else if (cmd == "rwatch") {
      if (rest.empty())
        usage("rwatch TARGET");
      auto progress = [this](const Progress &p) {
        if (p.kind == Progress::Kind::PassStarted)
          out_ << "pass " << p.pass << "\n";
        else if (p.kind == Progress::Kind::WriteRecorded)
          out_ << "  W" << p.writes << " at " << p.message << '\n';
      };
      auto result = reverse_watchpoint(s, rest, progress);
      out_ << "last write before S: W" << result.writes.size() << " "
           << to_string(result.writes.back().target) << " = " << result.writes.back().value
           << '\n';
      report(result.stop);
    } else if (cmd == "bsearch") {
      std::istringstream words(rest);
      std::string w1, w2;
      words >> w1 >> w2;
      auto lo = parse_u64(w1);
      auto hi = parse_u64(w2);
      std::string predicate = rest;
      Timestamp lo_ts = 0, hi_ts = 0;
      if (lo && hi) {
        std::string tail;
        std::getline(words, tail);
        predicate = trim(tail);
        lo_ts = *lo;
        hi_ts = *hi;
      } else {
        RunOptions opts;
        opts.budget = s.options().budget;
        auto fin = tsdbg::run(s.machine().program_ptr(), s.machine().input(), opts);
        if (fin.budget_exhausted)
          throw Error(ErrorCode::BudgetExhausted, "the run does not finish; give LO HI");
        hi_ts = fin.state.tsstate.ts;
      }
      if (predicate.empty())
        usage("bsearch [LO HI] EXPR");
      auto progress = [this](const Progress &p) {
        if (p.kind == Progress::Kind::Probe)
          out_ << "  probe " << p.writes << ": ts " << p.ts << " -> "
               << (p.value ? "true" : "false") << '\n';
        else if (p.kind == Progress::Kind::Diagnostic)
          out_ << "  note: " << p.message << '\n';
      };
      out_ << "searching ts in [" << lo_ts << ", " << hi_ts << "] for '" << predicate << "'\n";
      auto outcome = binary_search(s, predicate, lo_ts, hi_ts, progress);
      out_ << "boundary ts " << outcome.boundary_ts << " after " << outcome.probes.size()
           << " probes" << (outcome.verified ? "" : " (unverified)") << '\n';
      report(outcome.stop);
    } else {
      throw Error(ErrorCode::UnknownCommand, "unknown command '" + cmd + "'; try help");
    }
  } catch (const Error &e) {
    out_ << "error [" << code_name(e.code()) << "]: " << e.what() << '\n';
  }
  return true;
}

void Repl::run(std::istream &in, bool echo) {
  std::string line;
  for (;;) {
    out_ << "(tsdbg) ";
    if (!std::getline(in, line)) {
      out_ << '\n';
      break;
    }
    if (echo)
      out_ << line << '\n';
    out_.flush();
    if (!execute(line))
      break;
    out_.flush();
  }
}

} // namespace tsdbg
