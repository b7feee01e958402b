#include "tsdbg/control.hpp"

#include "tsdbg/error.hpp"

#include <algorithm>

namespace tsdbg {

namespace {

std::uint64_t code_key(std::size_t function, std::size_t pc) {
  return (static_cast<std::uint64_t>(function) << 32) | static_cast<std::uint64_t>(pc);
}

struct LineKey {
  std::size_t depth = 0;
  std::size_t function = 0;
  int line = 0;

  bool operator==(const LineKey &) const = default;
};

LineKey line_key(const Machine &m) {
  const auto &f = m.state().frames.back();
  const auto &body = m.program().functions[f.function].body;
  return {m.state().frames.size(), f.function, f.pc < body.size() ? body[f.pc].line : 0};
}

} // namespace

std::string describe(const StopReport &r) {
  std::string out;
  switch (r.status) {
  case RunStatus::Exited:
    out = "exited with code " + std::to_string(r.exit_code);
    break;
  case RunStatus::Faulted:
    out = "faulted (" + std::string(r.fault ? fault_name(r.fault->kind) : "?") + ")";
    if (r.fault && !r.fault->detail.empty())
      out += ": " + r.fault->detail;
    break;
  default:
    out = "stopped (" + std::string(trap_name(r.reason));
    if (r.breakpoint)
      out += " " + std::to_string(*r.breakpoint);
    out += ")";
    break;
  }
  out += " at " + to_string(r.position);
  if (r.write)
    out += ", wrote " + to_string(r.write->target) + " = " + std::to_string(r.write->value);
  if (!r.message.empty())
    out += ": " + r.message;
  return out;
}

void TrapTable::add_breakpoint(BreakEntry entry) {
  breaks_.push_back(std::move(entry));
  reindex();
}

bool TrapTable::remove(int id) {
  auto b = std::find_if(breaks_.begin(), breaks_.end(),
                        [&](const BreakEntry &e) { return e.info.id == id; });
  if (b != breaks_.end()) {
    breaks_.erase(b);
    reindex();
    return true;
  }
  auto w = std::find_if(watches_.begin(), watches_.end(),
                        [&](const WatchEntry &e) { return e.info.id == id; });
  if (w != watches_.end()) {
    watches_.erase(w);
    return true;
  }
  return false;
}

void TrapTable::clear() {
  breaks_.clear();
  watches_.clear();
  index_.clear();
}

void TrapTable::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < breaks_.size(); ++i)
    index_[code_key(breaks_[i].function, breaks_[i].info.pc)].push_back(i);
}

const std::vector<std::size_t> *TrapTable::breaks_at(std::size_t function, std::size_t pc) const {
  if (index_.empty())
    return nullptr;
  auto it = index_.find(code_key(function, pc));
  return it == index_.end() ? nullptr : &it->second;
}

const TrapTable::WatchEntry *TrapTable::watch_for(const WriteTarget &target) const {
  for (const auto &w : watches_)
    if (w.info.target == target)
      return &w;
  return nullptr;
}

Session::Session(std::shared_ptr<const Program> program, std::vector<Value> input,
                 SessionOptions options)
    : machine_(std::move(program), std::move(input)), options_(options) {
  last_stop_ = snapshot(TrapKind::Entry);
}

StopReport Session::restart() {
  machine_.reset();
  skip_break_seq_.reset();
  last_stop_ = snapshot(TrapKind::Entry);
  return last_stop_;
}

std::size_t Session::resolve(const Location &location) const {
  const auto *fn = program().find_function(location.function);
  if (!fn)
    throw Error(ErrorCode::UnresolvableLocation, "no function '" + location.function + "'");
  auto pc = resolve_line(*fn, location.line);
  if (!pc)
    throw Error(ErrorCode::UnresolvableLocation, "no instruction at " + to_string(location));
  return *pc;
}

int Session::set_breakpoint(const Location &location, std::optional<std::string> condition) {
  auto entry = make_break(location, std::move(condition), next_trap_id_);
  ++next_trap_id_;
  traps_.add_breakpoint(std::move(entry));
  return traps_.breakpoints().back().info.id;
}

int Session::set_watchpoint(std::string_view target) {
  Expr expr = [&] {
    try {
      return Expr::parse(target);
    } catch (const Error &e) {
      throw Error(ErrorCode::UnknownTarget, e.what());
    }
  }();
  return set_watchpoint(expr.as_write_target(machine_), std::string(target));
}

int Session::set_watchpoint(const WriteTarget &target, std::string label) {
  const int id = next_trap_id_++;
  traps_.add_watchpoint({WatchpointInfo{id, std::move(label), target}});
  return id;
}

void Session::clear(int id) {
  if (!traps_.remove(id))
    throw Error(ErrorCode::UnknownBreakpoint, "no breakpoint or watchpoint " + std::to_string(id));
}

void Session::clear_all() { traps_.clear(); }

std::vector<BreakpointInfo> Session::breakpoints() const {
  std::vector<BreakpointInfo> out;
  for (const auto &b : traps_.breakpoints())
    out.push_back(b.info);
  return out;
}

std::vector<WatchpointInfo> Session::watchpoints() const {
  std::vector<WatchpointInfo> out;
  for (const auto &w : traps_.watchpoints())
    out.push_back(w.info);
  return out;
}

Value Session::evaluate(std::string_view expression) const {
  auto expr = Expr::parse(expression);
  expr.check(program());
  return expr.evaluate(machine_);
}

StopReport Session::snapshot(TrapKind reason) const {
  StopReport r;
  const auto &st = machine_.state();
  r.status = st.status.kind == RunStatus::Running ? RunStatus::Stopped : st.status.kind;
  r.reason = reason;
  r.position = current_position();
  r.seq = st.executed;
  r.exit_code = st.status.exit_code;
  r.fault = st.status.fault;
  const auto &p = program();
  for (auto it = st.frames.rbegin(); it != st.frames.rend(); ++it) {
    const auto &fn = p.functions[it->function];
    r.stack.push_back({fn.name, it->pc, it->pc < fn.body.size() ? fn.body[it->pc].line : 0});
  }
  for (const auto &w : traps_.watchpoints()) {
    WatchedValue v{w.info.id, w.info.expression, std::nullopt};
    if (w.info.target.kind == WriteTarget::Kind::Global) {
      v.value = machine_.global(w.info.target.name);
    } else if (w.info.target.kind == WriteTarget::Kind::Field) {
      if (const auto *rec = machine_.record(w.info.target.handle)) {
        auto f = rec->find(w.info.target.name);
        v.value = f == rec->end() ? 0 : f->second;
      }
    }
    r.watched.push_back(std::move(v));
  }
  return r;
}

StopReport Session::stop(TrapKind reason) {
  MachineStatus status = machine_.state().status;
  status.kind = RunStatus::Stopped;
  status.trap = reason;
  machine_.set_status(status);
  last_stop_ = snapshot(reason);
  return last_stop_;
}

StopReport Session::finish_report() {
  last_stop_ = snapshot(machine_.state().status.trap);
  return last_stop_;
}

void Session::require_running() const {
  if (machine_.finished())
    throw Error(ErrorCode::NotRunning,
                "the program has " + std::string(status_name(machine_.state().status.kind)) +
                    "; restart first");
}

StopReport Session::run(Mode mode, std::optional<std::uint64_t> until_seq) {
  require_running();
  const auto origin = line_key(machine_);
  bool first = true;
  for (;;) {
    if (machine_.finished())
      return finish_report();
    const auto seq = machine_.state().executed;
    if (until_seq && seq >= *until_seq)
      return stop(TrapKind::Step);
    if (pause_requested_.exchange(false))
      return stop(TrapKind::Pause);
    if (seq >= options_.budget) {
      stop(TrapKind::Pause);
      throw Error(ErrorCode::BudgetExhausted,
                  "step budget of " + std::to_string(options_.budget) + " instructions exhausted");
    }

    const auto &frame = machine_.state().frames.back();
    if (skip_break_seq_ != seq) {
      if (const auto *hits = traps_.breaks_at(frame.function, frame.pc)) {
        for (auto idx : *hits) {
          const auto &bp = traps_.breakpoints()[idx];
          bool hit = true;
          if (bp.condition) {
            ++predicate_evaluations_;
            try {
              hit = bp.condition->evaluate(machine_) != 0;
            } catch (const Error &e) {
              skip_break_seq_ = seq;
              auto r = stop(TrapKind::PredicateError);
              r.breakpoint = bp.info.id;
              r.message = e.what();
              last_stop_ = r;
              return r;
            }
          }
          if (hit) {
            ++trap_activations_;
            skip_break_seq_ = seq;
            auto r = stop(bp.condition ? TrapKind::ConditionalBreakpoint : TrapKind::Breakpoint);
            r.breakpoint = bp.info.id;
            last_stop_ = r;
            return r;
          }
        }
      }
    }

    if (!first) {
      if (mode == Mode::StepInstruction)
        return stop(TrapKind::Step);
      if (mode == Mode::StepLine && !(line_key(machine_) == origin))
        return stop(TrapKind::Step);
    }

    auto result = machine_.step();
    first = false;
    if (result.brake) {
      ++trap_activations_;
      return stop(TrapKind::Brake);
    }
    if (result.write) {
      if (const auto *w = traps_.watch_for(result.write->target)) {
        ++trap_activations_;
        auto r = stop(TrapKind::Watchpoint);
        r.breakpoint = w->info.id;
        r.write = result.write;
        // A fault or exit on the same instruction wins over the watch stop.
        if (machine_.finished())
          return finish_report();
        last_stop_ = r;
        return r;
      }
    }
  }
}

StopReport Session::resume() { return run(Mode::Continue, std::nullopt); }
StopReport Session::step_line() { return run(Mode::StepLine, std::nullopt); }
StopReport Session::step_instruction() { return run(Mode::StepInstruction, std::nullopt); }

StopReport Session::drive(std::optional<std::uint64_t> until_seq) {
  return run(Mode::Continue, until_seq);
}

TrapTable::BreakEntry Session::make_break(const Location &location,
                                          std::optional<std::string> condition, int id) const {
  TrapTable::BreakEntry entry;
  entry.info.id = id;
  entry.info.pc = resolve(location);
  entry.info.location = location;
  entry.function = *program().function_index(location.function);
  if (condition) {
    auto expr = Expr::parse(*condition);
    expr.check(program());
    entry.condition = std::move(expr);
    entry.info.condition = std::move(condition);
  }
  return entry;
}

StopReport Session::with_private_traps(const std::function<StopReport()> &procedure) {
  StopReport r;
  try {
    TrapScope scope(*this);
    r = procedure();
  } catch (...) {
    last_stop_.watched = snapshot(last_stop_.reason).watched;
    if (last_stop_.breakpoint == 0)
      last_stop_.breakpoint.reset();
    throw;
  }
  // Temporary traps carry id 0 and never surface; watched values are those
  // of the user's table.
  if (r.breakpoint == 0)
    r.breakpoint.reset();
  r.watched = snapshot(r.reason).watched;
  last_stop_ = r;
  return r;
}

StopReport Session::replay_to(std::uint64_t seq) {
  return with_private_traps([&] {
    restart();
    return seq == 0 ? last_stop_ : drive(seq);
  });
}

StopReport Session::goto_timestamp(Timestamp ts) {
  return with_private_traps([&] {
    restart();
    if (ts == 0) {
      ++trap_activations_;
      return last_stop_;
    }
    machine_.set_ref(ts);
    auto r = drive();
    machine_.set_ref(std::nullopt);
    if (r.reason == TrapKind::Pause && r.status == RunStatus::Stopped)
      return r;
    if (r.status != RunStatus::Stopped || r.reason != TrapKind::Brake)
      throw Error(ErrorCode::TimestampUnreachable,
                  "execution ended at ts " + std::to_string(r.position.ts) +
                      " before reaching ts " + std::to_string(ts));
    return r;
  });
}

StopReport Session::goto_position_slow(const Position &position) {
  auto entry = make_break(position.location, "ts == " + std::to_string(position.ts), 0);
  const auto pc = entry.info.pc;
  return with_private_traps([&] {
    restart();
    reset_counters();
    traps_.add_breakpoint(std::move(entry));
    auto r = drive();
    if (r.reason == TrapKind::Pause && r.status == RunStatus::Stopped)
      return r;
    if (r.status != RunStatus::Stopped || r.reason != TrapKind::ConditionalBreakpoint ||
        r.position != position || r.stack.front().pc != pc)
      throw Error(ErrorCode::PositionNotReached,
                  to_string(position) + " was not reached (" + describe(r) + ")");
    return r;
  });
}

StopReport Session::goto_position_fast(const Position &position) {
  auto entry = make_break(position.location, std::nullopt, 0);
  const auto pc = entry.info.pc;
  return with_private_traps([&] {
    restart();
    reset_counters();

    // Step 1: brake when ts becomes T. ts starts at 0 and the first
    // increment yields 1, so T = 0 is served by the entry stop instead.
    if (position.ts == 0) {
      ++trap_activations_;
    } else {
      machine_.set_ref(position.ts);
      auto first = drive();
      machine_.set_ref(std::nullopt);
      if (first.reason == TrapKind::Pause && first.status == RunStatus::Stopped)
        return first;
      if (first.status != RunStatus::Stopped || first.reason != TrapKind::Brake)
        throw Error(ErrorCode::PositionNotReached,
                    to_string(position) + " was not reached: ts " +
                        std::to_string(position.ts) + " never occurs (" + describe(first) + ")");
    }

    // Step 2: static breakpoint at the location.
    traps_.add_breakpoint(std::move(entry));
    auto r = drive();
    if (r.reason == TrapKind::Pause && r.status == RunStatus::Stopped)
      return r;
    if (r.status != RunStatus::Stopped || r.reason != TrapKind::Breakpoint ||
        r.position != position || r.stack.front().pc != pc)
      throw Error(ErrorCode::PositionNotReached,
                  to_string(position) + " was not reached (" + describe(r) + ")");
    return r;
  });
}

const Bookmark &Session::bookmark(std::string annotation) {
  bookmarks_.push_back({next_bookmark_id_++, current_position(), std::move(annotation)});
  return bookmarks_.back();
}

StopReport Session::goto_bookmark(int id) {
  auto it = std::find_if(bookmarks_.begin(), bookmarks_.end(),
                         [&](const Bookmark &b) { return b.id == id; });
  if (it == bookmarks_.end())
    throw Error(ErrorCode::UnknownBookmark, "no bookmark " + std::to_string(id));
  return goto_position_fast(it->position);
}

} // namespace tsdbg
