#include "tsdbg/autodebug.hpp"

#include "tsdbg/error.hpp"

namespace tsdbg {

namespace {

void notify(const ProgressFn &progress, Progress p) {
  if (progress)
    progress(p);
}

bool paused(const StopReport &r) {
  return r.status == RunStatus::Stopped && r.reason == TrapKind::Pause;
}

// Position of the instruction that just committed a write. The write does
// not touch ts, so the current ts is the one it ran under.
Position write_site(const Session &session) {
  const auto &st = session.machine().state();
  const auto &fn = session.program().functions[st.last_executed->function];
  return Position{Location{fn.name, fn.body[st.last_executed->pc].line}, st.tsstate.ts};
}

TrapTable private_watch(const WriteTarget &target, std::string_view label) {
  TrapTable table;
  table.add_watchpoint({WatchpointInfo{0, std::string(label), target}});
  return table;
}

} // namespace

StopReport goto_timestamp(Session &session, Timestamp ts) { return session.goto_timestamp(ts); }

ReverseWatchResult reverse_watchpoint(Session &session, std::string_view target,
                                      const ProgressFn &progress) {
  const auto s_seq = session.machine().state().executed;
  const auto s_pos = session.current_position();
  const bool s_finished = session.machine().finished();

  WriteTarget watched = [&] {
    Expr expr = [&] {
      try {
        return Expr::parse(target);
      } catch (const Error &e) {
        throw Error(ErrorCode::UnknownTarget, e.what());
      }
    }();
    return expr.as_write_target(session.machine());
  }();

  ReverseWatchResult result;
  auto back_to_s = [&] {
    session.replay_to(s_seq);
  };

  // Pass 1: count watch stops until S. S is found by ts (brake at S.ts)
  // and then by instruction count within that epoch.
  {
    TrapScope scope(session);
    session.restart();
    notify(progress, {Progress::Kind::PassStarted, 1, 0, s_pos.ts, false, ""});
    session.set_traps(private_watch(watched, target));
    if (s_pos.ts > 0)
      session.set_ref(s_pos.ts);
    for (;;) {
      auto r = session.drive(s_seq);
      if (paused(r))
        return {r, result.writes};
      if (r.status == RunStatus::Stopped && r.reason == TrapKind::Watchpoint) {
        WriteRecord w;
        w.position = write_site(session);
        w.target = r.write->target;
        w.value = r.write->value;
        w.ordinal = result.writes.size() + 1;
        w.seq = r.seq;
        result.writes.push_back(w);
        notify(progress, {Progress::Kind::WriteRecorded, 1, result.writes.size(), r.position.ts,
                          false, to_string(w.position)});
        if (r.seq == s_seq && s_finished)
          break;
        continue;
      }
      if (r.status == RunStatus::Stopped && r.reason == TrapKind::Brake) {
        session.set_ref(std::nullopt);
        continue;
      }
      const bool arrived = r.status == RunStatus::Stopped && r.reason == TrapKind::Step &&
                           r.seq == s_seq && r.position == s_pos;
      const bool arrived_at_end = s_finished && r.status != RunStatus::Stopped &&
                                  r.seq == s_seq && r.position == s_pos;
      if (arrived || arrived_at_end)
        break;
      throw Error(ErrorCode::PositionNotReached,
                  "replay diverged before " + to_string(s_pos) + " (" + describe(r) + ")");
    }
  }

  if (result.writes.empty()) {
    back_to_s();
    throw Error(ErrorCode::NoWritesBeforeS,
                "no write to '" + std::string(target) + "' before " + to_string(s_pos));
  }

  // Pass 2: brake at Wn's ts, then let the data trap fire once for every
  // write of that epoch up to and including Wn, so the session stops just
  // after Wn commits.
  const auto &last = result.writes.back();
  std::size_t in_epoch = 0;
  for (const auto &w : result.writes)
    if (w.position.ts == last.position.ts)
      ++in_epoch;

  notify(progress, {Progress::Kind::PassStarted, 2, result.writes.size(), last.position.ts,
                    false, to_string(last.position)});
  StopReport landing;
  {
    auto r = session.goto_timestamp(last.position.ts);
    if (paused(r))
      return {r, result.writes};
    TrapScope scope(session);
    session.set_traps(private_watch(watched, target));
    for (std::size_t k = 0; k < in_epoch; ++k) {
      r = session.resume();
      if (paused(r))
        return {r, result.writes};
      if (r.status != RunStatus::Stopped || r.reason != TrapKind::Watchpoint)
        throw Error(ErrorCode::PositionNotReached,
                    "replay diverged before " + to_string(last.position) + " (" + describe(r) +
                        ")");
    }
    if (r.seq != last.seq || write_site(session) != last.position || r.write->value != last.value)
      throw Error(ErrorCode::PositionNotReached,
                  "second pass landed at " + to_string(r.position) + ", expected " +
                      to_string(last.position));
    landing = r;
  }
  landing.breakpoint.reset();
  landing.watched = session.snapshot(TrapKind::Watchpoint).watched;
  result.stop = landing;
  session.set_last_stop(landing);
  return result;
}

SearchOutcome binary_search(Session &session, std::string_view predicate, Timestamp lo,
                            Timestamp hi, const ProgressFn &progress) {
  if (lo >= hi)
    throw Error(ErrorCode::BadArguments, "binary search needs lo < hi");
  auto expr = Expr::parse(predicate);
  expr.check(session.program());

  SearchOutcome out;
  auto probe = [&](Timestamp ts) -> bool {
    Probe p{ts, false, true};
    StopReport r;
    try {
      r = session.goto_timestamp(ts);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::TimestampUnreachable)
        throw;
      p.reachable = false;
      notify(progress, {Progress::Kind::Diagnostic, 0, 0, ts, false,
                        "ts " + std::to_string(ts) + " unreachable; treated as false"});
    }
    if (p.reachable) {
      if (paused(r))
        throw Error(ErrorCode::NotRunning, "binary search interrupted by pause");
      p.value = expr.evaluate(session.machine()) != 0;
    }
    out.probes.push_back(p);
    notify(progress, {Progress::Kind::Probe, 0, out.probes.size(), ts, p.value, ""});
    return p.value;
  };

  if (!probe(lo))
    throw Error(ErrorCode::NotMonotoneAtEndpoints,
                "predicate '" + std::string(predicate) + "' is false at lo = " + std::to_string(lo));
  if (probe(hi))
    throw Error(ErrorCode::NotMonotoneAtEndpoints,
                "predicate '" + std::string(predicate) + "' is true at hi = " + std::to_string(hi));

  while (hi - lo > 1) {
    const Timestamp mid = lo + (hi - lo) / 2;
    if (probe(mid))
      lo = mid;
    else
      hi = mid;
  }

  out.boundary_ts = hi;
  for (const auto &p : out.probes)
    if (p.ts == hi - 1 && p.value)
      out.verified = true;

  try {
    out.stop = session.goto_timestamp(hi);
  } catch (const Error &e) {
    if (e.code() != ErrorCode::TimestampUnreachable)
      throw;
    out.stop = session.replay_to(session.options().budget);
  }
  return out;
}

} // namespace tsdbg
