#include "tsdbg/protocol.hpp"

#include "tsdbg/assembler.hpp"
#include "tsdbg/autodebug.hpp"
#include "tsdbg/error.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <streambuf>
#include <thread>

namespace tsdbg {

namespace {

[[noreturn]] void bad_args(const std::string &msg) { throw Error(ErrorCode::BadArguments, msg); }

const Json &require(const Json &args, const char *key) {
  if (!args.contains(key))
    bad_args(std::string("missing argument '") + key + "'");
  return args.at(key);
}

std::string str_arg(const Json &args, const char *key) {
  const auto &v = require(args, key);
  if (!v.is_string())
    bad_args(std::string("argument '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t int_arg(const Json &args, const char *key) {
  const auto &v = require(args, key);
  if (!v.is_number_integer())
    bad_args(std::string("argument '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t uint_arg(const Json &args, const char *key) {
  auto v = int_arg(args, key);
  if (v < 0)
    bad_args(std::string("argument '") + key + "' must not be negative");
  return static_cast<std::uint64_t>(v);
}

std::optional<std::string> opt_str(const Json &args, const char *key) {
  if (!args.contains(key) || args.at(key).is_null())
    return std::nullopt;
  return str_arg(args, key);
}

Position position_arg(const Json &args) {
  auto line = int_arg(args, "line");
  if (line <= 0 || line > std::numeric_limits<int>::max())
    bad_args("argument 'line' must be a positive line number");
  return Position{Location{str_arg(args, "function"), static_cast<int>(line)},
                  uint_arg(args, "ts")};
}

Json progress_json(const Progress &p) {
  switch (p.kind) {
  case Progress::Kind::PassStarted:
    return Json{{"kind", "pass-started"}, {"pass", p.pass}, {"writes", p.writes}, {"ts", p.ts}};
  case Progress::Kind::WriteRecorded:
    return Json{{"kind", "write"},
                {"pass", p.pass},
                {"writes", p.writes},
                {"ts", p.ts},
                {"position", p.message}};
  case Progress::Kind::Probe:
    return Json{{"kind", "probe"}, {"probe", p.writes}, {"ts", p.ts}, {"value", p.value}};
  case Progress::Kind::Diagnostic:
    return Json{{"kind", "diagnostic"}, {"ts", p.ts}, {"message", p.message}};
  }
  return {};
}

Json trap_list(const Session &session) {
  Json out = Json::array();
  for (const auto &b : session.breakpoints()) {
    Json j{{"id", b.id}, {"kind", "breakpoint"}, {"location", to_json(b.location)}, {"pc", b.pc}};
    j["condition"] = b.condition ? Json(*b.condition) : Json(nullptr);
    out.push_back(std::move(j));
  }
  for (const auto &w : session.watchpoints())
    out.push_back(Json{{"id", w.id},
                       {"kind", "watchpoint"},
                       {"expression", w.expression},
                       {"target", to_json(w.target)}});
  return out;
}

Json counters(const Session &session) {
  return Json{{"trap_activations", session.trap_activations()},
              {"predicate_evaluations", session.predicate_evaluations()}};
}

std::optional<Timestamp> final_ts(const Session &session) {
  RunOptions opts;
  opts.budget = session.options().budget;
  auto r = run(session.machine().program_ptr(), session.machine().input(), opts);
  if (r.budget_exhausted)
    return std::nullopt;
  return r.state.tsstate.ts;
}

} // namespace

const std::vector<std::string> &ProtocolServer::verbs() {
  static const std::vector<std::string> names = {
      "initialize",   "source",        "restart",   "break",       "watch",
      "clear",        "breakpoints",   "continue",  "step",        "stepi",
      "position",     "goto_position", "goto_timestamp", "bookmark", "bookmarks",
      "goto_bookmark", "rwatch",       "bsearch",   "evaluate",    "output",
      "pause",        "disconnect"};
  return names;
}

ProtocolServer::ProtocolServer(Session &session, Sink sink)
    : session_(session), sink_(std::move(sink)) {}

void ProtocolServer::emit(const Json &message) {
  std::lock_guard lock(emit_mutex_);
  sink_(message.dump());
}

void ProtocolServer::respond_ok(const Json &id, Json result) {
  emit(Json{{"id", id}, {"ok", true}, {"result", std::move(result)}});
}

void ProtocolServer::respond_error(const Json &id, std::string_view code,
                                   const std::string &message) {
  emit(Json{{"id", id}, {"ok", false}, {"error", Json{{"code", code}, {"message", message}}}});
}

void ProtocolServer::handle_pause(const Json &id) {
  session_.request_pause();
  respond_ok(id, Json::object());
}

void ProtocolServer::emit_state() {
  const auto &out = session_.machine().state().output;
  const bool extends = out.size() >= reported_output_.size() &&
                       std::equal(reported_output_.begin(), reported_output_.end(), out.begin());
  if (!extends) {
    emit(Json{{"type", "output"}, {"payload", Json{{"reset", true}, {"values", out}}}});
  } else if (out.size() > reported_output_.size()) {
    std::vector<Value> fresh(out.begin() + static_cast<std::ptrdiff_t>(reported_output_.size()),
                             out.end());
    emit(Json{{"type", "output"}, {"payload", Json{{"reset", false}, {"values", fresh}}}});
  }
  reported_output_ = out;

  const auto &report = session_.last_stop();
  const char *type = report.status == RunStatus::Stopped ? "stopped" : "terminated";
  emit(Json{{"type", type}, {"payload", to_json(report)}});
}

void ProtocolServer::handle_line(const std::string &line) {
  Json request;
  try {
    request = Json::parse(line);
  } catch (const Json::exception &e) {
    respond_error(nullptr, "bad-message", std::string("not a JSON record: ") + e.what());
    return;
  }
  if (!request.is_object() || !request.contains("id") || !request.at("id").is_number_integer() ||
      !request.contains("cmd") || !request.at("cmd").is_string()) {
    respond_error(nullptr, "bad-message", "a request needs an integer 'id' and a string 'cmd'");
    return;
  }
  const Json id = request.at("id");
  const auto cmd = request.at("cmd").get<std::string>();
  Json args = request.contains("args") ? request.at("args") : Json::object();
  if (args.is_null())
    args = Json::object();
  if (!args.is_object()) {
    respond_error(id, "bad-message", "'args' must be an object");
    return;
  }
  if (cmd == "pause") {
    handle_pause(id);
    return;
  }

  session_.clear_pause();
  bool moved = false;
  const auto before = session_.last_stop();
  try {
    auto result = dispatch(cmd, args, moved);
    respond_ok(id, std::move(result));
  } catch (const Error &e) {
    respond_error(id, code_name(e.code()), e.what());
    moved = moved && !(session_.last_stop() == before);
  } catch (const std::exception &e) {
    respond_error(id, "internal", e.what());
  }
  if (moved)
    emit_state();
}

Json ProtocolServer::dispatch(const std::string &cmd, const Json &args, bool &moved) {
  auto &s = session_;
  if (cmd == "initialize") {
    Json functions = Json::array();
    for (const auto &f : s.program().functions)
      functions.push_back(f.name);
    Json globals = Json::array();
    for (const auto &g : s.program().globals)
      globals.push_back(g.name);
    auto fin = final_ts(s);
    Json r{{"functions", functions}, {"globals", globals}, {"verbs", verbs()}};
    r["final_ts"] = fin ? Json(*fin) : Json(nullptr);
    r["position"] = to_json(s.current_position());
    return r;
  }
  if (cmd == "source") {
    if (auto fn = opt_str(args, "function")) {
      const auto *f = s.program().find_function(*fn);
      if (!f)
        throw Error(ErrorCode::UnknownFunction, "unknown function '" + *fn + "'");
      Program one;
      one.functions.push_back(*f);
      return Json{{"text", disassemble(one)}};
    }
    return Json{{"text", disassemble(s.program())}};
  }
  if (cmd == "breakpoints")
    return Json{{"traps", trap_list(s)}};
  if (cmd == "bookmarks") {
    Json list = Json::array();
    for (const auto &b : s.bookmarks())
      list.push_back(to_json(b));
    return Json{{"bookmarks", list}};
  }
  if (cmd == "position") {
    const auto &st = s.machine().state();
    return Json{{"position", to_json(s.current_position())},
                {"seq", st.executed},
                {"status", status_name(st.status.kind)}};
  }
  if (cmd == "output")
    return Json{{"values", s.machine().state().output}};
  if (cmd == "evaluate")
    return Json{{"value", s.evaluate(str_arg(args, "expression"))}};
  if (cmd == "disconnect") {
    closed_ = true;
    return Json::object();
  }

  if (cmd == "break") {
    auto line = int_arg(args, "line");
    if (line <= 0 || line > std::numeric_limits<int>::max())
      bad_args("argument 'line' must be a positive line number");
    auto id = s.set_breakpoint(Location{str_arg(args, "function"), static_cast<int>(line)},
                               opt_str(args, "condition"));
    return Json{{"id", id}};
  }
  if (cmd == "watch")
    return Json{{"id", s.set_watchpoint(str_arg(args, "target"))}};
  if (cmd == "clear") {
    if (args.contains("id")) {
      auto id = int_arg(args, "id");
      if (id < 0 || id > std::numeric_limits<int>::max())
        throw Error(ErrorCode::UnknownBreakpoint, "no trap with id " + std::to_string(id));
      s.clear(static_cast<int>(id));
    } else {
      s.clear_all();
    }
    return Json::object();
  }
  if (cmd == "bookmark") {
    auto annotation = opt_str(args, "annotation").value_or("");
    return to_json(s.bookmark(annotation));
  }

  // Everything below moves the machine.
  moved = true;
  if (cmd == "restart") {
    s.restart();
    return Json::object();
  }
  if (cmd == "continue") {
    s.resume();
    return Json::object();
  }
  if (cmd == "step") {
    s.step_line();
    return Json::object();
  }
  if (cmd == "stepi") {
    s.step_instruction();
    return Json::object();
  }
  if (cmd == "goto_position") {
    auto pos = position_arg(args);
    auto mode = opt_str(args, "mode").value_or("fast");
    if (mode == "fast")
      s.goto_position_fast(pos);
    else if (mode == "slow")
      s.goto_position_slow(pos);
    else
      bad_args("argument 'mode' must be \"fast\" or \"slow\"");
    return counters(s);
  }
  if (cmd == "goto_timestamp") {
    goto_timestamp(s, uint_arg(args, "ts"));
    return Json::object();
  }
  if (cmd == "goto_bookmark") {
    auto id = int_arg(args, "id");
    if (id < 0 || id > std::numeric_limits<int>::max())
      throw Error(ErrorCode::UnknownBookmark, "no bookmark with id " + std::to_string(id));
    s.goto_bookmark(static_cast<int>(id));
    return counters(s);
  }
  if (cmd == "rwatch") {
    auto progress = [this](const Progress &p) {
      emit(Json{{"type", "progress"}, {"payload", progress_json(p)}});
    };
    auto result = reverse_watchpoint(s, str_arg(args, "target"), progress);
    Json writes = Json::array();
    for (const auto &w : result.writes)
      writes.push_back(to_json(w));
    return Json{{"writes", writes}};
  }
  if (cmd == "bsearch") {
    auto predicate = str_arg(args, "predicate");
    Timestamp lo = args.contains("lo") ? uint_arg(args, "lo") : 0;
    Timestamp hi = 0;
    if (args.contains("hi")) {
      hi = uint_arg(args, "hi");
    } else {
      auto fin = final_ts(s);
      if (!fin)
        bad_args("the run does not finish within the budget; pass 'hi'");
      hi = *fin;
    }
    auto progress = [this](const Progress &p) {
      emit(Json{{"type", "progress"}, {"payload", progress_json(p)}});
    };
    auto outcome = binary_search(s, predicate, lo, hi, progress);
    auto j = to_json(outcome);
    j["lo"] = lo;
    j["hi"] = hi;
    return j;
  }

  moved = false;
  throw Error(ErrorCode::UnknownCommand, "unknown command '" + cmd + "'");
}

void serve_stream(Session &session, std::istream &in, std::ostream &out) {
  ProtocolServer server(session, [&out](const std::string &line) {
    out << line << '\n';
    out.flush();
  });

  std::mutex m;
  std::condition_variable cv;
  std::deque<std::optional<std::string>> queue;

  std::thread reader([&] {
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.empty())
        continue;
      // A pause has to overtake the command it interrupts.
      auto j = Json::parse(line, nullptr, false);
      if (j.is_object() && j.contains("cmd") && j["cmd"] == "pause" && j.contains("id") &&
          j["id"].is_number_integer()) {
        server.handle_pause(j["id"]);
        continue;
      }
      const bool last = j.is_object() && j.contains("cmd") && j["cmd"] == "disconnect";
      {
        std::lock_guard lock(m);
        queue.emplace_back(line);
      }
      cv.notify_one();
      if (last)
        break;
    }
    {
      std::lock_guard lock(m);
      queue.emplace_back(std::nullopt);
    }
    cv.notify_one();
  });

  for (;;) {
    std::optional<std::string> line;
    {
      std::unique_lock lock(m);
      cv.wait(lock, [&] { return !queue.empty(); });
      line = std::move(queue.front());
      queue.pop_front();
    }
    if (!line || server.closed())
      break;
    server.handle_line(*line);
  }
  reader.join();
}

namespace {

// Minimal bidirectional streambuf over a connected socket.
class SocketBuf : public std::streambuf {
public:
  explicit SocketBuf(int fd) : fd_(fd) { setg(in_, in_, in_); }

protected:
  int_type underflow() override {
    auto n = ::recv(fd_, in_, sizeof in_, 0);
    if (n <= 0)
      return traits_type::eof();
    setg(in_, in_, in_ + n);
    return traits_type::to_int_type(*gptr());
  }
  int_type overflow(int_type ch) override {
    if (ch != traits_type::eof()) {
      char c = traits_type::to_char_type(ch);
      out_.push_back(c);
    }
    return ch;
  }
  std::streamsize xsputn(const char *s, std::streamsize n) override {
    out_.append(s, static_cast<std::size_t>(n));
    return n;
  }
  int sync() override {
    std::size_t off = 0;
    while (off < out_.size()) {
      auto n = ::send(fd_, out_.data() + off, out_.size() - off, MSG_NOSIGNAL);
      if (n <= 0)
        return -1;
      off += static_cast<std::size_t>(n);
    }
    out_.clear();
    return 0;
  }

private:
  int fd_;
  char in_[4096];
  std::string out_;
};

} // namespace

void serve_tcp(Session &session, int port, int max_clients,
               const std::function<void(int)> &on_listening) {
  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0)
    throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
  int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listener, reinterpret_cast<sockaddr *>(&addr), sizeof addr) < 0 ||
      ::listen(listener, 1) < 0) {
    auto msg = std::string("bind: ") + std::strerror(errno);
    ::close(listener);
    throw Error(ErrorCode::Io, msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr *>(&addr), &len);
  if (on_listening)
    on_listening(ntohs(addr.sin_port));

  for (int served = 0; max_clients == 0 || served < max_clients; ++served) {
    int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0)
      break;
    {
      SocketBuf buf(fd);
      std::istream in(&buf);
      std::ostream out(&buf);
      serve_stream(session, in, out);
    }
    ::close(fd);
  }
  ::close(listener);
}

} // namespace tsdbg
