#pragma once

#include "tsdbg/control.hpp"
#include "tsdbg/records.hpp"

#include <functional>
#include <iosfwd>
#include <mutex>
#include <string>
#include <vector>

namespace tsdbg {

/// Line-delimited JSON debug protocol over one session.
///
///   request   {"id": 1, "cmd": "continue", "args": {...}}
///   response  {"id": 1, "ok": true, "result": {...}}
///             {"id": 1, "ok": false, "error": {"code": "...", "message": "..."}}
///   event     {"type": "stopped" | "output" | "terminated" | "progress", "payload": {...}}
///
/// Progress events stream while a command runs; output and stopped or
/// terminated events follow the response of every command that moves the
/// machine.
class ProtocolServer {
public:
  /// Receives one complete message without the trailing newline.
  using Sink = std::function<void(const std::string &line)>;

  ProtocolServer(Session &session, Sink sink);

  /// Handles one request line. Thread-compatible; callers serialize.
  void handle_line(const std::string &line);

  /// Answers a `pause` request and interrupts the running command. Safe to
  /// call from a reader thread while handle_line runs on another.
  void handle_pause(const Json &id);

  [[nodiscard]] bool closed() const { return closed_; }

  /// Names of every verb, for schema checks.
  static const std::vector<std::string> &verbs();

private:
  void emit(const Json &message);
  void respond_ok(const Json &id, Json result);
  void respond_error(const Json &id, std::string_view code, const std::string &message);
  void emit_state();
  Json dispatch(const std::string &cmd, const Json &args, bool &moved);

  Session &session_;
  Sink sink_;
  std::mutex emit_mutex_;
  std::vector<Value> reported_output_;
  bool closed_ = false;
};

/// Reads requests from `in` until EOF or `disconnect`, writing messages to
/// `out`. A reader thread answers `pause` immediately so that it can
/// interrupt a long `continue`.
void serve_stream(Session &session, std::istream &in, std::ostream &out);

/// Accepts one client at a time on 127.0.0.1:`port` and serves it with
/// serve_stream framing. Returns after `max_clients` clients when nonzero.
void serve_tcp(Session &session, int port, int max_clients = 0,
               const std::function<void(int)> &on_listening = {});

} // namespace tsdbg
