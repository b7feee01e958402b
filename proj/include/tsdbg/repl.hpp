#pragma once

#include "tsdbg/control.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace tsdbg {

/// GDB-flavoured command interpreter over one session.
class Repl {
public:
  Repl(Session &session, std::ostream &out);

  /// Runs one command line. Returns false after `quit`.
  bool execute(const std::string &line);

  /// Reads commands until EOF or `quit`. With `echo`, every command is
  /// written after the prompt, which keeps non-interactive transcripts
  /// readable.
  void run(std::istream &in, bool echo);

  static const std::vector<std::string> &commands();

private:
  void report(const StopReport &r);
  void flush_output();

  Session &session_;
  std::ostream &out_;
  std::vector<Value> reported_output_;
};

} // namespace tsdbg
