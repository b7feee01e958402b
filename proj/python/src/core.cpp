#include "tsdbg/assembler.hpp"
#include "tsdbg/autodebug.hpp"
#include "tsdbg/control.hpp"
#include "tsdbg/error.hpp"
#include "tsdbg/image.hpp"
#include "tsdbg/instrument.hpp"
#include "tsdbg/protocol.hpp"
#include "tsdbg/records.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tsdbg;

namespace {

// Records cross the boundary as plain dicts and lists, mirroring the
// protocol's JSON.
py::object to_py(const Json &j) {
  switch (j.type()) {
  case Json::value_t::null: return py::none();
  case Json::value_t::boolean: return py::bool_(j.get<bool>());
  case Json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
  case Json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
  case Json::value_t::number_float: return py::float_(j.get<double>());
  case Json::value_t::string: return py::str(j.get<std::string>());
  case Json::value_t::array: {
    py::list out;
    for (const auto &e : j)
      out.append(to_py(e));
    return out;
  }
  case Json::value_t::object: {
    py::dict out;
    for (auto it = j.begin(); it != j.end(); ++it)
      out[py::str(it.key())] = to_py(it.value());
    return out;
  }
  default: return py::none();
  }
}

// pybind11 holders cannot be pointers to const; the core only ever sees a
// const view.
using ProgramPtr = std::shared_ptr<Program>;

ProgramPtr share(Program p) { return std::make_shared<Program>(std::move(p)); }

py::dict run_result(const RunResult &r) {
  const auto &st = r.state;
  py::dict d;
  d["status"] = std::string(status_name(st.status.kind));
  d["output"] = st.output;
  d["ts"] = st.tsstate.ts;
  d["executed"] = st.executed;
  d["exit_code"] = st.status.exit_code;
  if (st.status.fault) {
    py::dict f;
    f["kind"] = std::string(fault_name(st.status.fault->kind));
    f["seq"] = st.status.fault->seq;
    f["detail"] = st.status.fault->detail;
    d["fault"] = f;
  } else {
    d["fault"] = py::none();
  }
  d["budget_exhausted"] = r.budget_exhausted;
  return d;
}

// A protocol server whose messages are collected per request.
class ProtocolEndpoint {
public:
  ProtocolEndpoint(ProgramPtr program, std::vector<Value> input, std::uint64_t budget)
      : session_(std::move(program), std::move(input), SessionOptions{budget}),
        server_(session_, [this](const std::string &line) { pending_.push_back(line); }) {}

  std::vector<std::string> handle(const std::string &line) {
    pending_.clear();
    server_.handle_line(line);
    return std::move(pending_);
  }

  bool closed() const { return server_.closed(); }

private:
  Session session_;
  std::vector<std::string> pending_;
  ProtocolServer server_;
};

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Timestamp-based execution control for a deterministic mini-VM";

  // Leaked on purpose: the type must outlive every translated exception.
  static py::handle error_type =
      PyErr_NewException("tsdbg._core.TsdbgError", PyExc_RuntimeError, nullptr);
  m.attr("TsdbgError") = error_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const Error &e) {
      const std::string code(code_name(e.code()));
      py::object exc = error_type(code, e.what());
      exc.attr("code") = code;
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<Program, ProgramPtr>(m, "Program")
      .def_property_readonly("functions",
                             [](const Program &p) {
                               std::vector<std::string> names;
                               for (const auto &f : p.functions)
                                 names.push_back(f.name);
                               return names;
                             })
      .def_property_readonly("globals",
                             [](const Program &p) {
                               std::vector<std::string> names;
                               for (const auto &g : p.globals)
                                 names.push_back(g.name);
                               return names;
                             })
      .def_property_readonly("has_timestamps", [](const Program &p) { return has_timestamps(p); })
      .def("disassemble", [](const Program &p) { return disassemble(p); })
      .def("serialize",
           [](const Program &p) {
             auto bytes = serialize(p);
             return py::bytes(reinterpret_cast<const char *>(bytes.data()), bytes.size());
           })
      .def("__eq__", [](const Program &a, const Program &b) { return a == b; });

  m.def("assemble", [](const std::string &src) { return share(assemble(src)); }, py::arg("source"));
  m.def("deserialize",
        [](py::bytes data) {
          std::string s = data;
          std::vector<std::uint8_t> bytes(s.begin(), s.end());
          return share(deserialize(bytes));
        },
        py::arg("data"));
  m.def("load_program", [](const std::string &path) { return share(load_program(path)); },
        py::arg("path"));
  m.def(
      "instrument",
      [](const Program &p, std::optional<std::set<std::string>> only) {
        auto r = instrument(p, only);
        return py::make_tuple(share(std::move(r.program)), to_py(to_json(r.report)));
      },
      py::arg("program"), py::arg("only") = py::none());
  m.def(
      "verify_instrumentation",
      [](const Program &original, const Program &instrumented) {
        return verify_instrumentation(original, instrumented).violations;
      },
      py::arg("original"), py::arg("instrumented"));
  m.def(
      "run",
      [](ProgramPtr p, std::vector<Value> input, std::uint64_t budget) {
        RunOptions o;
        o.budget = budget;
        return run_result(run(std::move(p), std::move(input), o));
      },
      py::arg("program"), py::arg("input") = std::vector<Value>{},
      py::arg("budget") = kDefaultBudget);
  m.def(
      "trace",
      [](ProgramPtr p, std::vector<Value> input, std::uint64_t budget) {
        RunOptions o;
        o.budget = budget;
        o.trace = true;
        auto r = run(std::move(p), std::move(input), o);
        py::list out;
        for (const auto &e : *r.trace)
          out.append(to_py(to_json(e)));
        return out;
      },
      py::arg("program"), py::arg("input") = std::vector<Value>{},
      py::arg("budget") = kDefaultBudget);

  py::class_<Session>(m, "Session")
      .def(py::init([](ProgramPtr p, std::vector<Value> input, std::uint64_t budget) {
             return std::make_unique<Session>(std::move(p), std::move(input),
                                              SessionOptions{budget});
           }),
           py::arg("program"), py::arg("input") = std::vector<Value>{},
           py::arg("budget") = kDefaultBudget)
      .def("restart", [](Session &s) { return to_py(to_json(s.restart())); })
      .def(
          "set_breakpoint",
          [](Session &s, const std::string &function, int line, std::optional<std::string> cond) {
            return s.set_breakpoint(Location{function, line}, std::move(cond));
          },
          py::arg("function"), py::arg("line"), py::arg("condition") = py::none())
      .def("set_watchpoint",
           [](Session &s, const std::string &target) { return s.set_watchpoint(target); },
           py::arg("target"))
      .def("clear", &Session::clear, py::arg("id"))
      .def("clear_all", &Session::clear_all)
      .def("resume", [](Session &s) { return to_py(to_json(s.resume())); })
      .def("step", [](Session &s) { return to_py(to_json(s.step_line())); })
      .def("stepi", [](Session &s) { return to_py(to_json(s.step_instruction())); })
      .def(
          "goto_position",
          [](Session &s, const std::string &function, int line, Timestamp ts,
             const std::string &mode) {
            Position pos{Location{function, line}, ts};
            if (mode == "fast")
              return to_py(to_json(s.goto_position_fast(pos)));
            if (mode == "slow")
              return to_py(to_json(s.goto_position_slow(pos)));
            throw Error(ErrorCode::BadArguments, "mode must be 'fast' or 'slow'");
          },
          py::arg("function"), py::arg("line"), py::arg("ts"), py::arg("mode") = "fast")
      .def("goto_timestamp",
           [](Session &s, Timestamp ts) { return to_py(to_json(goto_timestamp(s, ts))); },
           py::arg("ts"))
      .def(
          "bookmark",
          [](Session &s, std::string note) { return to_py(to_json(s.bookmark(std::move(note)))); },
          py::arg("annotation") = "")
      .def("goto_bookmark", [](Session &s, int id) { return to_py(to_json(s.goto_bookmark(id))); },
           py::arg("id"))
      .def("evaluate", [](const Session &s, const std::string &e) { return s.evaluate(e); },
           py::arg("expression"))
      .def_property_readonly("position",
                             [](const Session &s) { return to_py(to_json(s.current_position())); })
      .def_property_readonly("last_stop",
                             [](const Session &s) { return to_py(to_json(s.last_stop())); })
      .def_property_readonly("output",
                             [](const Session &s) { return s.machine().state().output; })
      .def_property_readonly("trap_activations", &Session::trap_activations)
      .def_property_readonly("predicate_evaluations", &Session::predicate_evaluations)
      .def(
          "reverse_watchpoint",
          [](Session &s, const std::string &target) {
            auto r = reverse_watchpoint(s, target);
            py::list writes;
            for (const auto &w : r.writes)
              writes.append(to_py(to_json(w)));
            py::dict d;
            d["stop"] = to_py(to_json(r.stop));
            d["writes"] = writes;
            return d;
          },
          py::arg("target"))
      .def(
          "binary_search",
          [](Session &s, const std::string &predicate, Timestamp lo, Timestamp hi) {
            return to_py(to_json(binary_search(s, predicate, lo, hi)));
          },
          py::arg("predicate"), py::arg("lo"), py::arg("hi"));

  py::class_<ProtocolEndpoint>(m, "ProtocolEndpoint")
      .def(py::init<ProgramPtr, std::vector<Value>, std::uint64_t>(), py::arg("program"),
           py::arg("input") = std::vector<Value>{}, py::arg("budget") = kDefaultBudget)
      .def("handle", &ProtocolEndpoint::handle, py::arg("line"),
           "Handles one request line and returns every message it produced.")
      .def_property_readonly("closed", &ProtocolEndpoint::closed);

  m.attr("ENCODED_INCTS_SIZE") = kEncodedIncTsSize;
}
