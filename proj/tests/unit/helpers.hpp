#pragma once

#include "tsdbg/assembler.hpp"
#include "tsdbg/image.hpp"
#include "tsdbg/instrument.hpp"
#include "tsdbg/vm.hpp"

#include "doctest.h"

#include <memory>
#include <string>

namespace unit {

inline std::string corpus(const std::string &name) {
  return std::string(TSDBG_SOURCE_DIR) + "/corpus/" + name;
}

inline std::shared_ptr<const tsdbg::Program> share(tsdbg::Program p) {
  return std::make_shared<const tsdbg::Program>(std::move(p));
}

inline std::shared_ptr<const tsdbg::Program> instrumented(const std::string &corpus_name) {
  return share(tsdbg::instrument(tsdbg::load_program(corpus(corpus_name))).program);
}

inline std::shared_ptr<const tsdbg::Program> instrumented_src(const std::string &source) {
  return share(tsdbg::instrument(tsdbg::assemble(source)).program);
}

} // namespace unit

// Checks that `expr` throws tsdbg::Error carrying `code_`.
#define CHECK_ERROR_CODE(expr, code_)                                                              \
  do {                                                                                             \
    bool thrown_ = false;                                                                          \
    try {                                                                                          \
      (void)(expr);                                                                                \
    } catch (const tsdbg::Error &e_) {                                                             \
      thrown_ = true;                                                                              \
      CHECK_MESSAGE(e_.code() == (code_), e_.what());                                              \
    }                                                                                              \
    CHECK_MESSAGE(thrown_, #expr " did not throw");                                                \
  } while (0)
