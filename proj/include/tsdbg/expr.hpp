#pragma once

#include "tsdbg/vm.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace tsdbg {

struct ExprNode;

/// Side-effect-free expression over a stopped machine: integer literals,
/// `ts`, global names, field chains `g.f.f2`, the operators
/// `+ - * / % == != < <= > >= && || !` and parentheses.
class Expr {
public:
  /// Throws Error(BadExpression) on a syntax error.
  static Expr parse(std::string_view text);

  /// Throws Error(BadExpression) naming the first unknown global.
  void check(const Program &program) const;

  /// Throws Error(BadExpression) on division by zero or a nil handle; the
  /// guest is never affected.
  [[nodiscard]] Value evaluate(const Machine &machine) const;

  [[nodiscard]] const std::string &text() const { return text_; }

  /// For a bare global or a field chain: the written-to target as seen from
  /// the current machine state. Throws Error(UnknownTarget) otherwise.
  [[nodiscard]] WriteTarget as_write_target(const Machine &machine) const;

private:
  std::string text_;
  std::shared_ptr<const ExprNode> root_;
};

} // namespace tsdbg
