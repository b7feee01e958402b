#pragma once

#include "tsdbg/isa.hpp"

#include <string>
#include <string_view>

namespace tsdbg {

/// Parses `.tsasm` source into a validated Program.
///
/// Grammar, one item per line, `#` starting a comment:
///
///     .global name init
///     .func name nlocals
///     .line n
///     label:            (may prefix an instruction on the same line)
///     mnemonic [operands]
///     .handler start end target
///
/// Labels are local to the enclosing `.func`. Branch and handler operands
/// accept either a label or a raw instruction index. Every instruction takes
/// the line of the most recent `.line` in its function.
///
/// Throws Error with SyntaxError, UnresolvedLabel, UnresolvedCall,
/// UnknownGlobal, DuplicateFunction or InvalidProgram.
Program assemble(std::string_view source);

/// Renders a Program back to `.tsasm`. Branch targets and handler bounds
/// become `L<index>` labels, so assemble(disassemble(p)) == p.
std::string disassemble(const Program &program);

} // namespace tsdbg
