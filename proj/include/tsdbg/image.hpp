#pragma once

#include "tsdbg/isa.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tsdbg {

inline constexpr std::uint16_t kImageVersion = 1;

/// Encoded size of one `incts` instruction (opcode byte + u32 line).
inline constexpr std::size_t kEncodedIncTsSize = 5;

/// Deterministic binary encoding of a Program; layout in docs/image-format.md.
std::vector<std::uint8_t> serialize(const Program &program);

/// Throws Error(MalformedImage) on truncation, bad magic, version mismatch,
/// trailing bytes, or a decoded program that fails validation.
Program deserialize(std::span<const std::uint8_t> bytes);

std::size_t encoded_size(const Instruction &ins);

/// Reads a program file: a binary image when it starts with the image magic,
/// assembly text otherwise. Throws Error(Io) when unreadable.
Program load_program(const std::string &path);

/// Writes serialize(program) to `path`. Throws Error(Io).
void save_image(const std::string &path, const Program &program);

/// True when any function contains `incts`.
bool has_timestamps(const Program &program);

} // namespace tsdbg
