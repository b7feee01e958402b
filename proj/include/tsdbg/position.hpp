#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tsdbg {

using Timestamp = std::uint64_t;

/// Static coordinate: a source line inside a function.
struct Location {
  std::string function;
  int line = 0;

  auto operator<=>(const Location &) const = default;
};

/// Dynamic coordinate: a location qualified by the timestamp in effect when
/// it executed.
struct Position {
  Location location;
  Timestamp ts = 0;

  auto operator<=>(const Position &) const = default;
};

/// "main:2"
std::string to_string(const Location &loc);
/// "main:2@8"
std::string to_string(const Position &pos);

/// Accepts "func:line".
std::optional<Location> parse_location(std::string_view text);
/// Accepts "func:line@ts".
std::optional<Position> parse_position(std::string_view text);

} // namespace tsdbg
