#pragma once

#include "tsdbg/isa.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tsdbg::testing {

struct GenOptions {
  /// Probability weight of an extra write to global `w` per statement slot.
  int write_bias = 0;
  /// Upper bound on the estimated instruction count of one run.
  int cost_limit = 6000;
  int max_functions = 4;
};

struct Generated {
  std::uint64_t seed = 0;
  std::string source;
  std::vector<Value> input;
};

/// Terminating random program in assembly form. Contains loops, bounded
/// self-recursion, calls, throws with handlers (some uncaught), heap records
/// and occasional faults. Globals: `w` (write target), `cnt` (incremented
/// on every loop iteration and call, so `cnt < k` is monotone over ts),
/// `h0`/`h1` (record handles) and a few scratch globals.
Generated generate(std::uint64_t seed, const GenOptions &options = {});

} // namespace tsdbg::testing
