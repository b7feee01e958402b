// Acceptance suite: one PASS/FAIL line per criterion.

#include "checks.hpp"

#include "tsdbg/autodebug.hpp"
#include "tsdbg/control.hpp"
#include "tsdbg/error.hpp"
#include "tsdbg/image.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

using namespace tsdbg;
using namespace tsdbg::testing;

namespace {

int failures = 0;

void report(const char *name, const std::string &scope, const CheckResult &r, double seconds) {
  if (!r.ok)
    ++failures;
  std::printf("%s %-26s %s (%.2fs)%s%s\n", r.ok ? "PASS" : "FAIL", name, scope.c_str(), seconds,
              r.ok ? "" : ": ", r.ok ? "" : r.detail.c_str());
  std::fflush(stdout);
}

double timed(const std::function<void()> &f) {
  auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void need(CheckResult &r, std::size_t minimum, const char *what) {
  if (r.checked < minimum)
    r.fail("only " + std::to_string(r.checked) + " " + what + ", need " + std::to_string(minimum));
}

// lo = 0, hi = 1024 on an empty loop whose final ts is exactly 1024.
CheckResult search_1024(const std::string &corpus_dir) {
  CheckResult r;
  r.checked = 1;
  auto program = make_entry(load_program(corpus_dir + "/empty_loop.tsasm"), {1022});
  if (program.final_state.tsstate.ts != 1024) {
    r.fail("empty loop with N = 1022 did not end at ts 1024");
    return r;
  }
  Session s(program.instrumented, program.gen.input);
  auto out = binary_search(s, "ts < 700", 0, 1024);
  if (out.boundary_ts != 700)
    r.fail("boundary " + std::to_string(out.boundary_ts) + ", expected 700");
  else if (out.probes.size() > ceil_log2(1024) + 2)
    r.fail(std::to_string(out.probes.size()) + " probes for hi - lo = 1024");
  return r;
}

} // namespace

int main() {
  const std::string root = TSDBG_SOURCE_DIR;
  const std::string corpus_dir = root + "/corpus";

  std::vector<CorpusProgram> corpus;
  const double build_s = timed([&] { corpus = build_corpus(200, 1); });
  std::printf("corpus: %zu generated programs (%.2fs)\n", corpus.size(), build_s);

  {
    CheckResult r;
    double t = timed([&] { r = check_transparency(corpus); });
    need(r, 200, "programs");
    if (t >= 60)
      r.fail("took longer than a minute");
    report("transparency", std::to_string(r.checked) + " programs", r, t);
  }
  {
    CheckResult r;
    double t = timed([&] { r = check_uniqueness(corpus); });
    need(r, 200, "programs");
    report("uniqueness-monotonicity", std::to_string(r.checked) + " programs", r, t);
  }
  {
    CheckResult r;
    double t = timed([&] { r = check_fast_equals_slow(corpus, 3); });
    need(r, 100, "positions");
    report("dynamic-breakpoint", std::to_string(r.checked) + " positions", r, t);
  }
  {
    CheckResult r;
    double t = timed([&] {
      GenOptions opts;
      opts.write_bias = 30;
      auto injected = build_corpus(200, 100'000, opts);
      r = check_reverse_watchpoint(injected);
    });
    need(r, 100, "landings");
    report("reverse-watchpoint", std::to_string(r.checked) + " landings", r, t);
  }
  {
    CheckResult r, fixed;
    double t = timed([&] {
      r = check_binary_search(corpus);
      fixed = search_1024(corpus_dir);
    });
    if (!fixed.ok)
      r.fail(fixed.detail);
    need(r, 100, "monotone predicates");
    report("binary-search", std::to_string(r.checked) + " predicates + [0,1024]", r, t);
  }
  {
    CheckResult r;
    double t = timed([&] { r = check_empty_loop(corpus_dir, {0, 1, 5, 1'000'000}); });
    report("increment-closed-form", "N in {0, 1, 5, 10^6}", r, t);
  }
  {
    CheckResult r;
    double t = timed([&] { r = check_size_increase(corpus, corpus_dir); });
    report("size-increase", std::to_string(r.checked) + " programs", r, t);
  }
  {
    CheckResult r;
    const bool update = std::getenv("TSDBG_UPDATE_GOLDENS") != nullptr;
    double t = timed([&] { r = check_goldens(root + "/tests/golden", root, update); });
    report("protocol-goldens", std::to_string(r.checked) + " transcripts", r, t);
  }
  return failures == 0 ? 0 : 1;
}
