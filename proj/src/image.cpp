#include "tsdbg/image.hpp"

#include "tsdbg/assembler.hpp"
#include "tsdbg/error.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace tsdbg {

namespace {

constexpr std::uint8_t kMagic[4] = {'T', 'S', 'V', 'M'};

class Writer {
public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void str(const std::string &s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i)
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  std::string str() {
    auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char *>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  // Guards count fields against absurd allocations on corrupt input.
  std::uint32_t count(std::size_t min_item_size) {
    auto n = u32();
    if (static_cast<std::uint64_t>(n) * min_item_size > in_.size() - pos_)
      fail("count exceeds remaining bytes");
    return n;
  }
  [[nodiscard]] bool done() const { return pos_ == in_.size(); }

  [[noreturn]] static void fail(const std::string &why) {
    throw Error(ErrorCode::MalformedImage, "malformed image: " + why);
  }

private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      fail("truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

} // namespace

std::size_t encoded_size(const Instruction &ins) {
  std::size_t n = 1 + 4;
  switch (operand_kind(ins.op)) {
  case OperandKind::Literal: n += 8; break;
  case OperandKind::Slot:
  case OperandKind::Target: n += 4; break;
  case OperandKind::Global:
  case OperandKind::Field: n += 4 + ins.sym.size(); break;
  case OperandKind::Callee: n += 4 + ins.sym.size() + 4; break;
  case OperandKind::None: break;
  }
  return n;
}

std::vector<std::uint8_t> serialize(const Program &program) {
  Writer w;
  for (auto b : kMagic)
    w.u8(b);
  w.u16(kImageVersion);
  w.u32(static_cast<std::uint32_t>(program.globals.size()));
  for (const auto &g : program.globals) {
    w.str(g.name);
    w.i64(g.init);
  }
  w.u32(static_cast<std::uint32_t>(program.functions.size()));
  for (const auto &fn : program.functions) {
    w.str(fn.name);
    w.u32(static_cast<std::uint32_t>(fn.nlocals));
    w.u32(static_cast<std::uint32_t>(fn.body.size()));
    for (const auto &ins : fn.body) {
      w.u8(static_cast<std::uint8_t>(ins.op));
      w.u32(static_cast<std::uint32_t>(ins.line));
      switch (operand_kind(ins.op)) {
      case OperandKind::Literal: w.i64(ins.arg); break;
      case OperandKind::Slot:
      case OperandKind::Target: w.u32(static_cast<std::uint32_t>(ins.arg)); break;
      case OperandKind::Global:
      case OperandKind::Field: w.str(ins.sym); break;
      case OperandKind::Callee:
        w.str(ins.sym);
        w.u32(static_cast<std::uint32_t>(ins.arg));
        break;
      case OperandKind::None: break;
      }
    }
    w.u32(static_cast<std::uint32_t>(fn.handlers.size()));
    for (const auto &h : fn.handlers) {
      w.u32(static_cast<std::uint32_t>(h.start));
      w.u32(static_cast<std::uint32_t>(h.end));
      w.u32(static_cast<std::uint32_t>(h.target));
    }
  }
  return w.take();
}

Program deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (auto b : kMagic)
    if (r.u8() != b)
      Reader::fail("bad magic");
  if (auto v = r.u16(); v != kImageVersion)
    Reader::fail("unsupported version " + std::to_string(v));

  Program p;
  auto nglobals = r.count(12);
  for (std::uint32_t i = 0; i < nglobals; ++i) {
    Global g;
    g.name = r.str();
    g.init = r.i64();
    p.globals.push_back(std::move(g));
  }
  auto nfuncs = r.count(16);
  for (std::uint32_t i = 0; i < nfuncs; ++i) {
    Function fn;
    fn.name = r.str();
    fn.nlocals = r.u32();
    auto nbody = r.count(5);
    for (std::uint32_t k = 0; k < nbody; ++k) {
      Instruction ins;
      auto op = r.u8();
      if (op >= kOpCount)
        Reader::fail("bad opcode " + std::to_string(op));
      ins.op = static_cast<Op>(op);
      auto line = r.u32();
      if (line > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
        Reader::fail("line out of range");
      ins.line = static_cast<int>(line);
      switch (operand_kind(ins.op)) {
      case OperandKind::Literal: ins.arg = r.i64(); break;
      case OperandKind::Slot:
      case OperandKind::Target: ins.arg = r.u32(); break;
      case OperandKind::Global:
      case OperandKind::Field: ins.sym = r.str(); break;
      case OperandKind::Callee:
        ins.sym = r.str();
        ins.arg = r.u32();
        break;
      case OperandKind::None: break;
      }
      fn.body.push_back(std::move(ins));
    }
    auto nhandlers = r.count(12);
    for (std::uint32_t k = 0; k < nhandlers; ++k) {
      Handler h;
      h.start = r.u32();
      h.end = r.u32();
      h.target = r.u32();
      fn.handlers.push_back(h);
    }
    if (!p.functions.empty() && !(p.functions.back().name < fn.name))
      Reader::fail("functions not in canonical order");
    p.functions.push_back(std::move(fn));
  }
  if (!r.done())
    Reader::fail("trailing bytes");
  try {
    validate(p);
  } catch (const Error &e) {
    Reader::fail(e.what());
  }
  return p;
}

Program load_program(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
    return deserialize(bytes);
  return assemble(std::string(bytes.begin(), bytes.end()));
}

void save_image(const std::string &path, const Program &program) {
  auto bytes = serialize(program);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

bool has_timestamps(const Program &program) {
  for (const auto &fn : program.functions)
    if (std::any_of(fn.body.begin(), fn.body.end(),
                    [](const Instruction &i) { return i.op == Op::IncTs; }))
      return true;
  return false;
}

} // namespace tsdbg
