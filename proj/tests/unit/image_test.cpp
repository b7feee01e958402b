#include "helpers.hpp"

#include "tsdbg/error.hpp"

#include <cstdio>
#include <filesystem>

using namespace tsdbg;

namespace {

std::vector<std::uint8_t> loop_bytes() {
  return serialize(load_program(unit::corpus("while_loop.tsasm")));
}

} // namespace

TEST_CASE("incts encodes to five bytes") {
  Instruction ins;
  ins.op = Op::IncTs;
  ins.line = 7;
  CHECK(encoded_size(ins) == kEncodedIncTsSize);
  CHECK(kEncodedIncTsSize == 5);
}

TEST_CASE("serialization is deterministic") {
  CHECK(loop_bytes() == loop_bytes());
}

TEST_CASE("every truncation is rejected") {
  auto bytes = loop_bytes();
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    CAPTURE(n);
    CHECK_ERROR_CODE(deserialize(std::span(bytes.data(), n)), ErrorCode::MalformedImage);
  }
}

TEST_CASE("bad magic, version, trailing bytes and opcodes") {
  auto bytes = loop_bytes();
  {
    auto b = bytes;
    b[0] ^= 0xff;
    CHECK_ERROR_CODE(deserialize(b), ErrorCode::MalformedImage);
  }
  {
    auto b = bytes;
    b[4] = 0x7f;
    CHECK_ERROR_CODE(deserialize(b), ErrorCode::MalformedImage);
  }
  {
    auto b = bytes;
    b.push_back(0);
    CHECK_ERROR_CODE(deserialize(b), ErrorCode::MalformedImage);
  }
  {
    // Flip every single byte past the header; the decoder must either
    // reject the image or produce a program that validates.
    for (std::size_t i = 6; i < bytes.size(); ++i) {
      auto b = bytes;
      b[i] = 0xee;
      try {
        auto p = deserialize(b);
        validate(p);
      } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::MalformedImage);
      }
    }
  }
}

TEST_CASE("load_program accepts both images and assembly") {
  auto dir = std::filesystem::temp_directory_path() / "tsdbg_image_test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "loop.tsvm").string();
  auto p = load_program(unit::corpus("while_loop.tsasm"));
  save_image(path, p);
  CHECK(load_program(path) == p);
  CHECK_FALSE(has_timestamps(p));
  CHECK(has_timestamps(instrument(p).program));
  CHECK_ERROR_CODE(load_program((dir / "missing").string()), ErrorCode::Io);
  std::filesystem::remove_all(dir);
}
