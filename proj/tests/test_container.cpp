#include <gtest/gtest.h>

#include <cstdint>
#include <string>
#include <vector>

#include "gclr/container.hpp"
#include "test_util.hpp"

using namespace gclr;

namespace {
constexpr io::Magic kTestMagic{'T', 'E', 'S', 'T'};
}

TEST(Container, Crc32KnownValue) {
  const std::string s = "123456789";
  const std::vector<std::uint8_t> b(s.begin(), s.end());
  EXPECT_EQ(io::crc32_of(b), 0xCBF43926u);
}

TEST(Container, LittleEndianLayout) {
  io::ByteWriter w;
  w.put_u32(0x01020304u);
  const std::vector<std::uint8_t> expect{4, 3, 2, 1};
  EXPECT_EQ(w.bytes(), expect);
}

TEST(Container, SealUnsealRoundTrip) {
  io::ByteWriter w;
  w.put_u64(7);
  w.put_f64(-0.125);
  w.put_string("abc");
  w.put_vector(std::vector<double>{1.5, 2.5});
  const auto file = io::seal(kTestMagic, 3, w.bytes());
  const auto payload = io::unseal(file, kTestMagic, 3);
  io::ByteReader r(payload);
  EXPECT_EQ(r.get_u64(), 7u);
  EXPECT_EQ(r.get_f64(), -0.125);
  EXPECT_EQ(r.get_string(), "abc");
  EXPECT_EQ(r.get_vector(), (std::vector<double>{1.5, 2.5}));
  EXPECT_NO_THROW(r.expect_end());
}

TEST(Container, RejectsEmptyShortAndForeignFiles) {
  const std::vector<std::uint8_t> empty;
  EXPECT_THROW(io::unseal(empty, kTestMagic, 1), FormatError);
  const std::vector<std::uint8_t> shortf{'T', 'E'};
  EXPECT_THROW(io::unseal(shortf, kTestMagic, 1), FormatError);
  const auto file = io::seal(kTestMagic, 1, std::vector<std::uint8_t>{1, 2, 3});
  EXPECT_THROW(io::unseal(file, io::Magic{'N', 'O', 'P', 'E'}, 1), FormatError);
  EXPECT_THROW(io::unseal(file, kTestMagic, 2), FormatError);
}

TEST(Container, AnySingleByteFlipIsDetected) {
  const auto file = io::seal(kTestMagic, 1, std::vector<std::uint8_t>{9, 8, 7, 6, 5});
  for (std::size_t i = 8; i < file.size(); ++i) {
    auto bad = file;
    bad[i] ^= 0x10;
    EXPECT_THROW(io::unseal(bad, kTestMagic, 1), IntegrityError) << "byte " << i;
  }
}

TEST(Container, TruncatedPayloadIsFormatError) {
  io::ByteWriter w;
  w.put_u32(5);
  io::ByteReader r(w.bytes());
  EXPECT_THROW(r.get_u64(), FormatError);
}

TEST(Container, FileRoundTrip) {
  const auto dir = gclr::testing::scratch_dir("container");
  const auto file = io::seal(kTestMagic, 1, std::vector<std::uint8_t>{42});
  io::write_file(dir / "x.bin", file);
  EXPECT_EQ(io::read_file(dir / "x.bin"), file);
  EXPECT_THROW(io::read_file(dir / "missing.bin"), Error);
}
