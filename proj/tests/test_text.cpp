#include "retrace/io.hpp"
#include "retrace/text.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace retrace;

TEST(Text, TrimAndBlank) {
  EXPECT_EQ(text::trim("  a b \n"), "a b");
  EXPECT_EQ(text::trim(""), "");
  EXPECT_TRUE(text::is_blank(" \t\n"));
  EXPECT_FALSE(text::is_blank(" x "));
}

TEST(Text, CollapseWhitespace) {
  EXPECT_EQ(text::collapse_whitespace("  a \n\n b\tc  "), "a b c");
  EXPECT_EQ(text::collapse_whitespace("a b"), "a b");
}

TEST(Text, NfcComposes) {
  EXPECT_EQ(text::nfc("é"), "é");
  EXPECT_EQ(text::nfc("plain"), "plain");
}

TEST(Text, CodePoints) {
  EXPECT_EQ(text::code_point_count("aé≤"), 3u);
  EXPECT_EQ(text::to_utf8(text::to_u32("x≤y")), "x≤y");
  std::size_t pos = 0;
  const std::string bad = "\xff" "a";
  EXPECT_EQ(text::decode_at(bad, pos), U'�');
  EXPECT_EQ(pos, 1u);
}

TEST(Io, AtomicWriteAndHash) {
  const auto dir = std::filesystem::temp_directory_path() / "retrace_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.txt";
  write_file_atomic(path, "hello");
  EXPECT_EQ(read_file(path), "hello");
  write_file_atomic(path, "again");
  EXPECT_EQ(read_file(path), "again");
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    EXPECT_EQ(e.path().filename(), "out.txt");
  }
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_THROW(read_file(dir / "missing"), IoError);
  std::filesystem::remove_all(dir);
}
