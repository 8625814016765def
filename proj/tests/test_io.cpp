#include <gtest/gtest.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "apvar/io.hpp"

using namespace apvar;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("apvar_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void reseal(std::vector<unsigned char>& bytes) {
  std::size_t pos = bytes.size() - 8;
  const auto sum = io::detail::byte_sum(bytes.data(), bytes.size() - 8);
  for (int i = 0; i < 8; ++i) bytes[pos + i] = static_cast<unsigned char>(sum >> (8 * i));
}

}  // namespace

TEST(Cache, RoundTripIsByteIdentical) {
  const auto t = io::build_cached_tables(3000);
  const auto bytes = io::encode_cache(t);
  EXPECT_EQ(bytes.size(), 8u + 2 + 8 + 3001u * 29 + 8);
  const auto back = io::decode_cache(bytes);
  EXPECT_EQ(io::encode_cache(back), bytes);
  ASSERT_EQ(back.n_max(), 3000u);
  for (std::uint64_t n = 1; n <= 3000; ++n) {
    ASSERT_EQ(back.arith.tau(n), t.arith.tau(n));
    ASSERT_EQ(back.arith.mu(n), t.arith.mu(n));
    ASSERT_EQ(back.arith.phi(n), t.arith.phi(n));
    ASSERT_TRUE(back.hecke.tau(n) == t.hecke.tau(n)) << n;
    ASSERT_EQ(back.hecke.a(n), t.hecke.a(n));
  }
}

TEST(Cache, RejectsCorruption) {
  const auto good = io::encode_cache(io::build_cached_tables(200));

  auto flipped = good;
  flipped[100] ^= 0x01;
  EXPECT_THROW(io::decode_cache(flipped), io::CacheError);

  auto magic = good;
  magic[0] = 'X';
  reseal(magic);
  EXPECT_THROW(io::decode_cache(magic), io::CacheError);

  auto version = good;
  version[8] = 2;
  reseal(version);
  EXPECT_THROW(io::decode_cache(version), io::CacheError);

  auto truncated = good;
  truncated.erase(truncated.begin() + 40, truncated.begin() + 69);
  reseal(truncated);
  EXPECT_THROW(io::decode_cache(truncated), io::CacheError);

  EXPECT_THROW(io::decode_cache({}), io::CacheError);
}

TEST(Cache, FindsSmallestCoveringFile) {
  const auto dir = scratch_dir("find");
  for (std::uint64_t n : {500ull, 2000ull, 1000ull}) io::write_file(io::cache_path(dir, n), {1, 2, 3});
  std::ofstream(dir / "tables_abc.apvartab") << "x";
  std::ofstream(dir / "tables_5000.other") << "x";
  EXPECT_EQ(io::find_cache(dir, 800)->filename(), "tables_1000.apvartab");
  EXPECT_EQ(io::find_cache(dir, 1000)->filename(), "tables_1000.apvartab");
  EXPECT_EQ(io::find_cache(dir, 10)->filename(), "tables_500.apvartab");
  EXPECT_FALSE(io::find_cache(dir, 2001).has_value());
  EXPECT_FALSE(io::find_cache(dir / "missing", 1).has_value());
  fs::remove_all(dir);
}

TEST(Cache, LoadOrBuildWritesThenReuses) {
  const auto dir = scratch_dir("load");
  const auto first = io::load_or_build(400, dir);
  const auto path = io::cache_path(dir, 400);
  ASSERT_TRUE(fs::exists(path));
  const auto stamp = fs::last_write_time(path);
  const auto second = io::load_or_build(300, dir);  // served by the 400 file
  EXPECT_EQ(second.n_max(), 400u);
  EXPECT_EQ(fs::last_write_time(path), stamp);
  EXPECT_EQ(io::encode_cache(first), io::encode_cache(second));
  fs::remove_all(dir);
}

TEST(Cache, DirectoryFromEnvironment) {
  ::setenv(io::kCacheDirEnv, "/tmp/somewhere", 1);
  EXPECT_EQ(io::cache_dir(), fs::path("/tmp/somewhere"));
  ::unsetenv(io::kCacheDirEnv);
  EXPECT_EQ(io::cache_dir(), fs::path(".apvar-cache"));
}

TEST(Csv, NumberFormattingRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 12345.0}) {
    const auto s = io::fmt(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
  EXPECT_EQ(io::fmt(0.1), "0.10000000000000001");
  EXPECT_EQ(io::fmt(std::nan("")), "nan");
  EXPECT_EQ(io::fmt(-INFINITY), "-inf");
  EXPECT_EQ(io::fmt(std::uint64_t{42}), "42");
}

TEST(Csv, QuotingAndWidth) {
  EXPECT_EQ(io::csv_field("plain"), "plain");
  EXPECT_EQ(io::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(io::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  io::CsvTable t({"name", "value"});
  t.row(std::string("q^1/2 X^1/2, tau"), 2.0);
  EXPECT_EQ(t.str(), "name,value\n\"q^1/2 X^1/2, tau\",2\n");
  EXPECT_THROW(t.add({"only one"}), std::invalid_argument);
}
