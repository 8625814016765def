#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "apvar/arith.hpp"
#include "apvar/forms.hpp"

namespace apvar::io {

class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCacheMagic[8] = {'A', 'P', 'V', 'A', 'R', 'T', 'A', 'B'};
inline constexpr std::uint16_t kCacheVersion = 1;
inline constexpr const char* kCacheDirEnv = "APVAR_CACHE_DIR";

/// Tables stored together in one cache file. Every array has n_max + 1 entries (index 0 included).
struct CachedTables {
  ArithTables arith;
  HeckeTable hecke;
  std::uint64_t n_max() const { return arith.n_max(); }
};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>(u & 0xFFu));
    if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
  }
}

template <class T>
T get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CacheError("cache: truncated file");
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(in[pos + i]) << (8 * i));
  pos += sizeof(T);
  return static_cast<T>(u);
}

inline std::uint64_t byte_sum(const unsigned char* p, std::size_t n) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < n; ++i) s += p[i];
  return s;
}

}  // namespace detail

inline std::vector<unsigned char> encode_cache(const CachedTables& t) {
  const std::uint64_t n = t.n_max();
  const auto& tau = t.arith.tau_array();
  const auto& mu = t.arith.mu_array();
  const auto& phi = t.arith.phi_array();
  const auto& rt = t.hecke.tau_array();
  if (rt.size() != n + 1) throw CacheError("cache: hecke and arithmetic tables differ in length");
  std::vector<unsigned char> out(std::begin(kCacheMagic), std::end(kCacheMagic));
  out.reserve(8 + 2 + 8 + (n + 1) * (4 + 1 + 8 + 16) + 8);
  detail::put_le<std::uint16_t>(out, kCacheVersion);
  detail::put_le<std::uint64_t>(out, n);
  for (std::uint64_t i = 0; i <= n; ++i) detail::put_le<std::uint32_t>(out, tau[i]);
  for (std::uint64_t i = 0; i <= n; ++i) detail::put_le<std::int8_t>(out, mu[i]);
  for (std::uint64_t i = 0; i <= n; ++i) detail::put_le<std::uint64_t>(out, phi[i]);
  for (std::uint64_t i = 0; i <= n; ++i) {
    const auto u = static_cast<unsigned __int128>(rt[i]);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(u));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(u >> 64));
  }
  detail::put_le<std::uint64_t>(out, detail::byte_sum(out.data(), out.size()));
  return out;
}

inline CachedTables decode_cache(const std::vector<unsigned char>& in) {
  if (in.size() < 8 + 2 + 8 + 8 || !std::equal(std::begin(kCacheMagic), std::end(kCacheMagic), in.begin())) {
    throw CacheError("cache: bad magic");
  }
  std::size_t pos = in.size() - 8;
  const auto stored = detail::get_le<std::uint64_t>(in, pos);
  if (stored != detail::byte_sum(in.data(), in.size() - 8)) throw CacheError("cache: checksum mismatch");
  pos = 8;
  const auto version = detail::get_le<std::uint16_t>(in, pos);
  if (version != kCacheVersion) throw CacheError("cache: unsupported version " + std::to_string(version));
  const auto n = detail::get_le<std::uint64_t>(in, pos);
  if (in.size() != 8 + 2 + 8 + (n + 1) * 29 + 8) throw CacheError("cache: size does not match n_max");
  std::vector<std::uint32_t> tau(n + 1);
  std::vector<std::int8_t> mu(n + 1);
  std::vector<std::uint64_t> phi(n + 1);
  std::vector<int128> rt(n + 1);
  for (auto& v : tau) v = detail::get_le<std::uint32_t>(in, pos);
  for (auto& v : mu) v = detail::get_le<std::int8_t>(in, pos);
  for (auto& v : phi) v = detail::get_le<std::uint64_t>(in, pos);
  for (auto& v : rt) {
    const auto lo = detail::get_le<std::uint64_t>(in, pos);
    const auto hi = detail::get_le<std::uint64_t>(in, pos);
    v = static_cast<int128>((static_cast<unsigned __int128>(hi) << 64) | lo);
  }
  return {arith_tables_from_arrays(std::move(tau), std::move(mu), std::move(phi)), HeckeTable(std::move(rt), 12)};
}

inline CachedTables build_cached_tables(std::uint64_t n_max) {
  return {build_arith_tables(n_max), build_hecke_table(n_max)};
}

inline std::filesystem::path cache_dir() {
  const char* env = std::getenv(kCacheDirEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path(".apvar-cache");
}

inline std::filesystem::path cache_path(const std::filesystem::path& dir, std::uint64_t n_max) {
  return dir / ("tables_" + std::to_string(n_max) + ".apvartab");
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw CacheError("cache: cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CacheError("cache: cannot write " + tmp);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CacheError("cache: short write to " + tmp);
  }
  std::filesystem::rename(tmp, p);
}

/// Smallest cached file in `dir` covering n_max, if any.
inline std::optional<std::filesystem::path> find_cache(const std::filesystem::path& dir, std::uint64_t n_max) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return std::nullopt;
  std::optional<std::filesystem::path> best;
  std::uint64_t best_n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    const auto name = e.path().filename().string();
    if (name.rfind("tables_", 0) != 0 || e.path().extension() != ".apvartab") continue;
    const auto digits = name.substr(7, name.size() - 7 - 9);
    std::uint64_t n = 0;
    const auto [p, err] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (err != std::errc() || p != digits.data() + digits.size() || n < n_max) continue;
    if (!best || n < best_n) {
      best = e.path();
      best_n = n;
    }
  }
  return best;
}

/// Loads the smallest cached table set covering n_max, building and storing one if none exists.
inline CachedTables load_or_build(std::uint64_t n_max, const std::filesystem::path& dir = cache_dir()) {
  if (auto p = find_cache(dir, n_max)) return decode_cache(read_file(*p));
  auto t = build_cached_tables(n_max);
  write_file(cache_path(dir, n_max), encode_cache(t));
  return t;
}

// ------------------------------------------------------------------ CSV

/// 17 significant digits, locale independent.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return {buf, r.ptr};
}

inline std::string fmt(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt(std::int64_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... T>
  void row(const T&... v) {
    std::vector<std::string> r{fmt(v)...};
    add(std::move(r));
  }
  void add(std::vector<std::string> r) {
    if (r.size() != header_.size()) throw std::invalid_argument("csv: row width differs from header");
    rows_.push_back(std::move(r));
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) s += ',';
        s += csv_field(r[i]);
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace apvar::io
