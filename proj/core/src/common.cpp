#include "medgraph/common.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>

namespace medgraph {

std::uint64_t hash_bytes(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  Fnv1a h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw IoError("to_chars failed");
  return std::string(buf, ptr);
}

std::string format_double_sig(double x, int significant) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, x);
  return std::string(buf);
}

double parse_double(std::string_view s, const std::string& context) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("malformed numeric value '" + std::string(s) + "' in " + context);
  return out;
}

long parse_long(std::string_view s, const std::string& context) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("malformed integer value '" + std::string(s) + "' in " + context);
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    std::size_t pos = s.find(sep, begin);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(begin));
      break;
    }
    out.emplace_back(s.substr(begin, pos - begin));
    begin = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace medgraph
