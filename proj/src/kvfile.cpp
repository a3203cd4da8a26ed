#include "bowslab/kvfile.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bowslab/error.hpp"

namespace bowslab {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void KvRecord::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find('=') != std::string::npos || key.find('\n') != std::string::npos)
    throw ValidationError("invalid record key '" + key + "'");
  if (value.find('\n') != std::string::npos) throw ValidationError("record value for '" + key + "' contains a newline");
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KvRecord::set(const std::string& key, double value) { set(key, format_double(value)); }
void KvRecord::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void KvRecord::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

bool KvRecord::has(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> KvRecord::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

const std::string& KvRecord::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw FormatError(FormatError::Kind::BadRecord, "missing key '" + key + "'");
}

double KvRecord::get_double(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(FormatError::Kind::BadRecord, "key '" + key + "': not a number: " + s);
  return v;
}

std::int64_t KvRecord::get_int(const std::string& key) const {
  const std::string& s = get(key);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(FormatError::Kind::BadRecord, "key '" + key + "': not an integer: " + s);
  return v;
}

std::uint64_t KvRecord::get_uint(const std::string& key) const {
  const std::string& s = get(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(FormatError::Kind::BadRecord, "key '" + key + "': not an unsigned integer: " + s);
  return v;
}

bool KvRecord::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw FormatError(FormatError::Kind::BadRecord, "key '" + key + "': not a boolean: " + s);
}

std::string KvRecord::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

KvRecord KvRecord::parse(const std::string& text) {
  KvRecord rec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(FormatError::Kind::BadRecord, "line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    rec.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return rec;
}

void KvRecord::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_string();
}

KvRecord KvRecord::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace bowslab
