#include "pacing/kv_file.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pacing/errors.hpp"

namespace pacing {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": empty key or value");
    }
    if (kv.values_.count(key)) {
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    kv.values_.emplace(std::move(key), std::move(value));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const std::string& KeyValueFile::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError(origin_ + ": missing key '" + key + "'");
  return it->second;
}

double KeyValueFile::number(const std::string& key) const {
  const std::string& s = text(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError(origin_ + ": key '" + key + "' is not a number: " + s);
  }
  return out;
}

std::optional<double> KeyValueFile::optional_number(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return number(key);
}

void KeyValueFile::set(const std::string& key, double value) {
  std::ostringstream os;
  os.precision(10);
  os << value;
  values_[key] = os.str();
}

std::string KeyValueFile::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace pacing
