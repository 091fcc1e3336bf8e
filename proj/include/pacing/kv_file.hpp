#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace pacing {

// Flat `key = value` text used for rider, bike and sidecar files. Blank lines
// and lines starting with '#' are ignored.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<text>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  std::optional<double> optional_number(const std::string& key) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void set(const std::string& key, double value);

  const std::map<std::string, std::string>& entries() const { return values_; }
  std::string serialize() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

}  // namespace pacing
