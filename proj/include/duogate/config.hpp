#pragma once

#include <map>
#include <optional>
#include <string>

namespace duogate {

// Flat INI-style configuration: "[section]" headers, "key = value" lines,
// '#'/';' comments. Keys are stored as "section.key". Values are strings;
// typed getters parse on access. Precedence: file < DUOGATE_* environment
// (DUOGATE_SECTION_KEY, first underscore splits section from key) < explicit
// set() calls (command-line overrides).
class Config {
 public:
  Config() = default;

  static Config from_text(const std::string& text);
  static Config from_file(const std::string& path);

  void apply_env(const char* prefix = "DUOGATE_");
  void set(const std::string& key, const std::string& value);

  std::optional<std::string> raw(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  double real(const std::string& key, double fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace duogate
