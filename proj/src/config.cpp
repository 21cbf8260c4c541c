#include "duogate/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

extern char** environ;

namespace duogate {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Config Config::from_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("malformed config line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("malformed config line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("malformed config line " + std::to_string(lineno));
    cfg.entries_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void Config::apply_env(const char* prefix) {
  const std::string pfx(prefix);
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(pfx, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(pfx.size(), eq - pfx.size());
    const std::string value = entry.substr(eq + 1);
    const auto us = name.find('_');
    const std::string key = us == std::string::npos
                                ? lower(name)
                                : lower(name.substr(0, us)) + "." + lower(name.substr(us + 1));
    entries_[key] = value;
  }
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::optional<std::string> Config::raw(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  return raw(key).value_or(fallback);
}

long long Config::integer(const std::string& key, long long fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::size_t pos = 0;
  const long long out = std::stoll(*v, &pos);
  if (pos != v->size()) throw std::invalid_argument("config value for " + key + " is not an integer");
  return out;
}

double Config::real(const std::string& key, double fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::size_t pos = 0;
  const double out = std::stod(*v, &pos);
  if (pos != v->size()) throw std::invalid_argument("config value for " + key + " is not a number");
  return out;
}

bool Config::flag(const std::string& key, bool fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  const std::string s = lower(*v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config value for " + key + " is not a boolean");
}

}  // namespace duogate
