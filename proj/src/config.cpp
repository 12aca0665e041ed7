#include "css/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <sstream>

namespace css {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string slot(const std::string& section, const std::string& key) {
  return section + '\n' + key;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  bool seen_section = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      const std::size_t close = line.find(']');
      if (close == std::string::npos)
        throw ConfigError(origin + ": unterminated section header", line_no);
      if (trim(line.substr(close + 1)).size() != 0)
        throw ConfigError(origin + ": trailing text after section header",
                          line_no);
      section = trim(line.substr(1, close - 1));
      if (section.empty())
        throw ConfigError(origin + ": empty section name", line_no);
      seen_section = true;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ": expected `key = value` or a section header",
                        line_no);
    if (!seen_section)
      throw ConfigError(origin + ": key before any [section] header", line_no);
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty())
      throw ConfigError(origin + ": empty key", line_no);
    const std::string id = slot(e.section, e.key);
    if (cfg.index_.count(id) != 0)
      throw ConfigError(origin + ": duplicate key `" + e.key + "` in [" +
                            e.section + "], first set on line " +
                            std::to_string(cfg.entries_[cfg.index_[id]].line),
                        line_no);
    cfg.index_[id] = cfg.entries_.size();
    cfg.entries_.push_back(std::move(e));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse(text, path);
}

const Config::Entry* Config::find(const std::string& section,
                                  const std::string& key) const {
  const auto it = index_.find(slot(section, key));
  if (it == index_.end()) return nullptr;
  const Entry& e = entries_[it->second];
  e.consumed = true;
  return &e;
}

const Config::Entry& Config::need(const std::string& section,
                                  const std::string& key) const {
  const Entry* e = find(section, key);
  if (e == nullptr)
    throw ConfigError(origin_ + ": missing required key `" + key + "` in [" +
                      section + "]");
  return *e;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return index_.count(slot(section, key)) != 0;
}

int Config::line_of(const std::string& section, const std::string& key) const {
  const auto it = index_.find(slot(section, key));
  return it == index_.end() ? 0 : entries_[it->second].line;
}

std::string Config::get_string(const std::string& section,
                               const std::string& key) const {
  return need(section, key).value;
}

std::string Config::get_string(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e == nullptr ? fallback : e->value;
}

namespace {

double to_double(const std::string& text, const std::string& origin,
                 const std::string& key, int line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || text.empty() || errno == ERANGE)
    throw ConfigError(origin + ": `" + key + "` is not a real number: `" +
                          text + "`",
                      line);
  return v;
}

long long to_int(const std::string& text, const std::string& origin,
                 const std::string& key, int line) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || text.empty() || errno == ERANGE)
    throw ConfigError(origin + ": `" + key + "` is not an integer: `" + text +
                          "`",
                      line);
  return v;
}

std::uint64_t to_u64(const std::string& text, const std::string& origin,
                     const std::string& key, int line) {
  if (!text.empty() && text[0] == '-')
    throw ConfigError(origin + ": `" + key + "` must be nonnegative: `" +
                          text + "`",
                      line);
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || text.empty() || errno == ERANGE)
    throw ConfigError(origin + ": `" + key +
                          "` is not an unsigned integer: `" + text + "`",
                      line);
  return static_cast<std::uint64_t>(v);
}

bool to_bool(const std::string& text, const std::string& origin,
             const std::string& key, int line) {
  if (text == "true" || text == "yes" || text == "on" || text == "1")
    return true;
  if (text == "false" || text == "no" || text == "off" || text == "0")
    return false;
  throw ConfigError(origin + ": `" + key + "` is not a boolean: `" + text +
                        "` (use true/false, yes/no, on/off, 1/0)",
                    line);
}

}  // namespace

double Config::get_double(const std::string& section,
                          const std::string& key) const {
  const Entry& e = need(section, key);
  return to_double(e.value, origin_, key, e.line);
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  const Entry* e = find(section, key);
  return e == nullptr ? fallback : to_double(e->value, origin_, key, e->line);
}

long long Config::get_int(const std::string& section,
                          const std::string& key) const {
  const Entry& e = need(section, key);
  return to_int(e.value, origin_, key, e.line);
}

long long Config::get_int(const std::string& section, const std::string& key,
                          long long fallback) const {
  const Entry* e = find(section, key);
  return e == nullptr ? fallback : to_int(e->value, origin_, key, e->line);
}

std::uint64_t Config::get_u64(const std::string& section,
                              const std::string& key) const {
  const Entry& e = need(section, key);
  return to_u64(e.value, origin_, key, e.line);
}

std::uint64_t Config::get_u64(const std::string& section,
                              const std::string& key,
                              std::uint64_t fallback) const {
  const Entry* e = find(section, key);
  return e == nullptr ? fallback : to_u64(e->value, origin_, key, e->line);
}

bool Config::get_bool(const std::string& section,
                      const std::string& key) const {
  const Entry& e = need(section, key);
  return to_bool(e.value, origin_, key, e.line);
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
  const Entry* e = find(section, key);
  return e == nullptr ? fallback : to_bool(e->value, origin_, key, e->line);
}

std::vector<double> Config::get_double_list(const std::string& section,
                                            const std::string& key) const {
  const Entry& e = need(section, key);
  std::istringstream in(e.value);
  std::vector<double> out;
  std::string word;
  while (in >> word) out.push_back(to_double(word, origin_, key, e.line));
  return out;
}

std::vector<std::string> Config::get_string_list(
    const std::string& section, const std::string& key) const {
  const Entry& e = need(section, key);
  std::istringstream in(e.value);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

std::vector<std::string> Config::unconsumed() const {
  std::vector<std::string> out;
  for (const Entry& e : entries_)
    if (!e.consumed)
      out.push_back("[" + e.section + "] " + e.key + " (line " +
                    std::to_string(e.line) + ")");
  return out;
}

void Config::require_fully_consumed() const {
  const std::vector<std::string> extra = unconsumed();
  if (extra.empty()) return;
  std::string msg = origin_ + ": unrecognized key";
  if (extra.size() > 1) msg += 's';
  msg += ":";
  for (const std::string& k : extra) msg += " " + k + ";";
  msg.pop_back();
  throw ConfigError(msg, 0);
}

std::string Config::canonical_text() const {
  std::string out;
  std::string section;
  bool first = true;
  for (const Entry& e : entries_) {
    if (first || e.section != section) {
      if (!first) out += '\n';
      out += "[" + e.section + "]\n";
      section = e.section;
      first = false;
    }
    out += e.key + " = " + e.value + "\n";
  }
  return out;
}

}  // namespace css
