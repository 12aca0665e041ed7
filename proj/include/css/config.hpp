#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "css/common.hpp"

namespace css {

/// Flat sectioned key-value configuration: `[section]` headers, `key = value`
/// lines, full-line comments starting with `#` or `;`, blank lines ignored.
/// Values keep their verbatim text (no inline comments, no quoting). Every
/// lookup records the key as consumed so a run can reject unrecognized keys
/// with their line numbers — the usual symptom of a typo.
class Config {
 public:
  /// Parses text; `origin` names the source in error messages.
  static Config parse(const std::string& text,
                      const std::string& origin = "<config>");
  /// Reads and parses a file. A missing or unreadable file throws
  /// ConfigError naming the path.
  static Config load(const std::string& path);

  const std::string& origin() const { return origin_; }

  bool has(const std::string& section, const std::string& key) const;

  /// Line number of a key (0 when absent) — for caller-side diagnostics.
  int line_of(const std::string& section, const std::string& key) const;

  // Required lookups: missing key throws ConfigError naming section and key;
  // a malformed value throws with the offending line.
  std::string get_string(const std::string& section,
                         const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  long long get_int(const std::string& section, const std::string& key) const;
  std::uint64_t get_u64(const std::string& section,
                        const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;

  // Defaulted lookups: absent key returns the fallback (and consumes
  // nothing); present-but-malformed still throws.
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

  /// Whitespace-separated list of reals (possibly empty).
  std::vector<double> get_double_list(const std::string& section,
                                      const std::string& key) const;
  /// Whitespace-separated list of words (possibly empty).
  std::vector<std::string> get_string_list(const std::string& section,
                                           const std::string& key) const;

  /// Keys never consumed by any lookup, as "[section] key (line N)" strings
  /// in file order.
  std::vector<std::string> unconsumed() const;

  /// Throws ConfigError listing every unconsumed key. Call once all options
  /// have been read to reject unknown or misspelled keys.
  void require_fully_consumed() const;

  /// The configuration re-serialized in file order: `[section]` headers and
  /// `key = value` lines, comments dropped. Used for manifests.
  std::string canonical_text() const;

 private:
  struct Entry {
    std::string section, key, value;
    int line = 0;
    mutable bool consumed = false;
  };

  const Entry* find(const std::string& section, const std::string& key) const;
  const Entry& need(const std::string& section, const std::string& key) const;

  std::string origin_;
  std::vector<Entry> entries_;                     // file order
  std::map<std::string, std::size_t> index_;       // "section\nkey" -> entry
};

}  // namespace css
