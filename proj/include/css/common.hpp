#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace css {

// ---------------------------------------------------------------------------
// Errors. Everything the library throws derives from Error, so callers can
// distinguish "this library failed" from generic std exceptions.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or malformed input data.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A state left the representable / physically sensible range mid-run.
class NumericalBlowupError : public Error {
 public:
  NumericalBlowupError(const std::string& msg, long step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step(step) {}
  long step;
};

/// CFL violation in the tank solver.
class StabilityError : public Error {
 public:
  StabilityError(const std::string& msg, long step, double courant)
      : Error(msg + " (step " + std::to_string(step) +
              ", courant " + std::to_string(courant) + ")"),
        step(step),
        courant(courant) {}
  long step;
  double courant;
};

/// Water depth became non-positive.
class DryCellError : public Error {
 public:
  DryCellError(const std::string& msg, long step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step(step) {}
  long step;
};

/// A channel has (numerically) zero variance and cannot be normalized.
class DegenerateChannelError : public Error {
 public:
  using Error::Error;
};

/// Normal equations are singular and no regularization was requested.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// A requested accuracy could not be certified.
class PrecisionError : public Error {
 public:
  PrecisionError(const std::string& msg, double achieved)
      : Error(msg + " (achieved " + std::to_string(achieved) + ")"),
        achieved(achieved) {}
  double achieved;
};

/// Config file problem, with the offending line when known.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& msg, int line = 0)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line(line) {}
  int line;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInputError(msg);
}

// ---------------------------------------------------------------------------
// Seeding. Every random stream in the library is derived from one master seed
// and a string label, so runs are reproducible and streams are independent.
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return splitmix64(splitmix64(master) ^ fnv1a64(label));
}

/// Deterministic RNG. The normal and subset samplers are written out by hand
/// because the std distribution objects are implementation-defined and would
/// break bit-reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {  // in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, one cached spare
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t below(std::uint64_t n) {  // uniform in [0, n)
    require(n > 0, "Rng::below needs n > 0");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  /// k distinct values from [0, n), partial Fisher-Yates, order deterministic.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n,
                                                        std::uint64_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Formatting and file helpers.
// ---------------------------------------------------------------------------

/// Shortest decimal form that round-trips a double ("%.17g").
std::string format_double(double v);

/// Write contents to path via a temp file + rename, creating parent dirs.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

std::uint64_t fnv1a64_bytes(const void* data, std::size_t n);

/// Little-endian binary buffer writer (file formats are defined LE).
class ByteWriter {
 public:
  void magic(const char tag[4]) { buf_.append(tag, 4); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const void* p, std::size_t n) { raw(p, n); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& data() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string origin)
      : data_(data), origin_(std::move(origin)) {}
  void expect_magic(const char tag[4]);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void bytes(void* p, std::size_t n);
  std::string str();
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n);
  const std::string& data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace css
