#include "css/common.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace css {

std::vector<std::uint64_t> Rng::sample_without_replacement(std::uint64_t n,
                                                           std::uint64_t k) {
  require(k <= n, "cannot sample " + std::to_string(k) + " of " +
                      std::to_string(n) + " without replacement");
  std::vector<std::uint64_t> pool(n);
  for (std::uint64_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::uint64_t> out(k);
  for (std::uint64_t i = 0; i < k; ++i) {
    const std::uint64_t j = i + below(n - i);
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

std::uint64_t fnv1a64_bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ByteReader::need(std::size_t n) {
  if (pos_ + n > data_.size())
    throw InvalidInputError("truncated data in " + origin_);
}

void ByteReader::expect_magic(const char tag[4]) {
  need(4);
  if (std::memcmp(data_.data() + pos_, tag, 4) != 0)
    throw InvalidInputError("bad magic in " + origin_ + ", expected " +
                            std::string(tag, 4));
  pos_ += 4;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

void ByteReader::bytes(void* p, std::size_t n) {
  need(n);
  std::memcpy(p, data_.data() + pos_, n);
  pos_ += n;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(data_.data() + pos_, n);
  pos_ += n;
  return s;
}

}  // namespace css
