#pragma once

// Internal helpers for the versioned binary model container shared by the
// estimator checkpoints and policy checkpoints.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "iqlab/autodiff.hpp"
#include "iqlab/errors.hpp"

namespace iqlab::io {

inline constexpr char kMagic[4] = {'I', 'Q', 'L', 'B'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kKindIqModel = 1;
inline constexpr std::uint32_t kKindSvm = 2;
inline constexpr std::uint32_t kKindPolicy = 3;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot open file for writing: " + path);
  }
  template <class T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(const std::vector<double>& v) {
    put(static_cast<std::uint64_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void put_mat(const ad::Mat& m) {
    put(static_cast<std::int32_t>(m.rows));
    put(static_cast<std::int32_t>(m.cols));
    out_.write(reinterpret_cast<const char*>(m.a.data()),
               static_cast<std::streamsize>(m.a.size() * sizeof(double)));
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open model file: " + path);
  }
  template <class T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw ValidationError(path_ + ": truncated model file");
    return v;
  }
  std::vector<double> get_doubles() {
    const std::uint64_t n = get<std::uint64_t>();
    if (n > (1u << 28)) throw ValidationError(path_ + ": corrupt length field");
    std::vector<double> v(n);
    in_.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw ValidationError(path_ + ": truncated model file");
    return v;
  }
  ad::Mat get_mat() {
    const std::int32_t rows = get<std::int32_t>();
    const std::int32_t cols = get<std::int32_t>();
    if (rows < 0 || cols < 0 || static_cast<std::int64_t>(rows) * cols > (1 << 28))
      throw ValidationError(path_ + ": corrupt matrix header");
    ad::Mat m(rows, cols);
    in_.read(reinterpret_cast<char*>(m.a.data()),
             static_cast<std::streamsize>(m.a.size() * sizeof(double)));
    if (!in_) throw ValidationError(path_ + ": truncated model file");
    return m;
  }
  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
};

inline void write_header(Writer& w, std::uint32_t kind) {
  for (char c : kMagic) w.put(c);
  w.put(kFormatVersion);
  w.put(kind);
}

inline void read_header(Reader& r, std::uint32_t expected_kind,
                        const char* expected_name) {
  char magic[4];
  for (char& c : magic) c = r.get<char>();
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError(r.path() + ": not a model file (bad magic)");
  const std::uint32_t version = r.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw ValidationError(r.path() + ": unsupported model file version " +
                          std::to_string(version));
  const std::uint32_t kind = r.get<std::uint32_t>();
  if (kind != expected_kind)
    throw ValidationError(r.path() + ": model variant mismatch (expected " +
                          std::string(expected_name) + ")");
}

}  // namespace iqlab::io
