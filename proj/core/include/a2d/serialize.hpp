#pragma once

// Little-endian binary encoding used by checkpoints.

#include "a2d/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace a2d::io {

class Writer {
 public:
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void boolean(bool v) { u64(v ? 1 : 0); }
  void str(const std::string& s);
  void vec(const Vec& v);
  void mat(const Mat& m);
  void ints(const std::vector<int>& v);
  void rng(const Rng& r);

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Every read checks bounds and throws CorruptFileError on overrun or on
/// implausible lengths.
class Reader {
 public:
  explicit Reader(const std::string& bytes) : buf_(bytes) {}

  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  bool boolean() { return u64() != 0; }
  std::string str();
  Vec vec();
  Mat mat();
  std::vector<int> ints();
  void rng(Rng& r);
  /// Read a vector and require a specific length.
  Vec vec_of(Eigen::Index n, const char* what);

  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n);
  const std::string& buf_;
  std::size_t pos_ = 0;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace a2d::io
