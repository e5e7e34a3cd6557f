#include "a2d/serialize.hpp"

#include <cstring>
#include <sstream>

namespace a2d::io {

void Writer::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void Writer::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  u64(bits);
}

void Writer::str(const std::string& s) {
  u64(s.size());
  buf_ += s;
}

void Writer::vec(const Vec& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void Writer::mat(const Mat& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) f64(m(i, j));
}

void Writer::ints(const std::vector<int>& v) {
  u64(v.size());
  for (int x : v) i64(x);
}

void Writer::rng(const Rng& r) {
  std::ostringstream os;
  os << r;
  str(os.str());
}

void Reader::need(std::size_t n) {
  if (n > buf_.size() - pos_) throw CorruptFileError("checkpoint is truncated");
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

double Reader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string Reader::str() {
  const std::uint64_t n = u64();
  need(n);
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

Vec Reader::vec() {
  const std::uint64_t n = u64();
  need(n * 8);
  Vec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
  return v;
}

Vec Reader::vec_of(Eigen::Index n, const char* what) {
  Vec v = vec();
  if (v.size() != n) throw CorruptFileError(std::string("checkpoint field has the wrong size: ") + what);
  return v;
}

Mat Reader::mat() {
  const std::uint64_t r = u64();
  const std::uint64_t c = u64();
  if (c != 0 && r > (buf_.size() - pos_) / 8 / c) throw CorruptFileError("checkpoint is truncated");
  Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = f64();
  return m;
}

std::vector<int> Reader::ints() {
  const std::uint64_t n = u64();
  need(n * 8);
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(i64());
  return v;
}

void Reader::rng(Rng& r) {
  std::istringstream is(str());
  Rng tmp;
  is >> tmp;
  if (is.fail()) throw CorruptFileError("checkpoint RNG state is malformed");
  r = tmp;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace a2d::io
