#pragma once

// Little-endian binary reader/writer shared by the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mslm/error.hpp"

namespace mslm::binio {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  template <class T>
  void put_span(std::span<const T> vs) {
    const auto* p = reinterpret_cast<const char*>(vs.data());
    buf_.insert(buf_.end(), p, p + vs.size_bytes());
  }
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  const std::vector<char>& bytes() const { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}
  static Reader open(const std::filesystem::path& path);

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  template <class T>
  void get_into(std::span<T> out) {
    need(out.size_bytes());
    std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("truncated input", pos_);
  }

  std::vector<char> data_;
  std::uint64_t pos_ = 0;
};

/// rows, cols header (2 × u32) + row-major float32 payload.
struct FloatBlob {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;
};

void save_blob(const std::filesystem::path& path, const FloatBlob& blob);
FloatBlob load_blob(const std::filesystem::path& path);

}  // namespace mslm::binio
