// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian framing shared by the model and store file formats:
//   magic[8] | u32 version | payload | u32 crc32(magic..payload)

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veridex/checksum.hpp"
#include "veridex/errors.hpp"

namespace veridex::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order and assume little-endian");

class BinaryWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

  // Appends the checksum and writes the whole buffer in one go.
  void finish(const std::filesystem::path& path) {
    const std::uint32_t crc = crc32(buffer_);
    u32(crc);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw DataError("write failed: " + path.string());
  }

  const std::vector<std::uint8_t>& buffer() const { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

class BinaryReader {
 public:
  // Reads the file and validates magic and trailing checksum before any
  // field is decoded.
  BinaryReader(const std::filesystem::path& path, std::string_view magic, std::string what)
      : what_(std::move(what)) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + what_ + " file " + path.string());
    buffer_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buffer_.size() < magic.size() + 8) throw DataError(what_ + " file truncated: " + path.string());
    if (std::memcmp(buffer_.data(), magic.data(), magic.size()) != 0) {
      throw DataError("not a " + what_ + " file (bad magic): " + path.string());
    }
    std::uint32_t stored = 0;
    std::memcpy(&stored, buffer_.data() + buffer_.size() - 4, 4);
    const std::uint32_t actual = crc32(std::span(buffer_.data(), buffer_.size() - 4));
    if (stored != actual) throw DataError(what_ + " file checksum mismatch: " + path.string());
    end_ = buffer_.size() - 4;
    pos_ = magic.size();
  }

  void bytes(void* out, std::size_t n) {
    if (n > end_ - pos_) throw DataError(what_ + " file truncated");
    std::memcpy(out, buffer_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::vector<double> f64s(std::size_t n) {
    if (n > (end_ - pos_) / sizeof(double)) throw DataError(what_ + " file truncated");
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > end_ - pos_) throw DataError(what_ + " file truncated");
    std::string s(reinterpret_cast<const char*>(buffer_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == end_; }

 private:
  std::string what_;
  std::vector<std::uint8_t> buffer_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace veridex::detail
