// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskscope {

// Raised on malformed binary input; `offset` is the byte position of the
// problem within the buffer being decoded.
class CodecError : public std::runtime_error {
  public:
    CodecError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

// Little-endian append-only buffer. Strings and blobs are u32
// length-prefixed; doubles travel as their IEEE-754 bit pattern.
class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void raw(const std::uint8_t* data, std::size_t size) {
        buf_.insert(buf_.end(), data, data + size);
    }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    void blob(const std::vector<std::uint8_t>& b) {
        u32(static_cast<std::uint32_t>(b.size()));
        raw(b.data(), b.size());
    }

    std::size_t size() const { return buf_.size(); }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

  private:
    std::vector<std::uint8_t> buf_;
};

// Exact inverse of ByteWriter. Running past the end throws CodecError
// mentioning `what` and the offset where the bytes ran out.
class ByteReader {
  public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8(const char* what) {
        need(1, what);
        return data_[pos_++];
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }

    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }

    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

    std::string str(const char* what) {
        const std::size_t len_at = pos_;
        const std::uint32_t len = u32(what);
        if (size_ - pos_ < len) throw CodecError(std::string("truncated ") + what, len_at);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
        pos_ += len;
        return s;
    }

    std::vector<std::uint8_t> blob(const char* what) {
        const std::size_t len_at = pos_;
        const std::uint32_t len = u32(what);
        if (size_ - pos_ < len) throw CodecError(std::string("truncated ") + what, len_at);
        std::vector<std::uint8_t> b(data_ + pos_, data_ + pos_ + len);
        pos_ += len;
        return b;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

  private:
    void need(std::size_t n, const char* what) {
        if (size_ - pos_ < n) throw CodecError(std::string("truncated ") + what, pos_);
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace taskscope
