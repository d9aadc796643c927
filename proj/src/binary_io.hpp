#pragma once

// Little helpers for the fixed-endian binary containers. Internal to the
// library; not installed.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dba/error.hpp"

namespace dba::detail {

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len);

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    // Appends crc32 of everything written so far.
    void seal() { u32(crc32_of(buf_.data(), buf_.size())); }

    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& buf, std::string source)
        : buf_(buf), source_(std::move(source)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(source_ + ": truncated at byte " + std::to_string(pos_) + " while reading " + what +
                              " (need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left)");
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return buf_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint32_t u32_be(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | buf_[pos_ + i];
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str(const char* what) {
        const std::uint32_t n = u32(what);
        need(n, what);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    const std::uint8_t* take(std::size_t n, const char* what) {
        need(n, what);
        const std::uint8_t* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }

    // Checks the trailing crc32 written by ByteWriter::seal.
    void verify_seal() const {
        if (buf_.size() < 4) throw FormatError(source_ + ": file too short for checksum");
        const std::size_t body = buf_.size() - 4;
        std::uint32_t stored = 0;
        for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(buf_[body + i]) << (8 * i);
        const std::uint32_t actual = crc32_of(buf_.data(), body);
        if (stored != actual) {
            throw FormatError(source_ + ": checksum mismatch (stored " + std::to_string(stored) + ", computed " +
                              std::to_string(actual) + ")");
        }
    }

    const std::string& source() const { return source_; }

private:
    const std::vector<std::uint8_t>& buf_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace dba::detail
