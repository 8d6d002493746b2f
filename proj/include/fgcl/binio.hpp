#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "fgcl/errors.hpp"

namespace fgcl {

// Little-endian byte-buffer writer/reader for the flat file formats (token
// table, checkpoint, index). Everything is staged through a byte vector so a
// CRC32 trailer can cover the whole payload.

class ByteWriter {
  public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

    const std::vector<uint8_t>& bytes() const { return buf_; }

  private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
  public:
    ByteReader(const uint8_t* p, std::size_t n) : p_(p), n_(n) {}

    uint8_t u8() { return take(1)[0]; }
    uint32_t u32() {
        const uint8_t* b = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        const uint8_t* b = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        const uint8_t* b = take(n);
        return std::string(reinterpret_cast<const char*>(b), n);
    }
    std::size_t remaining() const { return n_ - pos_; }

  private:
    const uint8_t* take(std::size_t n) {
        if (pos_ + n > n_) throw CorruptFileError("unexpected end of file");
        const uint8_t* p = p_ + pos_;
        pos_ += n;
        return p;
    }
    const uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

// CRC-32 (IEEE 802.3 polynomial, reflected).
uint32_t crc32(const uint8_t* data, std::size_t n);

// Whole-file helpers; throw IoError on failure.
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file_bytes(const std::string& path);

}  // namespace fgcl
