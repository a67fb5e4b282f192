#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include "mixaug/errors.hpp"

// Little-endian byte (de)serialization shared by the checkpoint and raw
// tensor file formats.
namespace mixaug::byteio {

inline void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void append_f64(std::string& out, double v) {
    append_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    std::string name;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) {
            throw LoadError(name + " is truncated");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace mixaug::byteio
