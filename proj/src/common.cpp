#include "vpl/common.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vpl {

std::uint32_t get_u32(std::string_view in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw DataError("truncated binary input (u32)");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
}

std::uint64_t get_u64(std::string_view in, std::size_t& pos) {
    std::uint64_t lo = get_u32(in, pos);
    std::uint64_t hi = get_u32(in, pos);
    return lo | (hi << 32);
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

float get_f32(std::string_view in, std::size_t& pos) {
    return std::bit_cast<float>(get_u32(in, pos));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

double get_f64(std::string_view in, std::size_t& pos) {
    return std::bit_cast<double>(get_u64(in, pos));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed: " + path);
}

std::string hex_digest(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace vpl
