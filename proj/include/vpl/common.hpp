#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vpl {

inline constexpr const char* kToolName = "vpl";
inline constexpr const char* kToolVersion = "0.1.0";

// Malformed input files, failed joins, missing records.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf encountered, diverged training, broken numeric contracts.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void ensure_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite value in ") + what);
    }
}

inline void ensure_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value in ") + what);
        }
    }
}

// FNV-1a, used for input digests and seed derivation.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Stable per-purpose seed streams: derive("dropout"), derive("shuffle"), ...
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = fnv1a64(tag);
    h ^= base + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

// Little-endian encoding helpers for the fixed on-disk formats.
inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::string_view in, std::size_t& pos);
std::uint64_t get_u64(std::string_view in, std::size_t& pos);
void put_f32(std::string& out, float v);
float get_f32(std::string_view in, std::size_t& pos);
void put_f64(std::string& out, double v);
double get_f64(std::string_view in, std::size_t& pos);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::string hex_digest(std::uint64_t h);

}  // namespace vpl
