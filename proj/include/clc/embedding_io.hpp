#pragma once

// CLCE embedding files: "CLCE", version u32 = 1, rows u32, cols u32, then
// rows*cols little-endian float32 values in row-major order.

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "clc/tensor.hpp"

namespace clc {

inline constexpr std::uint32_t kClceVersion = 1;
inline constexpr std::size_t kClceHeaderBytes = 16;

struct ClceHeader {
    std::uint32_t version = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    // Number of float values actually present after the header.
    std::uint64_t payload_values = 0;
    // Trailing bytes that do not form a whole float.
    std::uint64_t stray_bytes = 0;

    bool complete() const { return stray_bytes == 0 && payload_values == std::uint64_t(rows) * cols; }
};

// Reads the header and measures the payload without decoding it.
ClceHeader read_clce_header(const std::filesystem::path& path);

Matrix read_clce(std::istream& in);
Matrix read_clce(const std::filesystem::path& path);

// Values are narrowed to float32 on write.
void write_clce(std::ostream& out, const Matrix& m);
void write_clce(const std::filesystem::path& path, const Matrix& m);

} // namespace clc
