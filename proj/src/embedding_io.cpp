#include "clc/embedding_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace clc {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'L', 'C', 'E'};

std::uint32_t decode_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

void encode_u32(unsigned char* p, std::uint32_t v) {
    p[0] = static_cast<unsigned char>(v);
    p[1] = static_cast<unsigned char>(v >> 8);
    p[2] = static_cast<unsigned char>(v >> 16);
    p[3] = static_cast<unsigned char>(v >> 24);
}

struct RawHeader {
    std::uint32_t version;
    std::uint32_t rows;
    std::uint32_t cols;
};

RawHeader parse_header(std::istream& in) {
    std::array<unsigned char, kClceHeaderBytes> buf{};
    if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
        throw Error(ErrorKind::ParseError, "CLCE header truncated");
    }
    if (std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0) {
        throw Error(ErrorKind::ParseError, "bad CLCE magic");
    }
    RawHeader h{decode_u32(buf.data() + 4), decode_u32(buf.data() + 8), decode_u32(buf.data() + 12)};
    if (h.version != kClceVersion) {
        throw Error(ErrorKind::ParseError, "unsupported CLCE version " + std::to_string(h.version));
    }
    return h;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    return in;
}

} // namespace

ClceHeader read_clce_header(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    const RawHeader raw = parse_header(in);
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot stat " + path.string());
    }
    const std::uint64_t payload = size - kClceHeaderBytes;
    return ClceHeader{raw.version, raw.rows, raw.cols, payload / 4, payload % 4};
}

Matrix read_clce(std::istream& in) {
    const RawHeader h = parse_header(in);
    const std::size_t count = std::size_t(h.rows) * h.cols;
    std::vector<unsigned char> bytes(count * 4);
    if (count > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()))) {
        throw Error(ErrorKind::ShapeMismatch, "CLCE payload holds fewer than " + std::to_string(h.rows) + "x" +
                                                  std::to_string(h.cols) + " values");
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = static_cast<double>(std::bit_cast<float>(decode_u32(bytes.data() + 4 * i)));
    }
    return Matrix(h.rows, h.cols, std::move(values));
}

Matrix read_clce(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    try {
        return read_clce(in);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void write_clce(std::ostream& out, const Matrix& m) {
    std::array<unsigned char, kClceHeaderBytes> header{};
    std::memcpy(header.data(), kMagic.data(), kMagic.size());
    encode_u32(header.data() + 4, kClceVersion);
    encode_u32(header.data() + 8, static_cast<std::uint32_t>(m.rows()));
    encode_u32(header.data() + 12, static_cast<std::uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(header.data()), header.size());

    std::vector<unsigned char> bytes(m.size() * 4);
    for (std::size_t i = 0; i < m.size(); ++i) {
        encode_u32(bytes.data() + 4 * i, std::bit_cast<std::uint32_t>(static_cast<float>(m.values()[i])));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void write_clce(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    write_clce(out, m);
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

} // namespace clc
