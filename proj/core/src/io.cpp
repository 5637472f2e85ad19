#include "gaprune/io.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/fnv.hpp"

#include <cstring>
#include <fstream>

namespace gaprune {

std::string read_file(const std::filesystem::path & p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw io_error("cannot open " + p.string());
    }
    std::string out;
    in.seekg(0, std::ios::end);
    out.resize(size_t(in.tellg()));
    in.seekg(0);
    in.read(out.data(), std::streamsize(out.size()));
    if (!in && out.size() > 0) {
        throw io_error("short read on " + p.string());
    }
    return out;
}

void write_file(const std::filesystem::path & p, std::string_view bytes) {
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw io_error("cannot open " + p.string() + " for writing");
    }
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) {
        throw io_error("short write on " + p.string());
    }
}

void append_f64_le(std::string & buf, double v) {
    uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
        buf.push_back(char(uint8_t(bits >> (8 * i))));
    }
}

void append_f64_le(std::string & buf, const std::vector<double> & vals) {
    buf.reserve(buf.size() + vals.size() * 8);
    for (double v : vals) {
        append_f64_le(buf, v);
    }
}

double read_f64_le(const std::string & buf, size_t offset) {
    if (offset + 8 > buf.size()) {
        throw io_error("f64 read past end of buffer");
    }
    uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
        bits = (bits << 8) | uint8_t(buf[offset + size_t(i)]);
    }
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::vector<double> read_f64_le(const std::string & buf, size_t offset, size_t count) {
    std::vector<double> out(count);
    for (size_t i = 0; i < count; ++i) {
        out[i] = read_f64_le(buf, offset + i * 8);
    }
    return out;
}

std::string fingerprint_hex(uint64_t fp) {
    static const char * digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[size_t(i)] = digits[fp & 0xf];
        fp >>= 4;
    }
    return s;
}

uint64_t file_fingerprint(const std::filesystem::path & p) {
    const std::string bytes = read_file(p);
    return fnv1a64(bytes.data(), bytes.size());
}

} // namespace gaprune
