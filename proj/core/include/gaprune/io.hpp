#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gaprune {

std::string read_file(const std::filesystem::path & p);
void write_file(const std::filesystem::path & p, std::string_view bytes);

// little-endian f64 payloads, independent of host byte order
void append_f64_le(std::string & buf, double v);
void append_f64_le(std::string & buf, const std::vector<double> & vals);
double read_f64_le(const std::string & buf, size_t offset);
std::vector<double> read_f64_le(const std::string & buf, size_t offset, size_t count);

std::string fingerprint_hex(uint64_t fp);
uint64_t file_fingerprint(const std::filesystem::path & p);

} // namespace gaprune
