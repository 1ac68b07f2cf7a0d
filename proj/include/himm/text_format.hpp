#pragma once

// Helpers shared by the versioned structured-text formats: exact float
// round-tripping, base64 vectors, field escaping, and a checksum.

#include <cstdint>
#include <string>
#include <vector>

namespace himm::text {

// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);
double parse_double(const std::string& s);

// Little-endian 32-bit floats <-> base64.
std::string encode_floats(const std::vector<float>& v);
std::vector<float> decode_floats(const std::string& b64);

// Raw bytes -> base64.
std::string encode_bytes(const std::string& bytes);

// Percent-encodes whitespace, '%' and control bytes so a free-form text
// field fits into one whitespace-separated token. Empty maps to "%".
std::string encode_field(const std::string& s);
std::string decode_field(const std::string& s);

// FNV-1a over raw bytes, rendered as 16 hex digits.
uint64_t fnv1a(const std::string& bytes);
std::string checksum_hex(const std::string& bytes);

// Splits on runs of spaces/tabs.
std::vector<std::string> split_tokens(const std::string& line);

} // namespace himm::text
