#include "himm/text_format.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "himm/errors.hpp"

namespace himm::text {

std::string format_double(double v) {
    // Try increasing precision until the text parses back to the same bits.
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw IntegrityError("malformed number: '" + s + "'");
    return v;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::string b64_encode(const unsigned char* data, size_t n) {
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (size_t i = 0; i < n; i += 3) {
        uint32_t word = uint32_t(data[i]) << 16;
        if (i + 1 < n) word |= uint32_t(data[i + 1]) << 8;
        if (i + 2 < n) word |= uint32_t(data[i + 2]);
        out.push_back(kB64[(word >> 18) & 63]);
        out.push_back(kB64[(word >> 12) & 63]);
        out.push_back(i + 1 < n ? kB64[(word >> 6) & 63] : '=');
        out.push_back(i + 2 < n ? kB64[word & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> b64_decode(const std::string& s) {
    if (s.size() % 4 != 0) throw IntegrityError("bad base64 length");
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    for (size_t i = 0; i < s.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            char c = s[i + j];
            if (c == '=') {
                vals[j] = 0;
                ++pad;
            } else {
                vals[j] = b64_value(c);
                if (vals[j] < 0 || pad > 0) throw IntegrityError("bad base64 byte");
            }
        }
        uint32_t word = (uint32_t(vals[0]) << 18) | (uint32_t(vals[1]) << 12) |
                        (uint32_t(vals[2]) << 6) | uint32_t(vals[3]);
        out.push_back((word >> 16) & 0xFF);
        if (pad < 2) out.push_back((word >> 8) & 0xFF);
        if (pad < 1) out.push_back(word & 0xFF);
    }
    return out;
}
} // namespace

std::string encode_bytes(const std::string& bytes) {
    return b64_encode(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

std::string encode_floats(const std::vector<float>& v) {
    std::vector<unsigned char> bytes(v.size() * 4);
    for (size_t i = 0; i < v.size(); ++i) {
        uint32_t bits;
        std::memcpy(&bits, &v[i], 4);
        bytes[4 * i + 0] = bits & 0xFF;
        bytes[4 * i + 1] = (bits >> 8) & 0xFF;
        bytes[4 * i + 2] = (bits >> 16) & 0xFF;
        bytes[4 * i + 3] = (bits >> 24) & 0xFF;
    }
    return b64_encode(bytes.data(), bytes.size());
}

std::vector<float> decode_floats(const std::string& b64) {
    auto bytes = b64_decode(b64);
    if (bytes.size() % 4 != 0) throw IntegrityError("float blob size not a multiple of 4");
    std::vector<float> v(bytes.size() / 4);
    for (size_t i = 0; i < v.size(); ++i) {
        uint32_t bits = uint32_t(bytes[4 * i]) | (uint32_t(bytes[4 * i + 1]) << 8) |
                        (uint32_t(bytes[4 * i + 2]) << 16) | (uint32_t(bytes[4 * i + 3]) << 24);
        std::memcpy(&v[i], &bits, 4);
    }
    return v;
}

std::string encode_field(const std::string& s) {
    if (s.empty()) return "%";
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (c <= 0x20 || c == 0x7F || c == '%') {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        } else {
            out.push_back(char(c));
        }
    }
    return out;
}

std::string decode_field(const std::string& s) {
    if (s == "%") return "";
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%') {
            if (i + 2 >= s.size()) throw IntegrityError("truncated escape in field");
            auto hexval = [](char c) -> int {
                if (c >= '0' && c <= '9') return c - '0';
                if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                return -1;
            };
            int hi = hexval(s[i + 1]), lo = hexval(s[i + 2]);
            if (hi < 0 || lo < 0) throw IntegrityError("bad escape in field");
            out.push_back(char(hi * 16 + lo));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string checksum_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)fnv1a(bytes));
    return buf;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

} // namespace himm::text
