#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>

#include <fmt/format.h>

#include "boxprompt/storage.hpp"

namespace boxprompt {

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreamble = 10;  // magic + version + uint16 header length
constexpr std::size_t kAlignment = 64;

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
}

/// Minimal reader for the Python-literal header dict.
class HeaderParser {
public:
    explicit HeaderParser(std::string_view text) : text_(text) {}

    /// Position just after "'key':" (either quote style), or npos.
    std::size_t find_value(std::string_view key) const {
        for (char q : {'\'', '"'}) {
            const std::string needle = std::string(1, q) + std::string(key) + q;
            auto pos = text_.find(needle);
            if (pos == std::string_view::npos) continue;
            pos = skip_ws(pos + needle.size());
            if (pos < text_.size() && text_[pos] == ':') return skip_ws(pos + 1);
        }
        return std::string_view::npos;
    }

    std::string string_value(std::string_view key) const {
        auto pos = require(key);
        const char q = text_[pos];
        if (q != '\'' && q != '"') bad(key);
        const auto end = text_.find(q, pos + 1);
        if (end == std::string_view::npos) bad(key);
        return std::string(text_.substr(pos + 1, end - pos - 1));
    }

    bool bool_value(std::string_view key) const {
        auto pos = require(key);
        if (text_.substr(pos, 4) == "True") return true;
        if (text_.substr(pos, 5) == "False") return false;
        bad(key);
    }

    std::vector<long long> tuple_value(std::string_view key) const {
        auto pos = require(key);
        if (text_[pos] != '(') bad(key);
        const auto end = text_.find(')', pos);
        if (end == std::string_view::npos) bad(key);
        std::vector<long long> dims;
        std::size_t i = pos + 1;
        while (i < end) {
            i = skip_ws(i);
            if (i >= end) break;
            if (!std::isdigit(static_cast<unsigned char>(text_[i]))) bad(key);
            long long v = 0;
            while (i < end && std::isdigit(static_cast<unsigned char>(text_[i]))) {
                v = v * 10 + (text_[i] - '0');
                if (v > (1LL << 40)) bad(key);
                ++i;
            }
            dims.push_back(v);
            i = skip_ws(i);
            if (i < end && text_[i] == ',') ++i;
            else if (i < end) bad(key);
        }
        return dims;
    }

private:
    std::size_t skip_ws(std::size_t pos) const {
        while (pos < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos]))) ++pos;
        return pos;
    }
    std::size_t require(std::string_view key) const {
        const auto pos = find_value(key);
        if (pos == std::string_view::npos || pos >= text_.size()) bad(key);
        return pos;
    }
    [[noreturn]] static void bad(std::string_view key) {
        throw Error(ErrorKind::BadMagic, fmt::format("NPY header field '{}' is missing or malformed", key));
    }

    std::string_view text_;
};

}  // namespace

std::vector<char> encode_probmap(const ProbabilityMap& map) {
    validate_probabilities(map);
    std::string header = fmt::format("{{'descr': '<f4', 'fortran_order': False, 'shape': ({}, {}), }}",
                                     map.height(), map.width());
    const std::size_t unpadded = kPreamble + header.size() + 1;
    const std::size_t padded = (unpadded + kAlignment - 1) / kAlignment * kAlignment;
    header.append(padded - unpadded, ' ');
    header.push_back('\n');

    std::string prefix(kMagic, sizeof kMagic);
    prefix += '\x01';
    prefix += '\x00';
    prefix += static_cast<char>(header.size() & 0xff);
    prefix += static_cast<char>((header.size() >> 8) & 0xff);
    prefix += header;

    std::vector<char> out(prefix.size() + map.size() * 4);
    std::memcpy(out.data(), prefix.data(), prefix.size());
    char* dst = out.data() + prefix.size();
    for (float v : map.values()) {
        const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
        std::memcpy(dst, &bits, 4);
        dst += 4;
    }
    return out;
}

ProbabilityMap decode_probmap(const std::vector<char>& bytes) {
    if (bytes.size() < kPreamble || std::memcmp(bytes.data(), kMagic, 6) != 0) {
        throw Error(ErrorKind::BadMagic, "missing NPY magic string");
    }
    if (bytes[6] != 1 || bytes[7] != 0) {
        throw Error(ErrorKind::BadMagic,
                    fmt::format("NPY version {}.{} is not supported, need 1.0", int(bytes[6]), int(bytes[7])));
    }
    const std::size_t header_len =
        static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    if (bytes.size() < kPreamble + header_len) {
        throw Error(ErrorKind::TruncatedPayload, "NPY header is cut short");
    }
    const HeaderParser header(std::string_view(bytes.data() + kPreamble, header_len));

    const std::string descr = header.string_value("descr");
    if (descr != "<f4") {
        throw Error(ErrorKind::WrongDtype, "NPY dtype '" + descr + "', expected '<f4'");
    }
    if (header.bool_value("fortran_order")) {
        throw Error(ErrorKind::UnsupportedLayout, "Fortran-ordered NPY arrays are not supported");
    }
    const auto shape = header.tuple_value("shape");
    if (shape.size() != 2) {
        throw Error(ErrorKind::WrongRank, fmt::format("NPY array has rank {}, expected 2", shape.size()));
    }
    const long long rows = shape[0], cols = shape[1];
    if (rows > (1 << 20) || cols > (1 << 20)) {
        throw Error(ErrorKind::WrongRank, fmt::format("NPY shape ({}, {}) is too large", rows, cols));
    }
    const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    const std::size_t payload = bytes.size() - kPreamble - header_len;
    if (payload != count * 4) {
        throw Error(ErrorKind::TruncatedPayload,
                    fmt::format("NPY payload holds {} bytes, shape needs {}", payload, count * 4));
    }

    std::vector<float> values(count);
    const char* src = bytes.data() + kPreamble + header_len;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, src + 4 * i, 4);
        values[i] = std::bit_cast<float>(to_little(bits));
    }
    ProbabilityMap map(static_cast<int>(cols), static_cast<int>(rows), std::move(values));
    validate_probabilities(map);
    return map;
}

ProbabilityMap read_probmap(const fs::path& path) {
    try {
        return decode_probmap(read_file_bytes(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        throw Error(e.kind(), path.string() + ": " + e.detail());
    }
}

void write_probmap(const fs::path& path, const ProbabilityMap& map) {
    const auto bytes = encode_probmap(map);
    write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace boxprompt
