#include "vcomp/util.hpp"

#include "vcomp/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace vcomp {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kOk: return "ok";
        case ErrorCode::kParse: return "parse error";
        case ErrorCode::kValidation: return "validation error";
        case ErrorCode::kNotFound: return "not found";
        case ErrorCode::kDuplicate: return "duplicate";
        case ErrorCode::kOutOfRange: return "out of range";
        case ErrorCode::kTooLong: return "too long";
        case ErrorCode::kSchema: return "schema error";
        case ErrorCode::kIo: return "i/o error";
        case ErrorCode::kInvalidArgument: return "invalid argument";
        case ErrorCode::kNumerical: return "numerical error";
        case ErrorCode::kInternal: return "internal error";
    }
    return "unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::kIo, "write failed for " + path);
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string_view trim(std::string_view s) noexcept {
    const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && ws(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace vcomp
