#include "cadloop/util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cadloop/error.hpp"

namespace cadloop {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::file_not_found: return "FileNotFound";
        case ErrorCode::unsupported_format: return "UnsupportedFormat";
        case ErrorCode::malformed_geometry: return "MalformedGeometry";
        case ErrorCode::zero_area_mesh: return "ZeroAreaMesh";
        case ErrorCode::degenerate_extent: return "DegenerateExtent";
        case ErrorCode::non_finite_geometry: return "NonFiniteGeometry";
        case ErrorCode::parse_error: return "ParseError";
        case ErrorCode::range_error: return "RangeError";
        case ErrorCode::degenerate_solid: return "DegenerateSolid";
        case ErrorCode::generation_exhausted: return "GenerationExhausted";
        case ErrorCode::insufficient_samples: return "InsufficientSamples";
        case ErrorCode::corrupt_payload: return "CorruptPayload";
        case ErrorCode::degenerate_hull: return "DegenerateHull";
        case ErrorCode::reconstruction_failed: return "ReconstructionFailed";
        case ErrorCode::external_tool_error: return "ExternalToolError";
        case ErrorCode::empty_after_holes: return "EmptyAfterHoles";
        case ErrorCode::missing_view: return "MissingView";
        case ErrorCode::duplicate_view: return "DuplicateView";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::empty_union: return "EmptyUnion";
        case ErrorCode::out_of_domain: return "OutOfDomain";
        case ErrorCode::missing_ground_truth: return "MissingGroundTruth";
        case ErrorCode::missing_rollout: return "MissingRollout";
        case ErrorCode::empty_split: return "EmptySplit";
        case ErrorCode::io_error: return "IoError";
        case ErrorCode::timeout: return "Timeout";
        case ErrorCode::bad_response: return "BadResponse";
        case ErrorCode::missing_key: return "MissingKey";
        case ErrorCode::manifest_mismatch: return "ManifestMismatch";
    }
    return "UnknownError";
}

std::string to_hex(uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

namespace {
constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const std::vector<uint8_t>& data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 3 <= data.size()) {
        const uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
        i += 3;
    }
    const size_t rest = data.size() - i;
    if (rest == 1) {
        const uint32_t v = data[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        const uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    std::vector<uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = b64_value(c);
        if (v < 0) throw Error(ErrorCode::corrupt_payload, "invalid base64 character");
        acc = (acc << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<uint8_t>((acc >> bits) & 0xff));
        }
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::file_not_found, path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot open for writing: " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

std::vector<uint8_t> read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::file_not_found, path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> data(size);
    if (size > 0) in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
    if (!in) throw Error(ErrorCode::io_error, "read failed: " + path.string());
    return data;
}

void write_binary_file(const std::filesystem::path& path, const std::vector<uint8_t>& data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot open for writing: " + path.string());
    if (!data.empty())
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

void KeyValueConfig::load_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const size_t last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::io_error,
                        path.string() + ":" + std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            const size_t a = s.find_first_not_of(" \t");
            const size_t b = s.find_last_not_of(" \t");
            s = (a == std::string::npos) ? std::string{} : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(value);
        values_[key] = value;
    }
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
}

int64_t KeyValueConfig::get_int(const std::string& key, int64_t fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoll(it->second);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return it->second == "true" || it->second == "1" || it->second == "yes" || it->second == "on";
}

std::string KeyValueConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::string format_number(double value) {
    if (value == 0.0) return "0";  // avoids "-0"
    char buf[64];
    if (std::abs(value) < 1e15 && value == std::floor(value)) {
        std::snprintf(buf, sizeof(buf), "%.0f", value);
        return buf;
    }
    // Shortest fixed-or-general representation that round-trips through double.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*f", prec, value);
        if (std::strtod(buf, nullptr) == value) return buf;
    }
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
        if (std::strtod(buf, nullptr) == value) return buf;
    }
    return buf;
}

}  // namespace cadloop
