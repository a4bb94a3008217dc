#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cadloop {

/// FNV-1a 64-bit content hash. Used for manifests and content addressing,
/// not for anything security-sensitive.
inline uint64_t fnv1a64(const void* data, size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex(uint64_t value);

std::string base64_encode(const std::vector<uint8_t>& data);
std::vector<uint8_t> base64_decode(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::vector<uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const std::vector<uint8_t>& data);

/// Flat key=value configuration with "section.key" prefixes and '#' comments.
/// Later assignments win, so merge order is defaults < file < flags.
class KeyValueConfig {
public:
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void load_file(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Canonical serialization: sorted "key=value" lines.
    std::string serialize() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Formats a double with trailing-zero trimming: 40.0 -> "40", 0.25 -> "0.25".
/// Shared by the DSL printer and report tables.
std::string format_number(double value);

}  // namespace cadloop
