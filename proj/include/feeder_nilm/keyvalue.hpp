#pragma once

// Line-oriented `key = value` text with `[section]` headers, shared by run
// configs and device libraries. Comments start with '#' or ';'.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace feeder_nilm {

struct KeyValueEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct KeyValueSection {
    std::string name;  // empty for keys that precede the first header
    int line = 0;
    std::vector<KeyValueEntry> entries;

    const KeyValueEntry* find(std::string_view key) const;
};

class KeyValueDocument {
public:
    /// Throws ConfigError on malformed lines or duplicate keys within a section.
    static KeyValueDocument parse(std::string_view text, std::string source_name);
    static KeyValueDocument load(const std::string& path);

    const std::string& source() const { return source_; }
    const std::vector<KeyValueSection>& sections() const { return sections_; }

    /// First section with this exact name, or nullptr.
    const KeyValueSection* section(std::string_view name) const;

    /// "source:line: message" for error reporting.
    std::string where(int line) const;

private:
    std::string source_;
    std::vector<KeyValueSection> sections_;
};

// Value conversions; all throw ConfigError naming `context` on failure.
double parse_real(std::string_view text, const std::string& context);
std::int64_t parse_integer(std::string_view text, const std::string& context);
bool parse_boolean(std::string_view text, const std::string& context);
std::vector<std::string> split_words(std::string_view text);

std::string_view trim(std::string_view text);

/// Shortest-safe decimal rendering of a double with 17 significant digits.
std::string format_real(double value);

}  // namespace feeder_nilm
