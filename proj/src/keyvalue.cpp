#include "feeder_nilm/keyvalue.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "feeder_nilm/error.hpp"

namespace feeder_nilm {

std::string_view trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

const KeyValueEntry* KeyValueSection::find(std::string_view key) const {
    for (const auto& e : entries) {
        if (e.key == key) {
            return &e;
        }
    }
    return nullptr;
}

KeyValueDocument KeyValueDocument::parse(std::string_view text, std::string source_name) {
    KeyValueDocument doc;
    doc.source_ = std::move(source_name);
    doc.sections_.push_back(KeyValueSection{"", 0, {}});

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(doc.where(line_no) + ": unterminated section header");
            }
            const auto name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) {
                throw ConfigError(doc.where(line_no) + ": empty section name");
            }
            doc.sections_.push_back(KeyValueSection{std::string(name), line_no, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(doc.where(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        // Trailing comments.
        if (const auto hash = value.find(" #"); hash != std::string_view::npos) {
            value = trim(value.substr(0, hash));
        }
        if (key.empty()) {
            throw ConfigError(doc.where(line_no) + ": empty key");
        }
        auto& section = doc.sections_.back();
        if (section.find(key) != nullptr) {
            throw ConfigError(doc.where(line_no) + ": duplicate key '" + std::string(key) + "'");
        }
        section.entries.push_back(KeyValueEntry{std::string(key), std::string(value), line_no});
    }
    return doc;
}

KeyValueDocument KeyValueDocument::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

const KeyValueSection* KeyValueDocument::section(std::string_view name) const {
    for (const auto& s : sections_) {
        if (s.name == name) {
            return &s;
        }
    }
    return nullptr;
}

std::string KeyValueDocument::where(int line) const {
    return source_ + ":" + std::to_string(line);
}

double parse_real(std::string_view text, const std::string& context) {
    const std::string s(trim(text));
    if (s.empty()) {
        throw ConfigError(context + ": expected a number");
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigError(context + ": '" + s + "' is not a finite number");
    }
    return v;
}

std::int64_t parse_integer(std::string_view text, const std::string& context) {
    const std::string s(trim(text));
    if (s.empty()) {
        throw ConfigError(context + ": expected an integer");
    }
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) {
        throw ConfigError(context + ": '" + s + "' is not an integer");
    }
    return v;
}

bool parse_boolean(std::string_view text, const std::string& context) {
    const auto s = trim(text);
    if (s == "true" || s == "yes" || s == "1") {
        return true;
    }
    if (s == "false" || s == "no" || s == "0") {
        return false;
    }
    throw ConfigError(context + ": '" + std::string(s) + "' is not a boolean");
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',')) {
            ++i;
        }
        const auto start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != ',') {
            ++i;
        }
        if (i > start) {
            out.emplace_back(text.substr(start, i - start));
        }
    }
    return out;
}

std::string format_real(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

}  // namespace feeder_nilm
