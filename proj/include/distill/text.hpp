#pragma once

// Small ASCII text helpers shared by metrics, label extraction and parsing.

#include <cctype>
#include <string>
#include <string_view>

namespace distill {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Strips leading/trailing punctuation (quotes included) after trimming.
inline std::string strip_punct_edges(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (is_space(s[b]) || is_punct(s[b]))) ++b;
    while (e > b && (is_space(s[e - 1]) || is_punct(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

} // namespace distill
