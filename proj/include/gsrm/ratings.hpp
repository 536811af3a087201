#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gsrm/error.hpp"

namespace gsrm {

// The seven rubric fields every judgment must carry, in template order.
inline constexpr std::array<const char*, 7> kRubricKeys = {
    "expressive_intensity", "expressive_correctness", "intonation", "nsvs_and_fillers",
    "mispronunciation",     "pacing",                 "overall_score"};

// Optional semantic fields the parser recognizes; anything else is ignored
// with a warning.
inline const std::set<std::string>& known_semantic_keys() {
    static const std::set<std::string> keys = {"language_complexity", "contextual_awareness",
                                               "spontaneity"};
    return keys;
}

inline std::pair<double, double> rating_range(const std::string& key) {
    // mispronunciation: 1 = present, 2 = absent, 3 = unsure; everything else
    // is a 5-point scale.
    if (key == "mispronunciation") return {1.0, 3.0};
    return {1.0, 5.0};
}

struct RatingSet {
    std::map<std::string, double> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::optional<double> get(const std::string& key) const {
        const auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        return it->second;
    }

    double at(const std::string& key) const {
        const auto it = values.find(key);
        if (it == values.end()) fail("RatingSet: missing field '" + key + "'");
        return it->second;
    }

    void set(const std::string& key, double v) { values[key] = v; }

    bool complete() const {
        for (const char* k : kRubricKeys)
            if (!has(k)) return false;
        return true;
    }

    void validate() const {
        for (const auto& [k, v] : values) {
            const auto [lo, hi] = rating_range(k);
            if (!(v >= lo && v <= hi))
                fail("RatingSet: " + k + " = " + std::to_string(v) + " outside [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
    }

    bool operator==(const RatingSet& other) const { return values == other.values; }
};

// Number formatting for the ratings grammar. Integral values on 5-point
// scales render with one decimal ("3.0") and integral mispronunciation values
// render bare ("2"), matching the appendix blocks; everything else uses the
// shortest representation that round-trips exactly.
inline std::string format_rating_value(const std::string& key, double v) {
    const double r = std::round(v);
    if (v == r && std::abs(v) < 1e15) {
        if (key == "mispronunciation") return std::to_string(long(r));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", v);
        return buf;
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// `key: value` lines, canonical rubric order first, then any semantic fields
// in lexical order, LF-separated.
inline std::string render_ratings_lines(const RatingSet& r) {
    std::string out;
    for (const char* k : kRubricKeys)
        if (const auto v = r.get(k)) out += std::string(k) + ": " + format_rating_value(k, *v) + "\n";
    for (const auto& [k, v] : r.values) {
        bool rubric = false;
        for (const char* rk : kRubricKeys) rubric = rubric || k == rk;
        if (!rubric) out += k + ": " + format_rating_value(k, v) + "\n";
    }
    return out;
}

inline std::string render_ratings_block(const RatingSet& r) {
    return "[Final Ratings]\n" + render_ratings_lines(r);
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

inline bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

inline bool looks_like_key(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

} // namespace detail

// Parses `key: value` lines after the LAST "[Final Ratings]" marker. Later
// duplicates win; unknown keys are skipped with a warning; the seven rubric
// fields are required (pass `required` to narrow that, e.g. under ablation)
// and every value must sit inside its declared range.
inline RatingSet parse_ratings_block(const std::string& text,
                                     std::vector<std::string>* warnings = nullptr,
                                     const std::set<std::string>* required = nullptr) {
    const std::size_t marker = text.rfind("[Final Ratings]");
    if (marker == std::string::npos) fail("parse_ratings_block: no [Final Ratings] marker");

    RatingSet out;
    std::size_t pos = marker + std::string("[Final Ratings]").size();
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = detail::trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty()) continue;
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos) continue; // prose after the block
        const std::string key = detail::trim(line.substr(0, colon));
        const std::string value_str = detail::trim(line.substr(colon + 1));
        double value;
        if (!detail::looks_like_key(key) || !detail::parse_number(value_str, value)) continue;

        bool rubric = false;
        for (const char* rk : kRubricKeys) rubric = rubric || key == rk;
        if (!rubric && !known_semantic_keys().count(key)) {
            if (warnings) warnings->push_back("parse_ratings_block: ignoring unknown key '" + key + "'");
            continue;
        }
        const auto [lo, hi] = rating_range(key);
        if (!(value >= lo && value <= hi))
            fail("parse_ratings_block: " + key + " = " + value_str + " outside [" +
                 std::to_string(lo) + ", " + std::to_string(hi) + "]");
        out.set(key, value);
    }
    if (required) {
        for (const std::string& k : *required)
            if (!out.has(k)) fail("parse_ratings_block: missing required key '" + k + "'");
    } else {
        for (const char* k : kRubricKeys)
            if (!out.has(k))
                fail(std::string("parse_ratings_block: missing required key '") + k + "'");
    }
    return out;
}

} // namespace gsrm
