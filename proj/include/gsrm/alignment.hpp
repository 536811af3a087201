#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsrm/error.hpp"

namespace gsrm {

struct StateInterval {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct Phone {
    std::string label; // IPA
    std::string word;  // carrier word
    std::vector<StateInterval> states;
};

struct Utterance {
    std::string transcript;
    std::vector<Phone> phones;
};

struct AlignmentDoc {
    std::string recording_id;
    std::string speaker_id;
    std::vector<Utterance> utterances;
};

struct Span {
    double start_s = 0.0;
    double end_s = 0.0;

    double length_s() const { return end_s - start_s; }
};

struct VowelSegment {
    std::string vowel;
    std::string word;
    std::size_t utterance_index = 0;
    Span full_span;
    Span core_span;
    std::size_t n_states = 0;
};

// Monophthong + diphthong labels that the default inventory file must cover.
inline const std::set<std::string>& default_vowel_inventory() {
    static const std::set<std::string> inv = {
        "o", "iː", "ɪ", "ɔː", "ʌ", "ə", "æ", "ɛ", "a", "e",
        "ɒ", "uː", "ʊ", "ɜ˞", "oʊ", "aɪ", "aʊ", "eɪ", "ɔɪ",
    };
    return inv;
}

// One IPA label per line, UTF-8; blank lines ignored.
inline std::set<std::string> load_vowel_inventory(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("load_vowel_inventory: cannot open '" + path + "'");
    std::set<std::string> inv;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) inv.insert(line);
    }
    if (inv.empty()) fail("load_vowel_inventory: '" + path + "' lists no labels");
    return inv;
}

namespace detail {

inline void validate_states(const std::vector<StateInterval>& states, std::size_t ui,
                            std::size_t pi) {
    const std::string where =
        "utterance " + std::to_string(ui) + ", phone " + std::to_string(pi);
    double prev_end = -1.0;
    for (std::size_t si = 0; si < states.size(); ++si) {
        const StateInterval& s = states[si];
        if (s.start_s < 0.0 || s.end_s < 0.0)
            fail("alignment: negative state time at " + where + ", state " + std::to_string(si));
        if (s.end_s <= s.start_s)
            fail("alignment: state end_s <= start_s at " + where + ", state " +
                 std::to_string(si));
        if (si > 0 && s.start_s < prev_end - 1e-9)
            fail("alignment: overlapping/unsorted states at " + where + ", state " +
                 std::to_string(si));
        prev_end = s.end_s;
    }
}

} // namespace detail

inline AlignmentDoc parse_alignment_json(const nlohmann::json& j, const std::string& origin) {
    AlignmentDoc doc;
    try {
        doc.recording_id = j.at("recording_id").get<std::string>();
        doc.speaker_id = j.at("speaker_id").get<std::string>();
        for (const auto& ju : j.at("utterances")) {
            Utterance u;
            u.transcript = ju.at("transcript").get<std::string>();
            if (ju.contains("phones")) {
                for (const auto& jp : ju["phones"]) {
                    Phone p;
                    p.label = jp.at("label").get<std::string>();
                    p.word = jp.at("word").get<std::string>();
                    for (const auto& js : jp.at("states")) {
                        StateInterval s;
                        s.start_s = js.at("start_s").get<double>();
                        s.end_s = js.at("end_s").get<double>();
                        p.states.push_back(s);
                    }
                    u.phones.push_back(std::move(p));
                }
            }
            doc.utterances.push_back(std::move(u));
        }
    } catch (const nlohmann::json::exception& e) {
        fail("alignment: schema violation in " + origin + ": " + e.what());
    }
    if (doc.recording_id.empty()) fail("alignment: empty recording_id in " + origin);
    for (std::size_t ui = 0; ui < doc.utterances.size(); ++ui)
        for (std::size_t pi = 0; pi < doc.utterances[ui].phones.size(); ++pi)
            detail::validate_states(doc.utterances[ui].phones[pi].states, ui, pi);
    return doc;
}

inline AlignmentDoc parse_alignment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("parse_alignment_file: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("parse_alignment_file: invalid JSON in '" + path + "': " + e.what());
    }
    return parse_alignment_json(j, "'" + path + "'");
}

// Keeps exactly the phones whose label is in the inventory, order preserved.
inline std::vector<Phone> filter_vowels(const AlignmentDoc& doc,
                                        const std::set<std::string>& inventory) {
    std::vector<Phone> out;
    for (const Utterance& u : doc.utterances)
        for (const Phone& p : u.phones)
            if (inventory.count(p.label)) out.push_back(p);
    return out;
}

// Full span is the union of all states. Core span: n >= 5 -> the "middle two"
// states s, s+1 with s = floor((n-2)/2); 3 <= n <= 4 -> the central state at
// floor((n-1)/2); n < 3 -> the full span with 20% trimmed from each edge.
inline VowelSegment compute_spans(const Phone& phone, std::size_t utterance_index = 0) {
    if (phone.states.empty()) fail("compute_spans: phone /" + phone.label + "/ has no states");
    VowelSegment seg;
    seg.vowel = phone.label;
    seg.word = phone.word;
    seg.utterance_index = utterance_index;
    seg.n_states = phone.states.size();
    seg.full_span = {phone.states.front().start_s, phone.states.back().end_s};

    const std::size_t n = phone.states.size();
    if (n >= 5) {
        const std::size_t s = (n - 2) / 2;
        seg.core_span = {phone.states[s].start_s, phone.states[s + 1].end_s};
    } else if (n >= 3) {
        const std::size_t s = (n - 1) / 2;
        seg.core_span = {phone.states[s].start_s, phone.states[s].end_s};
    } else {
        const double len = seg.full_span.length_s();
        seg.core_span = {seg.full_span.start_s + 0.2 * len, seg.full_span.end_s - 0.2 * len};
    }
    return seg;
}

// Document-level convenience: filter + spans with utterance bookkeeping.
inline std::vector<VowelSegment> extract_vowel_segments(const AlignmentDoc& doc,
                                                        const std::set<std::string>& inventory) {
    std::vector<VowelSegment> out;
    for (std::size_t ui = 0; ui < doc.utterances.size(); ++ui)
        for (const Phone& p : doc.utterances[ui].phones)
            if (inventory.count(p.label)) out.push_back(compute_spans(p, ui));
    return out;
}

} // namespace gsrm
