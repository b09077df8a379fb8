#include "auditcalib/behavior.hpp"

#include <algorithm>
#include <optional>

#include "auditcalib/error.hpp"
#include "auditcalib/resources.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::behavior {

namespace {

struct Match {
    std::size_t offset = 0;
    std::size_t length = 0;
};

// Earliest word-bounded match of any phrase; longest wins at equal offsets.
std::optional<Match> first_match(std::string_view lower, const std::vector<std::string>& phrases) {
    std::optional<Match> best;
    for (const auto& p : phrases) {
        const auto hits = text::find_phrase(lower, p);
        if (hits.empty()) continue;
        const Match m{hits.front(), p.size()};
        if (!best || m.offset < best->offset || (m.offset == best->offset && m.length > best->length)) best = m;
    }
    return best;
}

std::string excerpt_at(std::string_view reasoning, std::size_t offset, std::size_t match_length) {
    const auto tail = reasoning.substr(offset);
    auto end = tail.find_first_of(".!?\n", std::min(match_length, tail.size()));
    end = end == std::string_view::npos ? tail.size() : (tail[end] == '\n' ? end : end + 1);
    return std::string(text::utf8_prefix(tail.substr(0, end), kExcerptChars));
}

std::vector<std::string> phrase_array(const nlohmann::json& phrases, const char* name, const std::string& source) {
    if (!phrases.contains(name) || !phrases[name].is_array()) {
        throw Error(ErrorCode::config, source, std::string("phrases.") + name + " must be an array");
    }
    std::vector<std::string> out;
    for (const auto& p : phrases[name]) {
        if (!p.is_string()) throw Error(ErrorCode::config, source, std::string("phrases.") + name + " holds a non-string");
        auto normalized = text::normalize_for_match(p.get<std::string>());
        if (!normalized.empty()) out.push_back(std::move(normalized));
    }
    return out;
}

double number_field(const nlohmann::json& doc, const char* name, const std::string& source) {
    if (!doc.contains(name) || !doc[name].is_number()) {
        throw Error(ErrorCode::config, source, std::string(name) + " must be a number");
    }
    return doc[name].get<double>();
}

}  // namespace

std::string_view to_string(BehaviorLabel l) noexcept {
    switch (l) {
        case BehaviorLabel::evidence_driven: return "evidence_driven";
        case BehaviorLabel::generic_completion: return "generic_completion";
        case BehaviorLabel::semantic_hallucination: return "semantic_hallucination";
        case BehaviorLabel::explicit_uncertainty: return "explicit_uncertainty";
        case BehaviorLabel::keyword_over_reliance: return "keyword_over_reliance";
    }
    return "unknown";
}

std::string_view to_string(PivotKind k) noexcept {
    switch (k) {
        case PivotKind::uncertainty_statement: return "uncertainty_statement";
        case PivotKind::logic_shift: return "logic_shift";
        case PivotKind::risk_aversion: return "risk_aversion";
    }
    return "unknown";
}

std::string_view to_string(Trigger t) noexcept {
    switch (t) {
        case Trigger::uncertainty_phrase: return "uncertainty_phrase";
        case Trigger::alternative_interpretations: return "alternative_interpretations";
        case Trigger::self_justification: return "self_justification";
    }
    return "unknown";
}

// --- configuration ----------------------------------------------------------

BehaviorConfig BehaviorConfig::parse(std::string_view json_text, const std::string& source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config, source, e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::config, source, "top level must be an object");
    BehaviorConfig c;
    if (!doc.contains("version") || !doc["version"].is_number_integer()) {
        throw Error(ErrorCode::config, source, "version must be an integer");
    }
    c.version = doc["version"].get<int>();
    c.uncertainty_threshold = number_field(doc, "uncertainty_threshold", source);
    c.keyword_reliance_threshold = number_field(doc, "keyword_reliance_threshold", source);
    if (!doc.contains("phrases") || !doc["phrases"].is_object()) {
        throw Error(ErrorCode::config, source, "phrases must be an object");
    }
    const auto& p = doc["phrases"];
    c.uncertainty = phrase_array(p, "uncertainty", source);
    c.logic_shift = phrase_array(p, "logic_shift", source);
    c.risk_aversion = phrase_array(p, "risk_aversion", source);
    c.self_justification = phrase_array(p, "self_justification", source);
    return c;
}

BehaviorConfig BehaviorConfig::builtin() { return parse(resources::get("behavior.json"), "behavior.json"); }
BehaviorConfig BehaviorConfig::load(const std::string& path) { return parse(text::read_file(path), path); }

nlohmann::json BehaviorConfig::to_json() const {
    return {{"version", version},
            {"uncertainty_threshold", uncertainty_threshold},
            {"keyword_reliance_threshold", keyword_reliance_threshold},
            {"phrases",
             {{"uncertainty", uncertainty},
              {"logic_shift", logic_shift},
              {"risk_aversion", risk_aversion},
              {"self_justification", self_justification}}}};
}

std::string BehaviorConfig::hash() const { return text::sha256_hex(to_json().dump()); }

// --- verbatim check ---------------------------------------------------------

std::vector<bool> verbatim_check(std::span<const std::string> sentences, const ingest::Document& document) {
    const auto haystack = text::normalize_for_match(document.combined);
    std::vector<bool> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(haystack.find(text::normalize_for_match(s)) != std::string::npos);
    return out;
}

bool all_verbatim(std::span<const std::string> sentences, const ingest::Document& document) {
    const auto flags = verbatim_check(sentences, document);
    return std::all_of(flags.begin(), flags.end(), [](bool b) { return b; });
}

// --- classification ---------------------------------------------------------

BehaviorLabel classify_behavior(const EvaluationRecord& record, const ingest::Document& document,
                                const scoring::ItemLexicon& lexicon, const BehaviorConfig& config) {
    if (!record.ok()) {
        throw Error(ErrorCode::unclassifiable_record, to_string(record.key),
                    "record status is " + std::string(to_string(record.status)));
    }
    const auto& r = *record.response;
    if (!all_verbatim(r.extracted_sentences, document)) return BehaviorLabel::semantic_hallucination;

    const auto reasoning = text::normalize_for_match(r.reasoning);
    const bool uncertain_phrase = std::any_of(config.uncertainty.begin(), config.uncertainty.end(),
                                              [&](const std::string& p) { return text::contains_phrase(reasoning, p); });
    if (r.uncertainty >= config.uncertainty_threshold || uncertain_phrase) return BehaviorLabel::explicit_uncertainty;
    if (r.keyword_reliance >= config.keyword_reliance_threshold) return BehaviorLabel::keyword_over_reliance;

    bool term = false;
    try {
        term = lexicon.mentions(record.key.consort_item, reasoning);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::unknown_item) throw;
    }
    if (!r.extracted_sentences.empty() && term) return BehaviorLabel::evidence_driven;
    return BehaviorLabel::generic_completion;
}

// --- pivots -----------------------------------------------------------------

std::vector<PivotPoint> detect_pivots(std::string_view reasoning, const BehaviorConfig& config) {
    const auto lower = text::to_lower_ascii(reasoning);
    const std::pair<PivotKind, const std::vector<std::string>*> tables[] = {
        {PivotKind::uncertainty_statement, &config.uncertainty},
        {PivotKind::logic_shift, &config.logic_shift},
        {PivotKind::risk_aversion, &config.risk_aversion},
    };
    struct Hit {
        std::size_t offset, length;
        PivotKind kind;
    };
    std::vector<Hit> hits;
    for (const auto& [kind, phrases] : tables) {
        for (const auto& p : *phrases) {
            for (const auto off : text::find_phrase(lower, p)) hits.push_back({off, p.size(), kind});
        }
    }
    // Ascending offset; at one offset the longest phrase, then table order.
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.offset != b.offset) return a.offset < b.offset;
        return a.length > b.length;
    });
    std::vector<PivotPoint> out;
    for (const auto& h : hits) {
        if (!out.empty() && out.back().byte_offset == h.offset) continue;
        out.push_back({text::utf8_length(reasoning.substr(0, h.offset)), h.offset, h.kind,
                       excerpt_at(reasoning, h.offset, h.length)});
    }
    return out;
}

// --- metacognition ----------------------------------------------------------

std::vector<MetacognitiveSample> sample_metacognition(const RecordTable& records, std::size_t k,
                                                      const BehaviorConfig& config) {
    if (k == 0) throw Error(ErrorCode::range, "k", "sample size must be at least 1");
    std::vector<MetacognitiveSample> candidates;
    for (const auto& rec : records.records()) {
        if (!rec.ok()) continue;
        const auto& r = *rec.response;
        const auto lower = text::to_lower_ascii(r.reasoning);
        MetacognitiveSample s{rec.key, Trigger::uncertainty_phrase, {}, r.uncertainty, r.alternative_interpretations};
        if (const auto m = first_match(lower, config.uncertainty)) {
            s.excerpt = excerpt_at(r.reasoning, m->offset, m->length);
        } else if (r.alternative_interpretations >= 1) {
            s.trigger = Trigger::alternative_interpretations;
            s.excerpt = std::string(text::utf8_prefix(r.reasoning, kExcerptChars));
        } else if (const auto j = first_match(lower, config.self_justification)) {
            s.trigger = Trigger::self_justification;
            s.excerpt = excerpt_at(r.reasoning, j->offset, j->length);
        } else {
            continue;
        }
        candidates.push_back(std::move(s));
    }
    std::sort(candidates.begin(), candidates.end(), [](const MetacognitiveSample& a, const MetacognitiveSample& b) {
        if (a.uncertainty != b.uncertainty) return a.uncertainty > b.uncertainty;
        if (a.alternative_interpretations != b.alternative_interpretations) {
            return a.alternative_interpretations > b.alternative_interpretations;
        }
        return a.key < b.key;
    });
    if (candidates.size() > k) candidates.resize(k);
    return candidates;
}

}  // namespace auditcalib::behavior
