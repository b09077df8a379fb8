#pragma once

// Rule-based behavior labels, non-verbatim extraction checks, pivot phrases
// in rationales, and metacognitive exemplar sampling.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auditcalib/core_model.hpp"
#include "auditcalib/ingest.hpp"
#include "auditcalib/scoring.hpp"
#include "json.hpp"

namespace auditcalib::behavior {

enum class BehaviorLabel {
    evidence_driven,
    generic_completion,
    semantic_hallucination,
    explicit_uncertainty,
    keyword_over_reliance,
};

inline constexpr std::array<BehaviorLabel, 5> kAllLabels{
    BehaviorLabel::evidence_driven, BehaviorLabel::generic_completion, BehaviorLabel::semantic_hallucination,
    BehaviorLabel::explicit_uncertainty, BehaviorLabel::keyword_over_reliance};

std::string_view to_string(BehaviorLabel l) noexcept;

enum class PivotKind { uncertainty_statement, logic_shift, risk_aversion };
std::string_view to_string(PivotKind k) noexcept;

enum class Trigger { uncertainty_phrase, alternative_interpretations, self_justification };
std::string_view to_string(Trigger t) noexcept;

// Thresholds and phrase tables. Phrases are stored lowercased.
struct BehaviorConfig {
    int version = 1;
    double uncertainty_threshold = 50.0;
    double keyword_reliance_threshold = 75.0;
    std::vector<std::string> uncertainty;
    std::vector<std::string> logic_shift;
    std::vector<std::string> risk_aversion;
    std::vector<std::string> self_justification;

    static BehaviorConfig builtin();
    static BehaviorConfig load(const std::string& path);
    // Throws ConfigError on a malformed document.
    static BehaviorConfig parse(std::string_view json_text, const std::string& source);

    nlohmann::json to_json() const;
    // SHA-256 of the canonical JSON form.
    std::string hash() const;
};

// Per sentence: does its normalized form occur in the normalized document?
std::vector<bool> verbatim_check(std::span<const std::string> sentences, const ingest::Document& document);
bool all_verbatim(std::span<const std::string> sentences, const ingest::Document& document);

// First matching rule: hallucination, explicit uncertainty, keyword
// over-reliance, evidence-driven, generic completion. Throws
// UnclassifiableRecord for records that are not ok.
BehaviorLabel classify_behavior(const EvaluationRecord& record, const ingest::Document& document,
                                const scoring::ItemLexicon& lexicon, const BehaviorConfig& config);

struct PivotPoint {
    std::size_t char_offset = 0;  // scalar values from the start of the reasoning
    std::size_t byte_offset = 0;
    PivotKind kind = PivotKind::uncertainty_statement;
    // Verbatim slice from the match to the end of its sentence, at most 120
    // scalar values.
    std::string excerpt;

    bool operator==(const PivotPoint&) const = default;
};

inline constexpr std::size_t kExcerptChars = 120;

// Case-insensitive, word-bounded phrase matches in ascending offset order.
// When phrases start at the same offset the longest one wins.
std::vector<PivotPoint> detect_pivots(std::string_view reasoning, const BehaviorConfig& config);

struct MetacognitiveSample {
    RecordKey key;
    Trigger trigger = Trigger::uncertainty_phrase;
    std::string excerpt;
    double uncertainty = 0.0;
    int alternative_interpretations = 0;
};

// Ok records with at least one trigger, ranked by uncertainty desc, then
// alternative interpretations desc, then key; the top k are returned.
std::vector<MetacognitiveSample> sample_metacognition(const RecordTable& records, std::size_t k,
                                                      const BehaviorConfig& config);

}  // namespace auditcalib::behavior
