#pragma once

// Audit-output schema, record identifiers and the record table shared by
// every stage of the pipeline.

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace auditcalib {

enum class PromptStrategy { zero_shot_cot, role_playing, few_shot };

inline constexpr std::array<PromptStrategy, 3> kAllStrategies{
    PromptStrategy::zero_shot_cot, PromptStrategy::role_playing, PromptStrategy::few_shot};

std::string_view to_string(PromptStrategy s) noexcept;
// Accepts the canonical names plus hyphenated spellings ("zero-shot-cot").
PromptStrategy parse_strategy(std::string_view name);

enum class EvidenceStrength { weak, moderate, strong };

std::string_view to_string(EvidenceStrength e) noexcept;
// Case-insensitive; anything outside the three variants is a RangeError.
EvidenceStrength parse_evidence_strength(std::string_view token);

enum class RecordStatus { ok, parse_error, fetch_error, validation_error };

std::string_view to_string(RecordStatus s) noexcept;
RecordStatus parse_status(std::string_view name);

// One structured audit produced by a model for a (paper, item) pair.
// Scalars keep the model's 0-100 scale; normalization happens in calibration.
struct AuditResponse {
    std::string reasoning;
    std::vector<std::string> extracted_sentences;
    double confidence = 0.0;        // [0, 100]
    double uncertainty = 0.0;       // [0, 100]
    int cognitive_load = 1;         // [1, 5]
    EvidenceStrength evidence_strength = EvidenceStrength::weak;
    double keyword_reliance = 0.0;  // [0, 100]
    int alternative_interpretations = 0;

    bool operator==(const AuditResponse&) const = default;
};

namespace field {
inline constexpr std::string_view reasoning = "reasoning";
inline constexpr std::string_view extracted_sentences = "extracted_sentences";
inline constexpr std::string_view confidence = "confidence";
inline constexpr std::string_view uncertainty = "uncertainty";
inline constexpr std::string_view cognitive_load = "cognitive_load";
inline constexpr std::string_view evidence_strength = "evidence_strength";
inline constexpr std::string_view keyword_reliance = "keyword_reliance";
inline constexpr std::string_view alternative_interpretations = "alternative_interpretations";
}  // namespace field

inline constexpr std::array<std::string_view, 8> kResponseFields{
    field::reasoning,        field::extracted_sentences, field::confidence,
    field::uncertainty,      field::cognitive_load,      field::evidence_strength,
    field::keyword_reliance, field::alternative_interpretations};

// Checks every field of a parsed model output and builds a response.
// Throws Error{missing_field | type_mismatch | range} naming the field.
// Quoted numerals ("94.13") and integer-valued reals (3.0) are coerced.
AuditResponse validate_response(const nlohmann::json& raw_fields);

nlohmann::json to_json(const AuditResponse& response);

struct RecordKey {
    std::string pmcid;
    std::string consort_item;
    std::string model_id;
    PromptStrategy strategy = PromptStrategy::zero_shot_cot;

    bool operator==(const RecordKey&) const = default;
    // Lexicographic on (pmcid, item, model, strategy name).
    std::strong_ordering operator<=>(const RecordKey& other) const;
};

std::string to_string(const RecordKey& key);

struct EvaluationRecord {
    RecordKey key;
    // Present only when status is ok.
    std::optional<AuditResponse> response;
    std::optional<double> f1;
    std::optional<int> reasoning_score;
    std::optional<double> compliance_score;
    std::optional<double> calibration_gap;
    RecordStatus status = RecordStatus::ok;

    bool ok() const noexcept { return status == RecordStatus::ok && response.has_value(); }

    // Sets f1 and the derived gap, confidence/100 - f1.
    void set_f1(double value);

    bool operator==(const EvaluationRecord&) const = default;
};

// Records unique on their 4-part key. Insertion order is kept until
// sort_by_key() is called.
class RecordTable {
public:
    RecordTable() = default;

    // Throws Error{duplicate_key}.
    void insert(EvaluationRecord record);
    bool contains(const RecordKey& key) const { return index_.count(key) != 0; }
    const EvaluationRecord* find(const RecordKey& key) const;

    std::span<const EvaluationRecord> records() const noexcept { return records_; }
    std::span<EvaluationRecord> records() noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    void sort_by_key();

    bool operator==(const RecordTable& other) const { return records_ == other.records_; }

private:
    std::vector<EvaluationRecord> records_;
    std::map<RecordKey, std::size_t> index_;
};

struct GroundTruthAnnotation {
    std::string pmcid;
    std::string consort_item;
    std::vector<std::string> benchmark_sentences;

    bool operator==(const GroundTruthAnnotation&) const = default;
};

// Canonical column order of the record table.
inline constexpr std::array<std::string_view, 17> kRecordColumns{
    "pmcid",          "consort_item",
    "model_id",       "prompt_strategy",
    "confidence",     "uncertainty",
    "cognitive_load", "evidence_strength",
    "keyword_reliance", "alternative_interpretations",
    "reasoning",      "extracted_sentences",
    "f1",             "reasoning_score",
    "compliance_score", "calibration_gap",
    "status"};

}  // namespace auditcalib
