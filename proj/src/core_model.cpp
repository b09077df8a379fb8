#include "auditcalib/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "auditcalib/error.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib {

using nlohmann::json;

std::string_view to_string(PromptStrategy s) noexcept {
    switch (s) {
        case PromptStrategy::zero_shot_cot: return "zero_shot_cot";
        case PromptStrategy::role_playing: return "role_playing";
        case PromptStrategy::few_shot: return "few_shot";
    }
    return "zero_shot_cot";
}

PromptStrategy parse_strategy(std::string_view name) {
    std::string n = text::to_lower_ascii(text::trim(name));
    std::replace(n.begin(), n.end(), '-', '_');
    for (const auto s : kAllStrategies) {
        if (n == to_string(s)) return s;
    }
    throw Error(ErrorCode::range, "prompt_strategy", "unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(EvidenceStrength e) noexcept {
    switch (e) {
        case EvidenceStrength::weak: return "weak";
        case EvidenceStrength::moderate: return "moderate";
        case EvidenceStrength::strong: return "strong";
    }
    return "weak";
}

EvidenceStrength parse_evidence_strength(std::string_view token) {
    const std::string t = text::to_lower_ascii(text::trim(token));
    if (t == "weak") return EvidenceStrength::weak;
    if (t == "moderate") return EvidenceStrength::moderate;
    if (t == "strong") return EvidenceStrength::strong;
    throw Error(ErrorCode::range, std::string(field::evidence_strength),
                "expected weak/moderate/strong, got '" + std::string(token) + "'");
}

std::string_view to_string(RecordStatus s) noexcept {
    switch (s) {
        case RecordStatus::ok: return "ok";
        case RecordStatus::parse_error: return "parse_error";
        case RecordStatus::fetch_error: return "fetch_error";
        case RecordStatus::validation_error: return "validation_error";
    }
    return "ok";
}

RecordStatus parse_status(std::string_view name) {
    for (const auto s : {RecordStatus::ok, RecordStatus::parse_error, RecordStatus::fetch_error,
                         RecordStatus::validation_error}) {
        if (name == to_string(s)) return s;
    }
    throw Error(ErrorCode::format, "status", "unknown status '" + std::string(name) + "'");
}

namespace {

const json& require(const json& raw, std::string_view name) {
    const auto it = raw.find(std::string(name));
    if (it == raw.end()) throw Error(ErrorCode::missing_field, std::string(name));
    return *it;
}

double numeric(const json& value, std::string_view name) {
    if (value.is_number()) {
        const double v = value.get<double>();
        if (!std::isfinite(v)) throw Error(ErrorCode::type_mismatch, std::string(name), "non-finite number");
        return v;
    }
    if (value.is_string()) {
        if (const auto v = text::parse_double(value.get_ref<const std::string&>())) return *v;
    }
    throw Error(ErrorCode::type_mismatch, std::string(name), "expected a number, got " + value.dump());
}

double bounded_real(const json& raw, std::string_view name, double lo, double hi) {
    const double v = numeric(require(raw, name), name);
    if (v < lo || v > hi) throw Error(ErrorCode::range, std::string(name), text::format_g17(v) + " outside bounds");
    return v;
}

int bounded_int(const json& raw, std::string_view name, int lo, int hi) {
    const json& value = require(raw, name);
    const double v = numeric(value, name);
    if (v != std::floor(v)) throw Error(ErrorCode::type_mismatch, std::string(name), "expected an integer");
    if (v < lo || v > hi) throw Error(ErrorCode::range, std::string(name), text::format_g17(v) + " outside bounds");
    return static_cast<int>(v);
}

}  // namespace

AuditResponse validate_response(const json& raw) {
    if (!raw.is_object()) throw Error(ErrorCode::type_mismatch, "raw_fields", "expected an object");

    AuditResponse r;
    const json& reasoning = require(raw, field::reasoning);
    if (!reasoning.is_string()) throw Error(ErrorCode::type_mismatch, std::string(field::reasoning));
    r.reasoning = reasoning.get<std::string>();
    if (text::trim(r.reasoning).empty()) throw Error(ErrorCode::range, std::string(field::reasoning), "empty");

    const json& sentences = require(raw, field::extracted_sentences);
    if (!sentences.is_array()) throw Error(ErrorCode::type_mismatch, std::string(field::extracted_sentences));
    for (const auto& s : sentences) {
        if (!s.is_string()) throw Error(ErrorCode::type_mismatch, std::string(field::extracted_sentences));
        r.extracted_sentences.push_back(s.get<std::string>());
    }

    r.confidence = bounded_real(raw, field::confidence, 0.0, 100.0);
    r.uncertainty = bounded_real(raw, field::uncertainty, 0.0, 100.0);
    r.cognitive_load = bounded_int(raw, field::cognitive_load, 1, 5);

    const json& evidence = require(raw, field::evidence_strength);
    if (!evidence.is_string()) throw Error(ErrorCode::type_mismatch, std::string(field::evidence_strength));
    r.evidence_strength = parse_evidence_strength(evidence.get_ref<const std::string&>());

    r.keyword_reliance = bounded_real(raw, field::keyword_reliance, 0.0, 100.0);
    r.alternative_interpretations =
        bounded_int(raw, field::alternative_interpretations, 0, std::numeric_limits<int>::max());
    return r;
}

json to_json(const AuditResponse& r) {
    json j = json::object();
    j[std::string(field::reasoning)] = r.reasoning;
    j[std::string(field::extracted_sentences)] = r.extracted_sentences;
    j[std::string(field::confidence)] = r.confidence;
    j[std::string(field::uncertainty)] = r.uncertainty;
    j[std::string(field::cognitive_load)] = r.cognitive_load;
    j[std::string(field::evidence_strength)] = std::string(to_string(r.evidence_strength));
    j[std::string(field::keyword_reliance)] = r.keyword_reliance;
    j[std::string(field::alternative_interpretations)] = r.alternative_interpretations;
    return j;
}

std::strong_ordering RecordKey::operator<=>(const RecordKey& other) const {
    if (auto c = pmcid <=> other.pmcid; c != 0) return c;
    if (auto c = consort_item <=> other.consort_item; c != 0) return c;
    if (auto c = model_id <=> other.model_id; c != 0) return c;
    return to_string(strategy) <=> to_string(other.strategy);
}

std::string to_string(const RecordKey& key) {
    return key.pmcid + "/" + key.consort_item + "/" + key.model_id + "/" + std::string(to_string(key.strategy));
}

void EvaluationRecord::set_f1(double value) {
    f1 = value;
    if (response) {
        calibration_gap = response->confidence / 100.0 - value;
    } else {
        calibration_gap.reset();
    }
}

void RecordTable::insert(EvaluationRecord record) {
    if (index_.count(record.key) != 0) throw Error(ErrorCode::duplicate_key, to_string(record.key));
    index_.emplace(record.key, records_.size());
    records_.push_back(std::move(record));
}

const EvaluationRecord* RecordTable::find(const RecordKey& key) const {
    const auto it = index_.find(key);
    return it == index_.end() ? nullptr : &records_[it->second];
}

void RecordTable::sort_by_key() {
    std::sort(records_.begin(), records_.end(),
              [](const EvaluationRecord& a, const EvaluationRecord& b) { return a.key < b.key; });
    index_.clear();
    for (std::size_t i = 0; i < records_.size(); ++i) index_.emplace(records_[i].key, i);
}

}  // namespace auditcalib
