#include <random>

#include "auditcalib/core_model.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace auditcalib;
using nlohmann::json;
using test_support::throws_code;

namespace {

json valid_fields() {
    return json{{"reasoning", "The sentence explicitly states the study design."},
                {"extracted_sentences", {"This was a double-blind, randomised trial."}},
                {"confidence", 94.13},
                {"uncertainty", 8.78},
                {"cognitive_load", 2},
                {"evidence_strength", "strong"},
                {"keyword_reliance", 86.84},
                {"alternative_interpretations", 0}};
}

}  // namespace

TEST_CASE("validate_response accepts a high-confidence few-shot profile") {
    const auto r = validate_response(valid_fields());
    CHECK(r.confidence == 94.13);
    CHECK(r.uncertainty == 8.78);
    CHECK(r.keyword_reliance == 86.84);
    CHECK(r.alternative_interpretations == 0);
    CHECK(r.evidence_strength == EvidenceStrength::strong);
    CHECK(r.extracted_sentences.size() == 1);
}

TEST_CASE("validate_response accepts maximal cognitive load with high uncertainty") {
    auto raw = valid_fields();
    raw["cognitive_load"] = 5;
    raw["uncertainty"] = 60;
    const auto r = validate_response(raw);
    CHECK(r.cognitive_load == 5);
    CHECK(r.uncertainty == 60.0);
}

TEST_CASE("validate_response range errors name the field") {
    auto raw = valid_fields();
    raw["confidence"] = -5;
    try {
        validate_response(raw);
        FAIL("expected RangeError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::range);
        CHECK(e.subject() == "confidence");
    }
    raw = valid_fields();
    raw["cognitive_load"] = 0;
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::range));
    raw = valid_fields();
    raw["keyword_reliance"] = 100.0001;
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::range));
    raw = valid_fields();
    raw["alternative_interpretations"] = -1;
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::range));
    raw = valid_fields();
    raw["reasoning"] = "   ";
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::range));
}

TEST_CASE("validate_response missing and mistyped fields") {
    for (const auto name : kResponseFields) {
        auto raw = valid_fields();
        raw.erase(std::string(name));
        const auto e = test_support::caught([&] { validate_response(raw); });
        REQUIRE(e);
        CHECK(e->code() == ErrorCode::missing_field);
        CHECK(e->subject() == name);
    }
    auto raw = valid_fields();
    raw["confidence"] = "high";
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::type_mismatch));
    raw = valid_fields();
    raw["confidence"] = true;
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::type_mismatch));
    raw = valid_fields();
    raw["extracted_sentences"] = "a single string";
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::type_mismatch));
    raw = valid_fields();
    raw["cognitive_load"] = 3.5;
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::type_mismatch));
    CHECK(throws_code([&] { validate_response(json::array()); }, ErrorCode::type_mismatch));
}

TEST_CASE("coercion table: quoted numerals and integer-valued reals") {
    struct Case {
        const char* field;
        json value;
        double expected;
    };
    const Case cases[] = {
        {"confidence", "94.13", 94.13},
        {"confidence", " 80 ", 80.0},
        {"uncertainty", "8.78", 8.78},
        {"keyword_reliance", "1e1", 10.0},
        {"cognitive_load", 3.0, 3.0},
        {"cognitive_load", "4", 4.0},
        {"alternative_interpretations", "2.0", 2.0},
    };
    for (const auto& c : cases) {
        auto raw = valid_fields();
        raw[c.field] = c.value;
        const auto r = validate_response(raw);
        const json back = to_json(r);
        CHECK(back[c.field].get<double>() == c.expected);
    }
    auto raw = valid_fields();
    raw["confidence"] = "nan";
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::type_mismatch));
    raw["confidence"] = "94.13%";
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::type_mismatch));
}

TEST_CASE("evidence strength is a closed, case-insensitive enumeration") {
    auto raw = valid_fields();
    raw["evidence_strength"] = "MODERATE";
    CHECK(validate_response(raw).evidence_strength == EvidenceStrength::moderate);
    raw["evidence_strength"] = "Weak";
    CHECK(validate_response(raw).evidence_strength == EvidenceStrength::weak);
    raw["evidence_strength"] = "very strong";
    CHECK(throws_code([&] { validate_response(raw); }, ErrorCode::range));
}

TEST_CASE("validate_response is total over mutated inputs and round-trips") {
    std::mt19937_64 rng(7);
    const json replacements[] = {json(nullptr), json(true), json("x"), json(-3), json(42), json(101.5),
                                 json(3.25),    json::array(), json::object(), json("55"), json("weak")};
    std::uniform_int_distribution<std::size_t> pick_field(0, kResponseFields.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_value(0, std::size(replacements) - 1);
    int accepted = 0, rejected = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        auto raw = valid_fields();
        const int edits = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < edits; ++k) {
            const std::string name(kResponseFields[pick_field(rng)]);
            if (rng() % 4 == 0) {
                raw.erase(name);
            } else {
                raw[name] = replacements[pick_value(rng)];
            }
        }
        try {
            const auto r = validate_response(raw);
            ++accepted;
            CHECK(r.confidence >= 0.0);
            CHECK(r.confidence <= 100.0);
            CHECK(r.cognitive_load >= 1);
            CHECK(r.cognitive_load <= 5);
            CHECK(validate_response(to_json(r)) == r);
        } catch (const Error& e) {
            ++rejected;
            const bool validation = e.code() == ErrorCode::range || e.code() == ErrorCode::missing_field ||
                                    e.code() == ErrorCode::type_mismatch;
            CHECK(validation);
        }
    }
    CHECK(accepted > 0);
    CHECK(rejected > 0);
}

TEST_CASE("record table enforces key uniqueness") {
    RecordTable table;
    EvaluationRecord rec;
    rec.key = {"PMC1", "3a", "model-a", PromptStrategy::few_shot};
    rec.response = validate_response(valid_fields());
    table.insert(rec);
    CHECK(throws_code([&] { table.insert(rec); }, ErrorCode::duplicate_key));
    rec.key.strategy = PromptStrategy::role_playing;
    table.insert(rec);
    CHECK(table.size() == 2);
    CHECK(table.contains({"PMC1", "3a", "model-a", PromptStrategy::few_shot}));
}

TEST_CASE("record keys order lexicographically with strategy by name") {
    RecordKey a{"PMC1", "10", "m", PromptStrategy::zero_shot_cot};
    RecordKey b{"PMC1", "3a", "m", PromptStrategy::zero_shot_cot};
    CHECK(a < b);
    RecordKey c{"PMC1", "3a", "m", PromptStrategy::few_shot};
    RecordKey d{"PMC1", "3a", "m", PromptStrategy::role_playing};
    CHECK(c < d);
    CHECK(d < b);
}

TEST_CASE("calibration gap equals confidence/100 - f1 by construction") {
    EvaluationRecord rec;
    rec.response = validate_response(valid_fields());
    rec.set_f1(0.25);
    REQUIRE(rec.calibration_gap);
    CHECK(*rec.calibration_gap == 94.13 / 100.0 - 0.25);
}

TEST_CASE("strategy names parse in canonical and hyphenated forms") {
    CHECK(parse_strategy("zero_shot_cot") == PromptStrategy::zero_shot_cot);
    CHECK(parse_strategy("Role-Playing") == PromptStrategy::role_playing);
    CHECK(parse_strategy("few-shot") == PromptStrategy::few_shot);
    CHECK(throws_code([] { parse_strategy("chain"); }, ErrorCode::range));
    CHECK(kAllStrategies.size() == 3);
}
